#include "bat/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bat {

namespace {

double log_in_base(double x, LogBase b) {
    return b == LogBase::natural ? std::log(x) : std::log10(x);
}

double ln_of_base(LogBase b) { return b == LogBase::natural ? 1.0 : std::log(10.0); }

bool neg_term_all_classes(LossFamily f) {
    return f == LossFamily::CECL || f == LossFamily::WCECL || f == LossFamily::CECLA;
}

bool neg_term_predicted_only(LossFamily f) {
    return f == LossFamily::PBP || f == LossFamily::PBPA;
}

}  // namespace

DatasetStats DatasetStats::from_counts(std::vector<long> counts) {
    if (counts.size() < 2) throw config_error("DatasetStats: need at least 2 classes");
    for (long c : counts)
        if (c < 1) throw config_error("DatasetStats: every class count must be >= 1");
    DatasetStats s;
    s.n_classes = static_cast<int>(counts.size());
    s.total = std::accumulate(counts.begin(), counts.end(), 0L);
    s.counts = std::move(counts);
    return s;
}

bool WeightScheme::has_beta() const {
    return kind == WeightKind::standard || kind == WeightKind::ee || kind == WeightKind::array ||
           (kind == WeightKind::custom && !beta.empty());
}

double WeightScheme::pos_weight(int c) const {
    switch (kind) {
        case WeightKind::none: return 1.0;
        case WeightKind::array: {
            const int C = static_cast<int>(alpha.size());
            return array[static_cast<std::size_t>(c) * C + c];
        }
        default: return alpha[static_cast<std::size_t>(c)];
    }
}

double WeightScheme::neg_weight(int j, int c) const {
    switch (kind) {
        case WeightKind::none: return 1.0;
        case WeightKind::wce_optimal: return 0.0;
        case WeightKind::array: {
            const int C = static_cast<int>(alpha.size());
            return array[static_cast<std::size_t>(j) * C + c];  // column of the true class
        }
        case WeightKind::custom:
            return beta.empty() ? 0.0 : beta[static_cast<std::size_t>(j)];
        default: return beta[static_cast<std::size_t>(j)];
    }
}

WeightScheme make_weights(WeightKind kind, const DatasetStats& stats) {
    const int C = stats.n_classes;
    const double N = static_cast<double>(stats.total);
    WeightScheme w;
    w.kind = kind;
    auto Ni = [&](int i) { return static_cast<double>(stats.counts[static_cast<std::size_t>(i)]); };
    auto check_not_full = [&](int i) {
        if (stats.counts[static_cast<std::size_t>(i)] == stats.total)
            throw config_error("make_weights: class " + std::to_string(i) +
                               " holds every sample; beta weight N/(N-N_i) is undefined");
    };
    switch (kind) {
        case WeightKind::none:
            break;
        case WeightKind::wce_optimal:
            for (int i = 0; i < C; ++i) w.alpha.push_back(N / Ni(i));
            break;
        case WeightKind::standard:
            for (int i = 0; i < C; ++i) {
                w.alpha.push_back((N - Ni(i)) / N);
                w.beta.push_back(Ni(i) / N);
            }
            break;
        case WeightKind::ee:
            for (int i = 0; i < C; ++i) {
                check_not_full(i);
                w.alpha.push_back(N / Ni(i));
                w.beta.push_back(N / (N - Ni(i)));
            }
            break;
        case WeightKind::array:
            w.alpha.resize(static_cast<std::size_t>(C));
            w.array.resize(static_cast<std::size_t>(C) * C);
            for (int i = 0; i < C; ++i) {
                w.alpha[static_cast<std::size_t>(i)] = N / Ni(i);
                for (int j = 0; j < C; ++j)
                    w.array[static_cast<std::size_t>(i) * C + j] =
                        i == j ? N / Ni(i) : N / ((C - 1) * Ni(j));
            }
            break;
        case WeightKind::custom:
            throw config_error("make_weights: custom weights need explicit vectors");
    }
    return w;
}

WeightScheme make_custom_weights(std::vector<double> alpha, std::vector<double> beta) {
    WeightScheme w;
    w.kind = WeightKind::custom;
    w.alpha = std::move(alpha);
    w.beta = std::move(beta);
    return w;
}

void LossSpec::validate() const {
    if (gamma != 0.0 && gamma != 1.0)
        throw config_error("LossSpec: focal gamma must be 0 or 1");
    if (lambda < 1.0) throw config_error("LossSpec: lambda must be >= 1");
    const WeightKind k = weights.kind;
    auto require = [&](bool ok, const char* what) {
        if (!ok)
            throw config_error(std::string("LossSpec: ") + family_name(family) +
                               " is incompatible with weight scheme " + weight_kind_name(k) +
                               " (" + what + ")");
    };
    switch (family) {
        case LossFamily::CE:
        case LossFamily::FCE:
        case LossFamily::CECL:
            require(k == WeightKind::none, "unweighted family");
            break;
        case LossFamily::WCE:
            require(k == WeightKind::none || k == WeightKind::wce_optimal ||
                        (k == WeightKind::custom && weights.beta.empty()),
                    "beta-free scheme required");
            break;
        case LossFamily::WCECL:
        case LossFamily::PBP:
            require(k == WeightKind::none || k == WeightKind::standard || k == WeightKind::ee ||
                        k == WeightKind::custom,
                    "alpha/beta vector scheme required");
            break;
        case LossFamily::CECLA:
        case LossFamily::PBPA:
            require(k == WeightKind::array, "array scheme required");
            break;
    }
}

int LossBatch::true_class(int i) const {
    for (int c = 0; c < n_classes; ++c)
        if (labels[static_cast<std::size_t>(i) * n_classes + c] == 1.0) return c;
    throw std::invalid_argument("LossBatch: row " + std::to_string(i) + " is not one-hot");
}

int LossBatch::argmax_class(int i) const {
    int best = 0;
    for (int c = 1; c < n_classes; ++c)
        if (probs[static_cast<std::size_t>(i) * n_classes + c] >
            probs[static_cast<std::size_t>(i) * n_classes + best])
            best = c;
    return best;
}

long LossBatch::n_unmasked() const {
    return std::count(mask.begin(), mask.end(), true);
}

const char* family_name(LossFamily f) {
    switch (f) {
        case LossFamily::CE: return "CE";
        case LossFamily::FCE: return "FCE";
        case LossFamily::WCE: return "WCE";
        case LossFamily::CECL: return "CECL";
        case LossFamily::WCECL: return "WCECL";
        case LossFamily::CECLA: return "CECLA";
        case LossFamily::PBP: return "PBP";
        case LossFamily::PBPA: return "PBPA";
    }
    return "?";
}

LossFamily family_from_name(const std::string& s) {
    for (LossFamily f : {LossFamily::CE, LossFamily::FCE, LossFamily::WCE, LossFamily::CECL,
                         LossFamily::WCECL, LossFamily::CECLA, LossFamily::PBP, LossFamily::PBPA})
        if (s == family_name(f)) return f;
    throw config_error("unknown loss family: " + s);
}

const char* weight_kind_name(WeightKind k) {
    switch (k) {
        case WeightKind::none: return "none";
        case WeightKind::wce_optimal: return "wce-optimal";
        case WeightKind::standard: return "standard";
        case WeightKind::ee: return "ee";
        case WeightKind::array: return "array";
        case WeightKind::custom: return "custom";
    }
    return "?";
}

WeightKind weight_kind_from_name(const std::string& s) {
    for (WeightKind k : {WeightKind::none, WeightKind::wce_optimal, WeightKind::standard,
                         WeightKind::ee, WeightKind::array, WeightKind::custom})
        if (s == weight_kind_name(k)) return k;
    throw config_error("unknown weight scheme: " + s);
}

namespace {

struct TokenTerms {
    int true_class;
    std::vector<int> neg_support;  // classes carrying a -log(1-p) term
};

TokenTerms token_terms(const LossSpec& spec, const LossBatch& batch, int i) {
    TokenTerms t;
    t.true_class = batch.true_class(i);
    if (neg_term_all_classes(spec.family)) {
        for (int j = 0; j < batch.n_classes; ++j)
            if (j != t.true_class) t.neg_support.push_back(j);
    } else if (neg_term_predicted_only(spec.family)) {
        const int yhat = batch.argmax_class(i);
        if (yhat != t.true_class) t.neg_support.push_back(yhat);
    }
    return t;
}

}  // namespace

double loss_value(const LossSpec& spec, const LossBatch& batch) {
    spec.validate();
    const long M = batch.n_unmasked();
    if (M == 0) return 0.0;
    const double g = spec.gamma;
    double total = 0.0;
    for (int i = 0; i < batch.n_tokens; ++i) {
        if (!batch.mask[static_cast<std::size_t>(i)]) continue;
        const TokenTerms tt = token_terms(spec, batch, i);
        const int c = tt.true_class;
        const double pc = std::clamp(batch.probs[static_cast<std::size_t>(i) * batch.n_classes + c],
                                     spec.clamp_eps, 1.0 - spec.clamp_eps);
        double tok = spec.lambda * spec.weights.pos_weight(c) *
                     (g == 0.0 ? 1.0 : std::pow(1.0 - pc, g)) * log_in_base(pc, spec.log_base);
        for (int j : tt.neg_support) {
            const double pj =
                std::clamp(batch.probs[static_cast<std::size_t>(i) * batch.n_classes + j],
                           spec.clamp_eps, 1.0 - spec.clamp_eps);
            tok += spec.weights.neg_weight(j, c) * (g == 0.0 ? 1.0 : std::pow(pj, g)) *
                   log_in_base(1.0 - pj, spec.log_base);
        }
        total -= tok;
    }
    return total / static_cast<double>(M);
}

std::vector<double> loss_grad_analytic(const LossSpec& spec, const LossBatch& batch) {
    spec.validate();
    std::vector<double> grad(static_cast<std::size_t>(batch.n_tokens) * batch.n_classes, 0.0);
    const long M = batch.n_unmasked();
    if (M == 0) return grad;
    const double g = spec.gamma;
    const double lnb = ln_of_base(spec.log_base);
    const double inv_m = 1.0 / static_cast<double>(M);
    for (int i = 0; i < batch.n_tokens; ++i) {
        if (!batch.mask[static_cast<std::size_t>(i)]) continue;
        const TokenTerms tt = token_terms(spec, batch, i);
        const int c = tt.true_class;
        const double pc_raw = batch.probs[static_cast<std::size_t>(i) * batch.n_classes + c];
        if (pc_raw > spec.clamp_eps && pc_raw < 1.0 - spec.clamp_eps) {
            // d/dp[-(1-p)^g log_b p] = g(1-p)^{g-1} log_b p - (1-p)^g / (p ln b)
            double d = -std::pow(1.0 - pc_raw, g) / (pc_raw * lnb);
            if (g != 0.0)
                d += g * std::pow(1.0 - pc_raw, g - 1.0) * log_in_base(pc_raw, spec.log_base);
            grad[static_cast<std::size_t>(i) * batch.n_classes + c] +=
                inv_m * spec.lambda * spec.weights.pos_weight(c) * d;
        }
        for (int j : tt.neg_support) {
            const double pj_raw = batch.probs[static_cast<std::size_t>(i) * batch.n_classes + j];
            if (pj_raw <= spec.clamp_eps || pj_raw >= 1.0 - spec.clamp_eps) continue;
            // d/dp[-p^g log_b(1-p)] = -g p^{g-1} log_b(1-p) + p^g / ((1-p) ln b)
            double d = std::pow(pj_raw, g) / ((1.0 - pj_raw) * lnb);
            if (g != 0.0)
                d -= g * std::pow(pj_raw, g - 1.0) * log_in_base(1.0 - pj_raw, spec.log_base);
            grad[static_cast<std::size_t>(i) * batch.n_classes + j] +=
                inv_m * spec.weights.neg_weight(j, c) * d;
        }
    }
    return grad;
}

double aggregated_gradient(const LossSpec& spec, const DatasetStats& stats, double p_plus,
                           double p_minus, int class_j) {
    if (p_plus <= 0.0 || p_plus >= 1.0 || p_minus <= 0.0 || p_minus >= 1.0)
        throw std::domain_error("aggregated_gradient: predictions must lie in (0,1)");
    const double g = spec.gamma;
    const double N = static_cast<double>(stats.total);
    const double Nj = static_cast<double>(stats.counts.at(static_cast<std::size_t>(class_j)));
    double s_pos, s_neg;
    switch (spec.weights.kind) {
        case WeightKind::array:
            // A_jj N_j / N = 1 and sum_{i != j} N_i A_ji / N = 1 by construction
            s_pos = 1.0;
            s_neg = 1.0;
            break;
        case WeightKind::none:
            s_pos = Nj / N;
            s_neg = (N - Nj) / N;
            break;
        default:
            s_pos = spec.weights.pos_weight(class_j) * Nj / N;
            s_neg = spec.weights.has_beta()
                        ? spec.weights.beta[static_cast<std::size_t>(class_j)] * (N - Nj) / N
                        : 0.0;
            break;
    }
    // Printed closed forms: log terms in the selected base, rational terms as-is.
    double pos = -std::pow(1.0 - p_plus, g) / p_plus;
    if (g != 0.0) pos += g * std::pow(1.0 - p_plus, g - 1.0) * log_in_base(p_plus, spec.log_base);
    double neg = std::pow(p_minus, g) / (1.0 - p_minus);
    if (g != 0.0) neg -= g * std::pow(p_minus, g - 1.0) * log_in_base(1.0 - p_minus, spec.log_base);
    return spec.lambda * s_pos * pos + s_neg * neg;
}

namespace {

// Euclidean projection onto the probability simplex (sort-based).
std::vector<double> project_simplex(std::vector<double> v) {
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<>());
    double css = 0.0, theta = 0.0;
    int rho = 0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        css += u[k];
        const double t = (css - 1.0) / static_cast<double>(k + 1);
        if (u[k] - t > 0.0) {
            rho = static_cast<int>(k + 1);
            theta = t;
        }
    }
    (void)rho;
    for (double& x : v) x = std::max(0.0, x - theta);
    return v;
}

}  // namespace

std::vector<double> wce_optimality_check(const DatasetStats& stats,
                                         const std::vector<double>& alpha) {
    const int C = stats.n_classes;
    std::vector<double> p(static_cast<std::size_t>(C), 1.0 / C);
    const double N = static_cast<double>(stats.total);
    const double floor_p = 1e-9;
    for (int iter = 0; iter < 200000; ++iter) {
        std::vector<double> grad(static_cast<std::size_t>(C));
        double gmax = 0.0;
        for (int i = 0; i < C; ++i) {
            const double pi = std::max(p[static_cast<std::size_t>(i)], floor_p);
            grad[static_cast<std::size_t>(i)] =
                -alpha[static_cast<std::size_t>(i)] *
                static_cast<double>(stats.counts[static_cast<std::size_t>(i)]) / (N * pi);
            gmax = std::max(gmax, std::abs(grad[static_cast<std::size_t>(i)]));
        }
        const double eta = 0.05 / (1.0 + gmax);
        std::vector<double> next(static_cast<std::size_t>(C));
        for (int i = 0; i < C; ++i)
            next[static_cast<std::size_t>(i)] =
                p[static_cast<std::size_t>(i)] - eta * grad[static_cast<std::size_t>(i)];
        next = project_simplex(std::move(next));
        double move = 0.0;
        for (int i = 0; i < C; ++i)
            move = std::max(move, std::abs(next[static_cast<std::size_t>(i)] -
                                           p[static_cast<std::size_t>(i)]));
        p = std::move(next);
        if (move < 1e-12 && iter > 1000) break;
    }
    return p;
}

TensorPtr classification_loss(Tape& tape, const LossSpec& spec, const TensorPtr& probs,
                              const std::vector<int>& labels, const std::vector<bool>& mask) {
    if (probs->ndim() != 2)
        throw std::invalid_argument("classification_loss: probs must be rank 2");
    const int n = probs->dim(0), C = probs->dim(1);
    if (static_cast<int>(labels.size()) != n || static_cast<int>(mask.size()) != n)
        throw std::invalid_argument("classification_loss: labels/mask length mismatch");
    LossBatch batch;
    batch.n_tokens = n;
    batch.n_classes = C;
    batch.labels.assign(static_cast<std::size_t>(n) * C, 0.0);
    for (int i = 0; i < n; ++i) {
        const int c = labels[static_cast<std::size_t>(i)];
        if (c < 0 || c >= C)
            throw std::out_of_range("classification_loss: label " + std::to_string(c));
        batch.labels[static_cast<std::size_t>(i) * C + c] = 1.0;
    }
    batch.probs = probs->data;
    batch.mask.assign(mask.begin(), mask.end());

    auto out = Tape::result({1}, Tape::flows(probs));
    out->data[0] = loss_value(spec, batch);
    tape.record(out, [spec, probs, batch, out] {
        if (!Tape::flows(probs)) return;
        probs->ensure_grad();
        const auto g = loss_grad_analytic(spec, batch);
        for (std::size_t i = 0; i < g.size(); ++i) probs->grad[i] += out->grad[0] * g[i];
    });
    return out;
}

}  // namespace bat
