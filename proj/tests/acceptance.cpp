// Acceptance gate: one printed pass/fail line per criterion, nonzero exit on
// any failure. Each criterion is self-contained and runs on one CPU core.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "bat/adam.hpp"
#include "bat/data.hpp"
#include "bat/gradcheck.hpp"
#include "bat/model.hpp"
#include "bat/objectives.hpp"
#include "bat/schedule.hpp"
#include "bat/trainer.hpp"

using namespace bat;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report_line(int idx, const std::string& what, bool pass, const std::string& detail = "") {
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << idx << ": " << what;
    if (!detail.empty()) std::cout << " [" << detail << "]";
    std::cout << std::endl;
    if (!pass) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- criterion 1
void criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto rows = grad_check_losses(42, 100);
    double worst = 0.0;
    std::string worst_name;
    bool pass = true;
    for (const auto& r : rows) {
        if (r.max_rel_err > worst) {
            worst = r.max_rel_err;
            worst_name = r.name;
        }
        pass = pass && r.pass;
    }
    const double secs = seconds_since(t0);
    pass = pass && secs < 60.0;
    std::ostringstream d;
    d << "worst " << worst_name << " rel_err=" << worst << ", " << secs << "s";
    report_line(1, "analytic loss gradients match finite differences (< 1e-6)", pass, d.str());
}

// ---------------------------------------------------------------- criterion 2
void criterion_closed_forms() {
    const auto stats = DatasetStats::from_counts({20, 2, 1});
    auto spec_for = [&](double gamma, double lambda) {
        LossSpec s;
        s.family = LossFamily::WCECL;
        s.gamma = gamma;
        s.lambda = lambda;
        s.weights = make_weights(WeightKind::ee, stats);
        s.log_base = LogBase::base10;
        return s;
    };
    auto grad = [&](const LossSpec& s, double p) {
        return aggregated_gradient(s, stats, p, p, 1);
    };
    bool pass = true;
    std::ostringstream d;

    // lambda=1, gamma=0: stationary at exactly 1/2
    pass = pass && std::abs(grad(spec_for(0, 1), 0.5)) < 1e-10;

    // gamma=0 sign boundaries at 0.9 (lambda=9) and 12/13 (lambda=12)
    for (auto [lambda, boundary] : {std::pair{9.0, 0.9}, std::pair{12.0, 12.0 / 13.0}}) {
        auto s = spec_for(0, lambda);
        pass = pass && grad(s, boundary - 1e-9) < 0 && grad(s, boundary + 1e-9) > 0 &&
               std::abs(grad(s, boundary)) < 1e-9;
    }

    // gamma=1, lambda=20: numeric root near 0.831 (bisection)
    auto s = spec_for(1, 20);
    double lo = 0.5, hi = 0.99;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (grad(s, mid) < 0 ? lo : hi) = mid;
    }
    const double root = 0.5 * (lo + hi);
    d << "gamma=1 lambda=20 root=" << root;
    pass = pass && std::abs(root - 0.831) <= 0.001;
    report_line(2, "aggregated-gradient stationary points and sign boundaries", pass, d.str());
}

// ---------------------------------------------------------------- criterion 3
void criterion_worked_examples() {
    bool pass = true;
    std::ostringstream d;
    auto near = [&](double got, double paper) {
        const bool ok = std::abs(got - paper) <= 0.01 * std::max(1.0, std::abs(paper));
        if (!ok) d << " mismatch got=" << got << " want=" << paper << ";";
        return ok;
    };
    auto one_token = [](std::vector<double> label, std::vector<double> probs) {
        LossBatch b;
        b.n_tokens = 1;
        b.n_classes = static_cast<int>(label.size());
        b.labels = std::move(label);
        b.probs = std::move(probs);
        b.mask = {true};
        return b;
    };
    auto base10 = [](LossFamily f, WeightScheme w = {}) {
        LossSpec s;
        s.family = f;
        s.weights = std::move(w);
        s.log_base = LogBase::base10;
        return s;
    };

    // CECL pair
    auto cecl = base10(LossFamily::CECL);
    pass = pass && near(loss_value(cecl, one_token({1, 0, 0}, {0.4, 0.3, 0.3})), 0.71);
    pass = pass && near(loss_value(cecl, one_token({1, 0, 0}, {0.4, 0.5, 0.1})), 0.74);

    // PBP pair (unweighted, gamma=0, lambda=1)
    auto pbp = base10(LossFamily::PBP);
    pass = pass && near(loss_value(pbp, one_token({1, 0, 0}, {0.4, 0.3, 0.3})), 0.40);
    pass = pass && near(loss_value(pbp, one_token({1, 0, 0}, {0.4, 0.5, 0.1})), 0.70);

    // WCE, counts 20:2:1
    const auto stats = DatasetStats::from_counts({20, 2, 1});
    auto wce = base10(LossFamily::WCE, make_weights(WeightKind::wce_optimal, stats));
    pass = pass && near(loss_value(wce, one_token({1, 0, 0}, {0.1, 0.5, 0.4})), 1.15);
    pass = pass && near(loss_value(wce, one_token({0, 1, 0}, {0.1, 0.5, 0.4})), 3.45);

    // CECLA appendix example, counts 7:2:1; the printed per-token value folds
    // the 1/N batch factor into the array weights (A/N), so scale A down by N.
    const auto stats2 = DatasetStats::from_counts({7, 2, 1});
    auto scaled = make_weights(WeightKind::array, stats2);
    for (auto& v : scaled.array) v /= static_cast<double>(stats2.total);
    auto cecla = base10(LossFamily::CECLA, std::move(scaled));
    const double expect =
        -(0.5 * std::log10(0.5) + 0.25 * std::log10(0.75) + 0.25 * std::log10(0.75));
    pass = pass && near(loss_value(cecla, one_token({0, 1, 0}, {0.25, 0.5, 0.25})), expect);

    // array matrix entrywise for counts 7:2:1
    const auto w = make_weights(WeightKind::array, stats2);
    const double expect_a[9] = {10.0 / 7, 10.0 / 4, 10.0 / 2, 10.0 / 14, 10.0 / 2,
                                10.0 / 2, 10.0 / 14, 10.0 / 4, 10.0};
    for (int i = 0; i < 9; ++i)
        pass = pass && std::abs(w.array[static_cast<std::size_t>(i)] - expect_a[i]) < 1e-12;

    report_line(3, "base-10 worked examples (CECL/PBP/WCE/CECLA/array)", pass, d.str());
}

// ---------------------------------------------------------------- criterion 4
void criterion_wce_optimality() {
    bool pass = true;
    std::ostringstream d;
    for (auto counts : {std::vector<long>{21, 2, 1}, std::vector<long>{20, 2, 1}}) {
        const auto stats = DatasetStats::from_counts(counts);
        const auto w = make_weights(WeightKind::wce_optimal, stats);
        const auto p = wce_optimality_check(stats, w.alpha);
        for (double v : p) pass = pass && std::abs(v - 1.0 / 3) < 1e-4;
        const auto plain = wce_optimality_check(stats, std::vector<double>(3, 1.0));
        for (int c = 0; c < 3; ++c) {
            const double want = static_cast<double>(stats.counts[static_cast<std::size_t>(c)]) /
                                static_cast<double>(stats.total);
            pass = pass && std::abs(plain[static_cast<std::size_t>(c)] - want) < 1e-4;
        }
    }
    report_line(4, "WCE simplex optimality (uniform vs N_i/N argmin)", pass, d.str());
}

// ---------------------------------------------------------------- criterion 5
void criterion_schedule() {
    bool pass = true;
    std::ostringstream d;
    pass = pass && solve_beta(Rational(6, 11)) == Rational(1, 22);
    pass = pass && solve_beta(Rational(7, 15)) == Rational(-1, 30);
    pass = pass && solve_beta(Rational(11, 20)) == Rational(1, 20);
    for (const char* name : {"v1", "v2", "v3", "v4", "v5"}) {
        const auto s = named_variant(name);
        const double S = static_cast<double>(s.warmup);
        const double warm = s.lambda / std::sqrt(static_cast<double>(s.d_model)) *
                            std::pow(S, -1.5) * S;
        const double decay = s.lambda / std::sqrt(static_cast<double>(s.d_model)) *
                             std::pow(S, s.beta) * std::pow(S, -s.alpha);
        pass = pass && std::abs(warm - decay) < 1e-12;
    }
    // v1 peaks at the warmup step
    const auto v1 = named_variant("v1");
    const double peak = adjusted_lrate(v1, 4000);
    pass = pass && adjusted_lrate(v1, 3999) < peak && adjusted_lrate(v1, 4001) < peak;
    // v3 discrepancy: the printed warmup exponent differs from the derived one
    pass = pass && std::abs(named_variant("v3").beta - (-1.0 / 26)) < 1e-15;
    pass = pass && std::abs(named_variant("v3-paper").beta - (-1.0 / 22)) < 1e-15;
    d << "v3 derived beta=-1/26, printed variant kept as v3-paper";
    report_line(5, "schedule exponents, continuity at warmup, v1 peak", pass, d.str());
}

// ---------------------------------------------------------------- criterion 6
void criterion_fscore() {
    bool pass = true;
    std::mt19937_64 rng(2024);
    double worst_id = 0.0, worst_slope = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const double p = uniform(rng, 1e-3, 1.0);
        const double r = uniform(rng, 1e-3, 1.0);
        const auto g = fscore_geometry(p, r, 1.0);
        const auto g2 = fscore_geometry(p, r, 2.0);
        const double identity = 3 * p * r * (p - r) / ((p + r) * (4 * p + r));
        worst_id = std::max(worst_id, std::abs((g.f_beta - g2.f_beta) - identity));
        worst_id = std::max(worst_id, std::abs(g.f1_minus_f2 - identity));

        // implicit level curve r(p) at constant F1: r = F1 p / (2p - F1).
        // Keep clear of the pole at 2p = F1, where the slope diverges.
        const double f1 = g.f_beta;
        if (2 * p - f1 > 0.1) {
            const double h = 1e-5;
            auto r_of = [&](double pp) { return f1 * pp / (2 * pp - f1); };
            const double slope_fd = (r_of(p + h) - r_of(p - h)) / (2 * h);
            worst_slope = std::max(worst_slope, std::abs(slope_fd - g.level_curve_slope) /
                                                    std::max(1.0, std::abs(g.level_curve_slope)));
        }
    }
    pass = worst_id < 1e-12 && worst_slope < 1e-5;
    std::ostringstream d;
    d << "identity err=" << worst_id << ", slope err=" << worst_slope;
    report_line(6, "F1-F2 identity and level-curve slope", pass, d.str());
}

// ---------------------------------------------------------------- criterion 7
void criterion_model_integrity() {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = true;
    std::ostringstream d;

    ModelConfig cfg;
    cfg.n_layers = 1;
    cfg.d_model = 8;
    cfg.d_ff = 16;
    cfg.heads = 2;
    cfg.d_k = 4;
    cfg.d_v = 4;
    cfg.vocab_size = 16;
    cfg.n_classes = 3;
    cfg.max_seq_len = 64;
    Model model(cfg, 21);

    // shape contracts
    for (int n : {1, 5, 50}) {
        std::vector<int> tokens(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) tokens[static_cast<std::size_t>(i)] = 1 + i % 15;
        Tape t;
        auto probs = model.forward(t, tokens);
        pass = pass && probs->shape == std::vector<int>{n, 3};
        auto x = make_tensor({n, cfg.d_model}, 0.1);
        pass = pass && model.ats_sublayer(t, x, 0)->shape == std::vector<int>{n, cfg.d_model};
        pass = pass && model.ffts_sublayer(t, x, 0)->shape == std::vector<int>{n, cfg.d_model};
    }

    // whole-model finite differences (the primitive+model suite)
    double worst = 0.0;
    for (const auto& row : grad_check(7, 2)) {
        if (row.name.rfind("model/", 0) == 0) worst = std::max(worst, row.max_rel_err);
        pass = pass && row.pass;
    }
    d << "model fd worst=" << worst;

    // single-batch overfit: CE mean loss < 0.01 within 500 Adam steps
    Model overfit_model(cfg, 33);
    const std::vector<int> tokens = {1, 4, 7, 9, 12, 3};
    const std::vector<int> labels = {0, 1, 2, 0, 1, 2};
    const std::vector<bool> mask(6, true);
    LossSpec spec;  // CE, natural logs
    Adam adam(overfit_model.parameters());
    double final_loss = 1e9;
    int steps = 0;
    for (; steps < 500; ++steps) {
        Tape tape;
        auto loss = classification_loss(tape, spec, overfit_model.forward(tape, tokens), labels,
                                        mask);
        final_loss = loss->data[0];
        if (final_loss < 0.01) break;
        tape.backward(loss);
        adam.step(0.01);
    }
    d << ", overfit loss=" << final_loss << " after " << steps << " steps";
    pass = pass && final_loss < 0.01;

    const double secs = seconds_since(t0);
    d << ", " << secs << "s";
    pass = pass && secs < 300.0;
    report_line(7, "shape contracts, whole-model gradients, single-batch overfit", pass, d.str());
}

// ---------------------------------------------------------------- criterion 8
void criterion_trend() {
    const auto t0 = std::chrono::steady_clock::now();

    ExperimentConfig base;
    base.model.n_layers = 1;
    base.model.d_model = 8;
    base.model.d_ff = 16;
    base.model.heads = 2;
    base.model.d_k = 4;
    base.model.d_v = 4;
    base.model.vocab_size = 48;
    base.model.n_classes = 3;
    base.model.max_seq_len = 24;
    base.data.ratio = {21.2, 1.9, 1.0};
    base.data.vocab_size = 48;
    base.data.n_sequences = 60;
    base.data.mean_len = 8;
    base.data.max_len = 16;
    base.data.overlap = 0.0;
    base.data.noise = 0.05;
    base.schedule.warmup = 200;
    base.schedule.lambda = 4.0;
    base.batch_size = 8;
    base.epochs = 50;
    base.eval_split = 0.2;

    struct Contender {
        const char* name;
        LossFamily family;
        double gamma, lambda;
        WeightKind scheme;
    };
    const Contender contenders[] = {
        {"WCE", LossFamily::WCE, 0, 1, WeightKind::wce_optimal},
        {"CECLA", LossFamily::CECLA, 1, 20, WeightKind::array},
        {"PBP", LossFamily::PBP, 0, 8, WeightKind::ee},
    };

    auto minority_f2 = [&](const ExperimentConfig& c) {
        const auto record = train(c);
        return record.epochs.back().eval.f2.back();  // class index C-1 = rarest
    };

    const std::string outroot = fs::temp_directory_path() / "bat_trend";
    fs::remove_all(outroot);
    bool pass = true;
    std::ostringstream d;
    for (const auto& k : contenders) {
        int wins = 0;
        for (unsigned long long seed = 1; seed <= 5; ++seed) {
            auto ce = base;
            ce.seed = seed;
            ce.data.seed = seed;
            ce.outdir = outroot + "/ce_" + std::to_string(seed);
            auto alt = ce;
            alt.loss_family = k.family;
            alt.loss_gamma = k.gamma;
            alt.loss_lambda = k.lambda;
            alt.weight_scheme = k.scheme;
            alt.outdir = outroot + "/" + k.name + "_" + std::to_string(seed);
            if (minority_f2(alt) >= minority_f2(ce)) ++wins;
        }
        d << k.name << "=" << wins << "/5 ";
        pass = pass && wins >= 4;
    }
    fs::remove_all(outroot);
    const double secs = seconds_since(t0);
    d << secs << "s";
    pass = pass && secs < 900.0;
    report_line(8, "imbalance-aware losses beat CE on minority-class F2 (4/5 seeds)", pass,
                d.str());
}

// ---------------------------------------------------------------- criterion 9
void criterion_determinism() {
    ExperimentConfig c;
    c.model.n_layers = 1;
    c.model.d_model = 8;
    c.model.d_ff = 16;
    c.model.heads = 2;
    c.model.d_k = 4;
    c.model.d_v = 4;
    c.model.vocab_size = 32;
    c.model.n_classes = 3;
    c.model.max_seq_len = 24;
    c.data.ratio = {8, 2, 1};
    c.data.vocab_size = 32;
    c.data.n_sequences = 30;
    c.data.mean_len = 8;
    c.data.max_len = 16;
    c.schedule.warmup = 50;
    c.batch_size = 6;
    c.epochs = 3;
    c.seed = 17;
    const std::string o1 = fs::temp_directory_path() / "bat_det_a";
    const std::string o2 = fs::temp_directory_path() / "bat_det_b";
    fs::remove_all(o1);
    fs::remove_all(o2);
    c.outdir = o1;
    train(c);
    c.outdir = o2;
    train(c);
    auto slurp = [](const std::string& p) {
        std::ifstream is(p, std::ios::binary);
        std::stringstream ss;
        ss << is.rdbuf();
        return ss.str();
    };
    const std::string a = slurp(o1 + "/metrics.csv");
    const std::string b = slurp(o2 + "/metrics.csv");
    const bool pass = !a.empty() && a == b;
    fs::remove_all(o1);
    fs::remove_all(o2);
    report_line(9, "identical config+seed reproduce metrics.csv byte-for-byte", pass);
}

}  // namespace

int main() {
    criterion_gradients();
    criterion_closed_forms();
    criterion_worked_examples();
    criterion_wce_optimality();
    criterion_schedule();
    criterion_fscore();
    criterion_model_integrity();
    criterion_trend();
    criterion_determinism();
    if (g_failures == 0) {
        std::cout << "all 9 criteria passed" << std::endl;
        return 0;
    }
    std::cout << g_failures << " criterion(s) failed" << std::endl;
    return 1;
}
