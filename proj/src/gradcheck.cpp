#include "bat/gradcheck.hpp"

#include <cmath>

#include "bat/model.hpp"
#include "bat/tape.hpp"

namespace bat {

std::vector<double> fd_grad(const std::function<double()>& f, Tensor& x, double h) {
    std::vector<double> g(x.numel());
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double saved = x.data[i];
        x.data[i] = saved + h;
        const double fp = f();
        x.data[i] = saved - h;
        const double fm = f();
        x.data[i] = saved;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

double max_rel_err(const std::vector<double>& analytic, const std::vector<double>& numeric,
                   double eps) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic[i], b = numeric[i];
        worst = std::max(worst, std::abs(a - b) / (std::abs(a) + std::abs(b) + eps));
    }
    return worst;
}

LossBatch random_loss_batch(std::mt19937_64& rng, int n_tokens, int n_classes, bool with_mask) {
    LossBatch b;
    b.n_tokens = n_tokens;
    b.n_classes = n_classes;
    b.labels.assign(static_cast<std::size_t>(n_tokens) * n_classes, 0.0);
    b.probs.resize(static_cast<std::size_t>(n_tokens) * n_classes);
    b.mask.assign(static_cast<std::size_t>(n_tokens), true);
    for (int i = 0; i < n_tokens; ++i) {
        const int c = static_cast<int>(rng() % static_cast<unsigned long long>(n_classes));
        b.labels[static_cast<std::size_t>(i) * n_classes + c] = 1.0;
        // keep a clear argmax so the PBP support set is stable under FD steps
        for (;;) {
            for (int j = 0; j < n_classes; ++j)
                b.probs[static_cast<std::size_t>(i) * n_classes + j] = uniform(rng, 0.05, 0.95);
            double best = -1.0, second = -1.0;
            for (int j = 0; j < n_classes; ++j) {
                const double p = b.probs[static_cast<std::size_t>(i) * n_classes + j];
                if (p > best) {
                    second = best;
                    best = p;
                } else if (p > second) {
                    second = p;
                }
            }
            if (best - second > 1e-3) break;
        }
        if (with_mask && n_tokens > 2 && rng() % 8 == 0) b.mask[static_cast<std::size_t>(i)] = false;
    }
    if (b.n_unmasked() == 0) b.mask[0] = true;
    return b;
}

namespace {

GradCheckRow check_tensor(const std::string& name, const std::function<double()>& forward,
                          Tensor& x, const std::vector<double>& analytic, double tol) {
    GradCheckRow row;
    row.name = name;
    row.tolerance = tol;
    row.max_rel_err = max_rel_err(analytic, fd_grad(forward, x), 1e-8);
    row.pass = row.max_rel_err < tol;
    return row;
}

std::vector<std::pair<LossFamily, WeightKind>> loss_grid() {
    return {
        {LossFamily::CE, WeightKind::none},        {LossFamily::FCE, WeightKind::none},
        {LossFamily::WCE, WeightKind::none},       {LossFamily::WCE, WeightKind::wce_optimal},
        {LossFamily::CECL, WeightKind::none},      {LossFamily::WCECL, WeightKind::standard},
        {LossFamily::WCECL, WeightKind::ee},       {LossFamily::CECLA, WeightKind::array},
        {LossFamily::PBP, WeightKind::none},       {LossFamily::PBP, WeightKind::standard},
        {LossFamily::PBP, WeightKind::ee},         {LossFamily::PBPA, WeightKind::array},
    };
}

}  // namespace

std::vector<GradCheckRow> grad_check_losses(unsigned long long seed, int batches_per_combo) {
    std::vector<GradCheckRow> rows;
    std::mt19937_64 rng(seed);
    const int class_counts[] = {2, 3, 5};
    for (const auto& [family, scheme] : loss_grid()) {
        for (double gamma : {0.0, 1.0}) {
            for (double lambda : {1.0, 8.0, 9.0, 12.0, 20.0}) {
                GradCheckRow row;
                row.name = std::string(family_name(family)) + "/" + weight_kind_name(scheme) +
                           "/g" + std::to_string(static_cast<int>(gamma)) + "/l" +
                           std::to_string(static_cast<int>(lambda));
                row.tolerance = 1e-6;
                double worst = 0.0;
                for (int trial = 0; trial < batches_per_combo; ++trial) {
                    const int C = class_counts[trial % 3];
                    std::vector<long> counts;
                    for (int c = 0; c < C; ++c)
                        counts.push_back(1 + static_cast<long>(rng() % 40));
                    const auto stats = DatasetStats::from_counts(counts);
                    LossSpec spec;
                    spec.family = family;
                    spec.gamma = gamma;
                    spec.lambda = lambda;
                    spec.log_base = trial % 2 == 0 ? LogBase::natural : LogBase::base10;
                    spec.weights = make_weights(scheme, stats);
                    LossBatch batch = random_loss_batch(rng, 6, C);
                    const auto analytic = loss_grad_analytic(spec, batch);
                    Tensor probs;
                    probs.shape = {batch.n_tokens, C};
                    probs.data = batch.probs;
                    auto f = [&] {
                        batch.probs = probs.data;
                        return loss_value(spec, batch);
                    };
                    worst = std::max(worst, max_rel_err(analytic, fd_grad(f, probs)));
                    batch.probs = probs.data;
                }
                row.max_rel_err = worst;
                row.pass = worst < row.tolerance;
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

std::vector<GradCheckRow> grad_check(unsigned long long seed, int batches_per_combo) {
    std::vector<GradCheckRow> rows;
    std::mt19937_64 rng(seed);

    // --- tape primitives ---
    {
        auto a = make_tensor({3, 4}, 0.0, true);
        auto b = make_tensor({4, 2}, 0.0, true);
        fill_uniform(*a, rng, -2.0, 2.0);
        fill_uniform(*b, rng, -2.0, 2.0);
        auto run = [&] {
            Tape t;
            auto loss = t.sum(t.matmul(a, b));
            const double v = loss->data[0];
            return std::pair{v, loss};
        };
        for (auto* target : {a.get(), b.get()}) {
            a->zero_grad();
            b->zero_grad();
            Tape t;
            auto loss = t.sum(t.matmul(a, b));
            t.backward(loss);
            auto fwd = [&] { return run().first; };
            rows.push_back(check_tensor(target == a.get() ? "matmul/a" : "matmul/b", fwd, *target,
                                        target->grad, 1e-6));
        }
    }
    auto simple_check = [&](const std::string& name, const std::function<TensorPtr(Tape&, TensorPtr)>& op,
                            std::vector<int> shape) {
        auto x = make_tensor(std::move(shape), 0.0, true);
        fill_uniform(*x, rng, -2.0, 2.0);
        // keep relu kinks away from the FD step
        for (double& v : x->data)
            if (std::abs(v) < 1e-3) v = 0.5;
        x->zero_grad();
        Tape t;
        auto loss = t.sum(op(t, x));
        t.backward(loss);
        auto fwd = [&] {
            Tape t2;
            return t2.sum(op(t2, x))->data[0];
        };
        rows.push_back(check_tensor(name, fwd, *x, x->grad, 1e-6));
    };
    simple_check("relu", [](Tape& t, TensorPtr x) { return t.relu(x); }, {4, 5});
    simple_check("scale", [](Tape& t, TensorPtr x) { return t.scale(x, -1.7); }, {4, 5});
    {
        // softmax needs a non-uniform downstream weighting to exercise the Jacobian
        auto w = make_tensor({4, 5});
        fill_uniform(*w, rng, -2.0, 2.0);
        auto wp = w;
        simple_check("softmax_rows", [wp](Tape& t, TensorPtr x) { return t.mul(t.softmax_rows(x), wp); },
                     {4, 5});
    }
    {
        auto gain = make_tensor({6}, 0.0, true);
        auto bias = make_tensor({6}, 0.0, true);
        fill_uniform(*gain, rng, 0.5, 1.5);
        fill_uniform(*bias, rng, -0.5, 0.5);
        auto w = make_tensor({4, 6});
        fill_uniform(*w, rng, -2.0, 2.0);
        auto x = make_tensor({4, 6}, 0.0, true);
        fill_uniform(*x, rng, -2.0, 2.0);
        auto fwd_loss = [&](Tape& t) { return t.sum(t.mul(t.layer_norm(x, gain, bias), w)); };
        for (auto& [nm, target] : std::vector<std::pair<std::string, TensorPtr>>{
                 {"layer_norm/x", x}, {"layer_norm/gain", gain}, {"layer_norm/bias", bias}}) {
            x->zero_grad();
            gain->zero_grad();
            bias->zero_grad();
            Tape t;
            auto loss = fwd_loss(t);
            t.backward(loss);
            auto fwd = [&] {
                Tape t2;
                return fwd_loss(t2)->data[0];
            };
            rows.push_back(check_tensor(nm, fwd, *target, target->grad, 1e-6));
        }
    }
    for (int width : {1, 3}) {
        auto x = make_tensor({5, 3}, 0.0, true);
        auto k = make_tensor({width, 3, 2}, 0.0, true);
        fill_uniform(*x, rng, -2.0, 2.0);
        fill_uniform(*k, rng, -2.0, 2.0);
        auto w = make_tensor({5, 2});
        fill_uniform(*w, rng, -2.0, 2.0);
        auto fwd_loss = [&](Tape& t) { return t.sum(t.mul(t.conv1d(x, k, width), w)); };
        for (auto& [nm, target] : std::vector<std::pair<std::string, TensorPtr>>{
                 {"conv1d_w" + std::to_string(width) + "/x", x},
                 {"conv1d_w" + std::to_string(width) + "/kernel", k}}) {
            x->zero_grad();
            k->zero_grad();
            Tape t;
            auto loss = fwd_loss(t);
            t.backward(loss);
            auto fwd = [&] {
                Tape t2;
                return fwd_loss(t2)->data[0];
            };
            rows.push_back(check_tensor(nm, fwd, *target, target->grad, 1e-6));
        }
    }

    // --- tiny whole model ---
    {
        ModelConfig cfg;
        cfg.n_layers = 1;
        cfg.d_model = 8;
        cfg.d_ff = 16;
        cfg.heads = 2;
        cfg.d_k = 4;
        cfg.d_v = 4;
        cfg.vocab_size = 12;
        cfg.n_classes = 3;
        cfg.max_seq_len = 8;
        Model model(cfg, 7);
        const std::vector<int> tokens = {1, 5, 9};
        const std::vector<int> labels = {0, 2, 1};
        const std::vector<bool> mask = {true, true, true};
        LossSpec spec;  // CE
        auto forward_loss = [&](Tape& t) {
            auto probs = model.forward(t, tokens);
            return classification_loss(t, spec, probs, labels, mask);
        };
        for (auto& [name, param] : model.named_parameters()) {
            for (auto& p : model.parameters()) p->zero_grad();
            Tape t;
            auto loss = forward_loss(t);
            t.backward(loss);
            auto fwd = [&] {
                Tape t2;
                return forward_loss(t2)->data[0];
            };
            rows.push_back(check_tensor("model/" + name, fwd, *param, param->grad, 1e-4));
        }
    }

    auto loss_rows = grad_check_losses(seed + 1, batches_per_combo);
    rows.insert(rows.end(), loss_rows.begin(), loss_rows.end());
    return rows;
}

}  // namespace bat
