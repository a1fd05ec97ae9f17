#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bat/objectives.hpp"
#include "bat/tensor.hpp"

namespace bat {

// Central finite differences of a scalar functional w.r.t. the entries of x.
std::vector<double> fd_grad(const std::function<double()>& f, Tensor& x, double h = 1e-5);

// Symmetric relative error |a-b| / (|a| + |b| + eps), maximized over entries.
double max_rel_err(const std::vector<double>& analytic, const std::vector<double>& numeric,
                   double eps = 1e-8);

struct GradCheckRow {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// The full finite-difference suite: tape primitives, a tiny whole model, and
// the closed-form-vs-numeric comparison over the loss grid
// (family x scheme x gamma x lambda).
std::vector<GradCheckRow> grad_check(unsigned long long seed = 42, int batches_per_combo = 100);

// Loss-grid slice only (used by the acceptance gradient criterion).
std::vector<GradCheckRow> grad_check_losses(unsigned long long seed = 42,
                                            int batches_per_combo = 100);

// Random loss batch with clamped-away probabilities and a stable argmax,
// shared by the grad-check suite and the objectives tests.
LossBatch random_loss_batch(std::mt19937_64& rng, int n_tokens, int n_classes,
                            bool with_mask = true);

}  // namespace bat
