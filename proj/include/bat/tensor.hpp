#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace bat {

// Dense row-major 64-bit tensor with an optional gradient slot. The sole
// numeric currency of the library; ops live on the Tape.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // empty until first accumulation

    Tensor() = default;
    Tensor(std::vector<int> s, double fill = 0.0);

    std::size_t numel() const { return data.size(); }
    int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
    int ndim() const { return static_cast<int>(shape.size()); }
    bool is_scalar() const { return numel() == 1; }

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * dim(1) + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * dim(1) + c]; }

    void ensure_grad();
    void zero_grad();
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<int> shape, double fill = 0.0, bool requires_grad = false);
TensorPtr make_tensor(std::vector<int> shape, std::vector<double> values, bool requires_grad = false);
TensorPtr make_scalar(double v, bool requires_grad = false);

std::string shape_str(const std::vector<int>& s);
std::size_t shape_numel(const std::vector<int>& s);

// Deterministic uniform double in [lo, hi) built from the raw 64-bit stream,
// so results do not depend on libstdc++ distribution internals.
double uniform(std::mt19937_64& rng, double lo, double hi);

void fill_uniform(Tensor& t, std::mt19937_64& rng, double lo, double hi);

bool all_finite(const Tensor& t);

}  // namespace bat
