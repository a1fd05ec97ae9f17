#include "bat/tensor.hpp"

#include <cmath>
#include <sstream>

namespace bat {

Tensor::Tensor(std::vector<int> s, double fill)
    : shape(std::move(s)), data(shape_numel(shape), fill) {}

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() { grad.clear(); }

TensorPtr make_tensor(std::vector<int> shape, double fill, bool requires_grad) {
    auto t = std::make_shared<Tensor>(std::move(shape), fill);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr make_tensor(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size())
        throw std::invalid_argument("make_tensor: " + shape_str(shape) + " needs " +
                                    std::to_string(shape_numel(shape)) + " values, got " +
                                    std::to_string(values.size()));
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->data = std::move(values);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr make_scalar(double v, bool requires_grad) {
    return make_tensor({1}, {v}, requires_grad);
}

std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
        if (d < 0) throw std::invalid_argument("negative dimension in " + shape_str(s));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
}

void fill_uniform(Tensor& t, std::mt19937_64& rng, double lo, double hi) {
    for (double& v : t.data) v = uniform(rng, lo, hi);
}

bool all_finite(const Tensor& t) {
    for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace bat
