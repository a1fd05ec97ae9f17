#include "bat/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace bat {

Adam::Adam(std::vector<TensorPtr> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(p->numel(), 0.0);
        v_.emplace_back(p->numel(), 0.0);
    }
}

void Adam::step(double lrate) {
    for (const auto& p : params_)
        if (p->grad.size() != p->numel())
            throw std::logic_error("adam_step: parameter has no populated grad");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor& p = *params_[k];
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double g = p.grad[i];
            m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g;
            v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g * g;
            const double mhat = m_[k][i] / bc1;
            const double vhat = v_[k][i] / bc2;
            p.data[i] -= lrate * mhat / (std::sqrt(vhat) + eps_);
        }
        p.zero_grad();
    }
}

void Adam::zero_grad() {
    for (const auto& p : params_) p->zero_grad();
}

}  // namespace bat
