#pragma once

#include <vector>

#include "bat/tensor.hpp"

namespace bat {

// Adam with bias correction; defaults follow the training setup
// (beta1=0.9, beta2=0.98, eps=1e-9).
class Adam {
  public:
    explicit Adam(std::vector<TensorPtr> params, double beta1 = 0.9, double beta2 = 0.98,
                  double eps = 1e-9);

    // Applies one update using each parameter's populated grad, then zeroes grads.
    void step(double lrate);
    void zero_grad();

    long step_count() const { return t_; }

  private:
    std::vector<TensorPtr> params_;
    std::vector<std::vector<double>> m_, v_;
    double beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace bat
