#pragma once

#include <functional>
#include <vector>

#include "bat/tensor.hpp"

namespace bat {

// Dynamic tape: every op records its output together with a backward closure.
// backward(loss) seeds the scalar loss, replays the closures in reverse and
// accumulates into each reachable tensor's grad, then clears the tape.
class Tape {
  public:
    TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
    // a [m x k] times b [n x k] transposed -> [m x n]
    TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b);
    TensorPtr add(const TensorPtr& a, const TensorPtr& b);
    // [n x d] + [d], broadcast over rows
    TensorPtr add_rowvec(const TensorPtr& a, const TensorPtr& v);
    TensorPtr scale(const TensorPtr& a, double c);
    // a * s with s a learnable 1-element tensor (FFTS residual weight)
    TensorPtr scale_by(const TensorPtr& a, const TensorPtr& s);
    TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
    TensorPtr relu(const TensorPtr& a);
    TensorPtr softmax_rows(const TensorPtr& a);
    TensorPtr layer_norm(const TensorPtr& a, const TensorPtr& gain, const TensorPtr& bias);
    // x [n x d_in], kernel [w x d_in x d_out]; width 1 or 3, symmetric zero padding
    TensorPtr conv1d(const TensorPtr& x, const TensorPtr& kernel, int width);
    TensorPtr concat_last_dim(const std::vector<TensorPtr>& parts);
    TensorPtr embedding_lookup(const TensorPtr& table, const std::vector<int>& ids);
    TensorPtr sum(const TensorPtr& a);

    // Hook for ops defined outside the core (the loss node lives in objectives).
    void record(TensorPtr out, std::function<void()> backward_fn);
    static bool flows(const TensorPtr& t) { return t->requires_grad; }
    static TensorPtr result(std::vector<int> shape, bool requires_grad);

    void backward(const TensorPtr& loss);
    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

  private:
    struct Node {
        TensorPtr out;
        std::function<void()> backward_fn;
    };
    std::vector<Node> nodes_;
};

constexpr double kLayerNormEps = 1e-5;

}  // namespace bat
