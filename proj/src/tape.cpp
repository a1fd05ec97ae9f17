#include "bat/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bat {

TensorPtr Tape::result(std::vector<int> shape, bool requires_grad) {
    auto t = make_tensor(std::move(shape));
    t->requires_grad = requires_grad;
    return t;
}

void Tape::record(TensorPtr out, std::function<void()> backward_fn) {
    nodes_.push_back({std::move(out), std::move(backward_fn)});
}

TensorPtr Tape::matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->ndim() != 2 || b->ndim() != 2 || a->dim(1) != b->dim(0))
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a->shape) +
                                    " and " + shape_str(b->shape));
    const int m = a->dim(0), k = a->dim(1), n = b->dim(1);
    auto out = result({m, n}, flows(a) || flows(b));
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            const double av = a->at(i, p);
            if (av == 0.0) continue;
            for (int j = 0; j < n; ++j) out->at(i, j) += av * b->at(p, j);
        }
    record(out, [a, b, out, m, k, n] {
        if (flows(a)) {
            a->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (int j = 0; j < n; ++j) s += out->grad[static_cast<std::size_t>(i) * n + j] * b->at(p, j);
                    a->grad[static_cast<std::size_t>(i) * k + p] += s;
                }
        }
        if (flows(b)) {
            b->ensure_grad();
            for (int p = 0; p < k; ++p)
                for (int j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (int i = 0; i < m; ++i) s += a->at(i, p) * out->grad[static_cast<std::size_t>(i) * n + j];
                    b->grad[static_cast<std::size_t>(p) * n + j] += s;
                }
        }
    });
    return out;
}

TensorPtr Tape::matmul_nt(const TensorPtr& a, const TensorPtr& b) {
    if (a->ndim() != 2 || b->ndim() != 2 || a->dim(1) != b->dim(1))
        throw std::invalid_argument("matmul_nt: incompatible shapes " + shape_str(a->shape) +
                                    " and " + shape_str(b->shape));
    const int m = a->dim(0), k = a->dim(1), n = b->dim(0);
    auto out = result({m, n}, flows(a) || flows(b));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += a->at(i, p) * b->at(j, p);
            out->at(i, j) = s;
        }
    record(out, [a, b, out, m, k, n] {
        if (flows(a)) {
            a->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (int j = 0; j < n; ++j) s += out->grad[static_cast<std::size_t>(i) * n + j] * b->at(j, p);
                    a->grad[static_cast<std::size_t>(i) * k + p] += s;
                }
        }
        if (flows(b)) {
            b->ensure_grad();
            for (int j = 0; j < n; ++j)
                for (int p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (int i = 0; i < m; ++i) s += out->grad[static_cast<std::size_t>(i) * n + j] * a->at(i, p);
                    b->grad[static_cast<std::size_t>(j) * k + p] += s;
                }
        }
    });
    return out;
}

TensorPtr Tape::add(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape)
        throw std::invalid_argument("add: shape mismatch " + shape_str(a->shape) + " vs " +
                                    shape_str(b->shape));
    auto out = result(a->shape, flows(a) || flows(b));
    for (std::size_t i = 0; i < out->numel(); ++i) out->data[i] = a->data[i] + b->data[i];
    record(out, [a, b, out] {
        for (const TensorPtr& t : {a, b}) {
            if (!flows(t)) continue;
            t->ensure_grad();
            for (std::size_t i = 0; i < out->numel(); ++i) t->grad[i] += out->grad[i];
        }
    });
    return out;
}

TensorPtr Tape::add_rowvec(const TensorPtr& a, const TensorPtr& v) {
    if (a->ndim() != 2 || v->numel() != static_cast<std::size_t>(a->dim(1)))
        throw std::invalid_argument("add_rowvec: " + shape_str(a->shape) + " vs " +
                                    shape_str(v->shape));
    const int n = a->dim(0), d = a->dim(1);
    auto out = result(a->shape, flows(a) || flows(v));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out->at(i, j) = a->at(i, j) + v->data[static_cast<std::size_t>(j)];
    record(out, [a, v, out, n, d] {
        if (flows(a)) {
            a->ensure_grad();
            for (std::size_t i = 0; i < out->numel(); ++i) a->grad[i] += out->grad[i];
        }
        if (flows(v)) {
            v->ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < d; ++j) v->grad[static_cast<std::size_t>(j)] += out->grad[static_cast<std::size_t>(i) * d + j];
        }
    });
    return out;
}

TensorPtr Tape::scale(const TensorPtr& a, double c) {
    auto out = result(a->shape, flows(a));
    for (std::size_t i = 0; i < out->numel(); ++i) out->data[i] = c * a->data[i];
    record(out, [a, out, c] {
        if (!flows(a)) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < out->numel(); ++i) a->grad[i] += c * out->grad[i];
    });
    return out;
}

TensorPtr Tape::scale_by(const TensorPtr& a, const TensorPtr& s) {
    if (!s->is_scalar()) throw std::invalid_argument("scale_by: weight must be a scalar tensor");
    const double c = s->data[0];
    auto out = result(a->shape, flows(a) || flows(s));
    for (std::size_t i = 0; i < out->numel(); ++i) out->data[i] = c * a->data[i];
    record(out, [a, s, out, c] {
        if (flows(a)) {
            a->ensure_grad();
            for (std::size_t i = 0; i < out->numel(); ++i) a->grad[i] += c * out->grad[i];
        }
        if (flows(s)) {
            s->ensure_grad();
            double g = 0.0;
            for (std::size_t i = 0; i < out->numel(); ++i) g += a->data[i] * out->grad[i];
            s->grad[0] += g;
        }
    });
    return out;
}

TensorPtr Tape::mul(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape)
        throw std::invalid_argument("mul: shape mismatch " + shape_str(a->shape) + " vs " +
                                    shape_str(b->shape));
    auto out = result(a->shape, flows(a) || flows(b));
    for (std::size_t i = 0; i < out->numel(); ++i) out->data[i] = a->data[i] * b->data[i];
    record(out, [a, b, out] {
        if (flows(a)) {
            a->ensure_grad();
            for (std::size_t i = 0; i < out->numel(); ++i) a->grad[i] += b->data[i] * out->grad[i];
        }
        if (flows(b)) {
            b->ensure_grad();
            for (std::size_t i = 0; i < out->numel(); ++i) b->grad[i] += a->data[i] * out->grad[i];
        }
    });
    return out;
}

TensorPtr Tape::relu(const TensorPtr& a) {
    auto out = result(a->shape, flows(a));
    for (std::size_t i = 0; i < out->numel(); ++i) out->data[i] = a->data[i] > 0.0 ? a->data[i] : 0.0;
    record(out, [a, out] {
        if (!flows(a)) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < out->numel(); ++i)
            if (a->data[i] > 0.0) a->grad[i] += out->grad[i];
    });
    return out;
}

TensorPtr Tape::softmax_rows(const TensorPtr& a) {
    if (a->ndim() != 2) throw std::invalid_argument("softmax_rows: rank-2 input required");
    const int n = a->dim(0), d = a->dim(1);
    auto out = result(a->shape, flows(a));
    for (int i = 0; i < n; ++i) {
        double mx = a->at(i, 0);
        for (int j = 1; j < d; ++j) mx = std::max(mx, a->at(i, j));
        double z = 0.0;
        for (int j = 0; j < d; ++j) {
            const double e = std::exp(a->at(i, j) - mx);
            out->at(i, j) = e;
            z += e;
        }
        for (int j = 0; j < d; ++j) out->at(i, j) /= z;
    }
    record(out, [a, out, n, d] {
        if (!flows(a)) return;
        a->ensure_grad();
        for (int i = 0; i < n; ++i) {
            double dot = 0.0;
            for (int j = 0; j < d; ++j) dot += out->grad[static_cast<std::size_t>(i) * d + j] * out->at(i, j);
            for (int j = 0; j < d; ++j)
                a->grad[static_cast<std::size_t>(i) * d + j] +=
                    out->at(i, j) * (out->grad[static_cast<std::size_t>(i) * d + j] - dot);
        }
    });
    return out;
}

TensorPtr Tape::layer_norm(const TensorPtr& a, const TensorPtr& gain, const TensorPtr& bias) {
    if (a->ndim() != 2) throw std::invalid_argument("layer_norm: rank-2 input required");
    const int n = a->dim(0), d = a->dim(1);
    if (gain->numel() != static_cast<std::size_t>(d) || bias->numel() != static_cast<std::size_t>(d))
        throw std::invalid_argument("layer_norm: gain/bias must have length " + std::to_string(d));
    auto out = result(a->shape, flows(a) || flows(gain) || flows(bias));
    auto xhat = std::make_shared<Tensor>(a->shape);   // saved for backward
    std::vector<double> inv_std(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += a->at(i, j);
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = a->at(i, j) - mu;
            var += c * c;
        }
        var /= d;
        const double is = 1.0 / std::sqrt(var + kLayerNormEps);
        inv_std[static_cast<std::size_t>(i)] = is;
        for (int j = 0; j < d; ++j) {
            const double xh = (a->at(i, j) - mu) * is;
            xhat->at(i, j) = xh;
            out->at(i, j) = gain->data[static_cast<std::size_t>(j)] * xh + bias->data[static_cast<std::size_t>(j)];
        }
    }
    record(out, [a, gain, bias, out, xhat, inv_std = std::move(inv_std), n, d] {
        for (int i = 0; i < n; ++i) {
            const double* go = &out->grad[static_cast<std::size_t>(i) * d];
            if (flows(gain)) {
                gain->ensure_grad();
                for (int j = 0; j < d; ++j) gain->grad[static_cast<std::size_t>(j)] += go[j] * xhat->at(i, j);
            }
            if (flows(bias)) {
                bias->ensure_grad();
                for (int j = 0; j < d; ++j) bias->grad[static_cast<std::size_t>(j)] += go[j];
            }
            if (flows(a)) {
                a->ensure_grad();
                double mean_dy = 0.0, mean_dyx = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double dy = go[j] * gain->data[static_cast<std::size_t>(j)];
                    mean_dy += dy;
                    mean_dyx += dy * xhat->at(i, j);
                }
                mean_dy /= d;
                mean_dyx /= d;
                const double is = inv_std[static_cast<std::size_t>(i)];
                for (int j = 0; j < d; ++j) {
                    const double dy = go[j] * gain->data[static_cast<std::size_t>(j)];
                    a->grad[static_cast<std::size_t>(i) * d + j] +=
                        is * (dy - mean_dy - xhat->at(i, j) * mean_dyx);
                }
            }
        }
    });
    return out;
}

TensorPtr Tape::conv1d(const TensorPtr& x, const TensorPtr& kernel, int width) {
    if (width != 1 && width != 3)
        throw std::invalid_argument("conv1d: unsupported width " + std::to_string(width));
    if (x->ndim() != 2 || kernel->ndim() != 3 || kernel->dim(0) != width || kernel->dim(1) != x->dim(1))
        throw std::invalid_argument("conv1d: incompatible shapes " + shape_str(x->shape) + " and " +
                                    shape_str(kernel->shape));
    const int n = x->dim(0), din = x->dim(1), dout = kernel->dim(2);
    const int half = width / 2;
    auto out = result({n, dout}, flows(x) || flows(kernel));
    auto kat = [&](int w, int i, int o) -> double {
        return kernel->data[(static_cast<std::size_t>(w) * din + i) * dout + o];
    };
    for (int t = 0; t < n; ++t)
        for (int w = 0; w < width; ++w) {
            const int s = t + w - half;
            if (s < 0 || s >= n) continue;  // zero padding
            for (int i = 0; i < din; ++i) {
                const double xv = x->at(s, i);
                if (xv == 0.0) continue;
                for (int o = 0; o < dout; ++o) out->at(t, o) += xv * kat(w, i, o);
            }
        }
    record(out, [x, kernel, out, n, din, dout, width, half] {
        auto kat = [&](int w, int i, int o) -> double {
            return kernel->data[(static_cast<std::size_t>(w) * din + i) * dout + o];
        };
        for (int t = 0; t < n; ++t)
            for (int w = 0; w < width; ++w) {
                const int s = t + w - half;
                if (s < 0 || s >= n) continue;
                const double* go = &out->grad[static_cast<std::size_t>(t) * dout];
                if (flows(x)) {
                    x->ensure_grad();
                    for (int i = 0; i < din; ++i) {
                        double acc = 0.0;
                        for (int o = 0; o < dout; ++o) acc += go[o] * kat(w, i, o);
                        x->grad[static_cast<std::size_t>(s) * din + i] += acc;
                    }
                }
                if (flows(kernel)) {
                    kernel->ensure_grad();
                    for (int i = 0; i < din; ++i) {
                        const double xv = x->at(s, i);
                        if (xv == 0.0) continue;
                        for (int o = 0; o < dout; ++o)
                            kernel->grad[(static_cast<std::size_t>(w) * din + i) * dout + o] += xv * go[o];
                    }
                }
            }
    });
    return out;
}

TensorPtr Tape::concat_last_dim(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_last_dim: no inputs");
    const int n = parts[0]->dim(0);
    int total = 0;
    bool rg = false;
    for (const auto& p : parts) {
        if (p->ndim() != 2 || p->dim(0) != n)
            throw std::invalid_argument("concat_last_dim: row mismatch " + shape_str(p->shape));
        total += p->dim(1);
        rg = rg || flows(p);
    }
    auto out = result({n, total}, rg);
    int off = 0;
    for (const auto& p : parts) {
        const int d = p->dim(1);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) out->at(i, off + j) = p->at(i, j);
        off += d;
    }
    record(out, [parts, out, n, total] {
        int off = 0;
        for (const auto& p : parts) {
            const int d = p->dim(1);
            if (flows(p)) {
                p->ensure_grad();
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < d; ++j)
                        p->grad[static_cast<std::size_t>(i) * d + j] +=
                            out->grad[static_cast<std::size_t>(i) * total + off + j];
            }
            off += d;
        }
    });
    return out;
}

TensorPtr Tape::embedding_lookup(const TensorPtr& table, const std::vector<int>& ids) {
    if (table->ndim() != 2) throw std::invalid_argument("embedding_lookup: table must be rank 2");
    const int vocab = table->dim(0), d = table->dim(1);
    for (int id : ids)
        if (id < 0 || id >= vocab)
            throw std::out_of_range("embedding_lookup: id " + std::to_string(id) +
                                    " outside vocabulary of size " + std::to_string(vocab));
    const int n = static_cast<int>(ids.size());
    auto out = result({n, d}, flows(table));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out->at(i, j) = table->at(ids[static_cast<std::size_t>(i)], j);
    record(out, [table, out, ids, n, d] {
        if (!flows(table)) return;
        table->ensure_grad();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j)
                table->grad[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)]) * d + j] +=
                    out->grad[static_cast<std::size_t>(i) * d + j];
    });
    return out;
}

TensorPtr Tape::sum(const TensorPtr& a) {
    auto out = result({1}, flows(a));
    double s = 0.0;
    for (double v : a->data) s += v;
    out->data[0] = s;
    record(out, [a, out] {
        if (!flows(a)) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < a->numel(); ++i) a->grad[i] += out->grad[0];
    });
    return out;
}

void Tape::backward(const TensorPtr& loss) {
    if (!loss->is_scalar())
        throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss->shape));
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        it->out->ensure_grad();  // nodes never touched downstream keep zero grad
        it->backward_fn();
    }
    nodes_.clear();
}

}  // namespace bat
