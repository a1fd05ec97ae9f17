#include "bat/model.hpp"

#include <cmath>
#include <stdexcept>

namespace bat {

void ModelConfig::validate() const {
    if (d_model != heads * d_k)
        throw std::invalid_argument("ModelConfig: d_model must equal heads * d_k");
    if (d_k != d_v) throw std::invalid_argument("ModelConfig: d_k must equal d_v");
    if (n_layers < 1) throw std::invalid_argument("ModelConfig: n_layers must be >= 1");
    if (max_seq_len < 1) throw std::invalid_argument("ModelConfig: max_seq_len must be >= 1");
    if (vocab_size < 1 || n_classes < 2)
        throw std::invalid_argument("ModelConfig: vocab_size and n_classes must be set");
}

TensorPtr positional_encoding(int n, int d) {
    auto pe = make_tensor({n, d});
    for (int p = 0; p < n; ++p)
        for (int j = 0; j < d; ++j) {
            const double angle =
                static_cast<double>(p) / std::pow(10000.0, 2.0 * (j / 2) / static_cast<double>(d));
            pe->at(p, j) = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    return pe;
}

namespace {

TensorPtr init_affine(std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
    auto t = make_tensor(std::move(shape), 0.0, true);
    const double lim = 1.0 / std::sqrt(static_cast<double>(fan_in));
    fill_uniform(*t, rng, -lim, lim);
    return t;
}

TensorPtr init_const(std::vector<int> shape, double v) {
    return make_tensor(std::move(shape), v, true);
}

}  // namespace

Model::Model(ModelConfig cfg, unsigned long long seed) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    embedding_ = make_tensor({cfg_.vocab_size, cfg_.d_model}, 0.0, true);
    fill_uniform(*embedding_, rng, -0.1, 0.1);

    const bool is_bat = cfg_.arch == Arch::bat;
    for (int l = 0; l < cfg_.n_layers; ++l) {
        EncoderLayerParams p;
        for (int h = 0; h < cfg_.heads; ++h) {
            p.wq.push_back(init_affine({cfg_.d_model, cfg_.d_k}, cfg_.d_model, rng));
            p.wk.push_back(init_affine({cfg_.d_model, cfg_.d_k}, cfg_.d_model, rng));
            p.wv.push_back(init_affine({cfg_.d_model, cfg_.d_v}, cfg_.d_model, rng));
        }
        p.wo = init_affine({cfg_.heads * cfg_.d_v, cfg_.d_model}, cfg_.heads * cfg_.d_v, rng);
        if (is_bat) {
            p.conv1_k = init_affine({1, cfg_.d_model, cfg_.d_model}, cfg_.d_model, rng);
            p.conv1_b = init_const({cfg_.d_model}, 0.0);
            p.conv3_k = init_affine({3, cfg_.d_model, cfg_.d_model}, 3 * cfg_.d_model, rng);
            p.conv3_b = init_const({cfg_.d_model}, 0.0);
        }
        p.attn_ln_g = init_const({cfg_.d_model}, 1.0);
        p.attn_ln_b = init_const({cfg_.d_model}, 0.0);
        p.ff1_w = init_affine({cfg_.d_model, cfg_.d_ff}, cfg_.d_model, rng);
        p.ff1_b = init_const({cfg_.d_ff}, 0.0);
        p.ff2_w = init_affine({cfg_.d_ff, cfg_.d_model}, cfg_.d_ff, rng);
        p.ff2_b = init_const({cfg_.d_model}, 0.0);
        if (is_bat) p.w_res = init_const({1}, 1.0);
        p.ff_ln_g = init_const({cfg_.d_model}, 1.0);
        p.ff_ln_b = init_const({cfg_.d_model}, 0.0);
        if (is_bat && cfg_.pre_ln) {
            p.pre1_g = init_const({cfg_.d_model}, 1.0);
            p.pre1_b = init_const({cfg_.d_model}, 0.0);
            p.pre2_g = init_const({cfg_.d_model}, 1.0);
            p.pre2_b = init_const({cfg_.d_model}, 0.0);
        }
        layers_.push_back(std::move(p));
    }
    head_w_ = init_affine({cfg_.d_model, cfg_.n_classes}, cfg_.d_model, rng);
    head_b_ = init_const({cfg_.n_classes}, 0.0);
}

namespace {

TensorPtr multi_head_attention(Tape& tape, const TensorPtr& x, const EncoderLayerParams& p,
                               int d_k, const TensorPtr& attn_mask) {
    std::vector<TensorPtr> heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_k));
    for (std::size_t h = 0; h < p.wq.size(); ++h) {
        auto q = tape.matmul(x, p.wq[h]);
        auto k = tape.matmul(x, p.wk[h]);
        auto v = tape.matmul(x, p.wv[h]);
        auto scores = tape.scale(tape.matmul_nt(q, k), scale);
        if (attn_mask) scores = tape.add(scores, attn_mask);
        heads.push_back(tape.matmul(tape.softmax_rows(scores), v));
    }
    return tape.matmul(tape.concat_last_dim(heads), p.wo);
}

TensorPtr ffnn(Tape& tape, const TensorPtr& x, const EncoderLayerParams& p) {
    auto h = tape.relu(tape.add_rowvec(tape.matmul(x, p.ff1_w), p.ff1_b));
    return tape.add_rowvec(tape.matmul(h, p.ff2_w), p.ff2_b);
}

}  // namespace

TensorPtr Model::mfsa(Tape& tape, const TensorPtr& x, int layer, const TensorPtr& attn_mask) const {
    const auto& p = layers_[static_cast<std::size_t>(layer)];
    auto attn = multi_head_attention(tape, x, p, cfg_.d_k, attn_mask);
    auto c1 = tape.relu(tape.add_rowvec(tape.conv1d(x, p.conv1_k, 1), p.conv1_b));
    auto c3 = tape.relu(tape.add_rowvec(tape.conv1d(x, p.conv3_k, 3), p.conv3_b));
    return tape.layer_norm(tape.add(tape.add(attn, c1), c3), p.attn_ln_g, p.attn_ln_b);
}

TensorPtr Model::ats_sublayer(Tape& tape, const TensorPtr& x, int layer,
                              const TensorPtr& attn_mask) const {
    const auto& p = layers_[static_cast<std::size_t>(layer)];
    auto xin = cfg_.pre_ln ? tape.layer_norm(x, p.pre1_g, p.pre1_b) : x;
    return tape.add(x, mfsa(tape, xin, layer, attn_mask));
}

TensorPtr Model::ffts_sublayer(Tape& tape, const TensorPtr& x, int layer) const {
    const auto& p = layers_[static_cast<std::size_t>(layer)];
    auto xin = cfg_.pre_ln ? tape.layer_norm(x, p.pre2_g, p.pre2_b) : x;
    auto mixed = tape.add(ffnn(tape, xin, p), tape.scale_by(x, p.w_res));
    return tape.layer_norm(mixed, p.ff_ln_g, p.ff_ln_b);
}

TensorPtr Model::forward(Tape& tape, const std::vector<int>& tokens,
                         const std::vector<bool>& mask) const {
    const int n = static_cast<int>(tokens.size());
    if (n > cfg_.max_seq_len)
        throw std::length_error("forward: sequence length " + std::to_string(n) +
                                " exceeds max_seq_len " + std::to_string(cfg_.max_seq_len));
    if (static_cast<int>(mask.size()) != n)
        throw std::invalid_argument("forward: mask length mismatch");

    auto x = tape.add(tape.embedding_lookup(embedding_, tokens), positional_encoding(n, cfg_.d_model));

    TensorPtr attn_mask;  // additive -1e9 over padded key columns
    bool any_pad = false;
    for (bool m : mask) any_pad = any_pad || !m;
    if (any_pad) {
        attn_mask = make_tensor({n, n});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (!mask[static_cast<std::size_t>(j)]) attn_mask->at(i, j) = -1e9;
    }

    for (int l = 0; l < cfg_.n_layers; ++l) {
        if (cfg_.arch == Arch::bat) {
            x = ats_sublayer(tape, x, l, attn_mask);
            x = ffts_sublayer(tape, x, l);
        } else {
            // vanilla encoder layer: post-LN, plain residuals
            const auto& p = layers_[static_cast<std::size_t>(l)];
            auto attn = multi_head_attention(tape, x, p, cfg_.d_k, attn_mask);
            x = tape.layer_norm(tape.add(x, attn), p.attn_ln_g, p.attn_ln_b);
            x = tape.layer_norm(tape.add(x, ffnn(tape, x, p)), p.ff_ln_g, p.ff_ln_b);
        }
    }
    return tape.softmax_rows(tape.add_rowvec(tape.matmul(x, head_w_), head_b_));
}

TensorPtr Model::forward(Tape& tape, const std::vector<int>& tokens) const {
    return forward(tape, tokens, std::vector<bool>(tokens.size(), true));
}

std::vector<std::pair<std::string, TensorPtr>> Model::named_parameters() const {
    std::vector<std::pair<std::string, TensorPtr>> out;
    out.emplace_back("embedding", embedding_);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& p = layers_[l];
        const std::string pre = "layer" + std::to_string(l) + ".";
        for (std::size_t h = 0; h < p.wq.size(); ++h) {
            const std::string hs = std::to_string(h);
            out.emplace_back(pre + "wq" + hs, p.wq[h]);
            out.emplace_back(pre + "wk" + hs, p.wk[h]);
            out.emplace_back(pre + "wv" + hs, p.wv[h]);
        }
        out.emplace_back(pre + "wo", p.wo);
        if (p.conv1_k) {
            out.emplace_back(pre + "conv1.k", p.conv1_k);
            out.emplace_back(pre + "conv1.b", p.conv1_b);
            out.emplace_back(pre + "conv3.k", p.conv3_k);
            out.emplace_back(pre + "conv3.b", p.conv3_b);
        }
        out.emplace_back(pre + "attn_ln.g", p.attn_ln_g);
        out.emplace_back(pre + "attn_ln.b", p.attn_ln_b);
        out.emplace_back(pre + "ff1.w", p.ff1_w);
        out.emplace_back(pre + "ff1.b", p.ff1_b);
        out.emplace_back(pre + "ff2.w", p.ff2_w);
        out.emplace_back(pre + "ff2.b", p.ff2_b);
        if (p.w_res) out.emplace_back(pre + "w_res", p.w_res);
        out.emplace_back(pre + "ff_ln.g", p.ff_ln_g);
        out.emplace_back(pre + "ff_ln.b", p.ff_ln_b);
        if (p.pre1_g) {
            out.emplace_back(pre + "pre1.g", p.pre1_g);
            out.emplace_back(pre + "pre1.b", p.pre1_b);
            out.emplace_back(pre + "pre2.g", p.pre2_g);
            out.emplace_back(pre + "pre2.b", p.pre2_b);
        }
    }
    out.emplace_back("head.w", head_w_);
    out.emplace_back("head.b", head_b_);
    return out;
}

std::vector<TensorPtr> Model::parameters() const {
    std::vector<TensorPtr> out;
    for (auto& [n, t] : named_parameters()) out.push_back(t);
    return out;
}

long parameter_count(const ModelConfig& cfg) {
    const long d = cfg.d_model, ff = cfg.d_ff, h = cfg.heads, dk = cfg.d_k, dv = cfg.d_v;
    long per_layer = h * (d * dk * 2 + d * dv) + h * dv * d;  // attention
    per_layer += d * ff + ff + ff * d + d;                    // FFNN
    per_layer += 2 * d;                                       // attention-side LN
    per_layer += 2 * d;                                       // feed-forward-side LN
    if (cfg.arch == Arch::bat) {
        per_layer += d * d + d;          // 1x1 conv
        per_layer += 3 * d * d + d;      // 3x1 conv
        per_layer += 1;                  // w_res
        if (cfg.pre_ln) per_layer += 4 * d;
    }
    return cfg.n_layers * per_layer + d * cfg.n_classes + cfg.n_classes;
}

long parameter_count_with_embedding(const ModelConfig& cfg) {
    return parameter_count(cfg) + static_cast<long>(cfg.vocab_size) * cfg.d_model;
}

}  // namespace bat
