#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bat/tape.hpp"
#include "bat/tensor.hpp"

namespace bat {

enum class Arch { bat, transformer };

struct ModelConfig {
    Arch arch = Arch::bat;
    int n_layers = 4;
    int d_model = 128;
    int d_ff = 512;
    int heads = 4;
    int d_k = 32;
    int d_v = 32;
    bool pre_ln = true;
    int vocab_size = 0;
    int n_classes = 0;
    int max_seq_len = 512;

    void validate() const;
};

// Sinusoidal encoding; row p depends on p and d only.
TensorPtr positional_encoding(int n, int d);

struct EncoderLayerParams {
    std::vector<TensorPtr> wq, wk, wv;  // per head, [d_model x d_k]
    TensorPtr wo;                       // [h*d_v x d_model]
    TensorPtr conv1_k, conv1_b;         // 1x1 branch (bat)
    TensorPtr conv3_k, conv3_b;         // 3x1 branch (bat)
    TensorPtr attn_ln_g, attn_ln_b;     // f_LN inside MFSA / post-LN of the attention sublayer
    TensorPtr ff1_w, ff1_b, ff2_w, ff2_b;
    TensorPtr w_res;                    // learnable scalar residual weight (bat)
    TensorPtr ff_ln_g, ff_ln_b;
    TensorPtr pre1_g, pre1_b, pre2_g, pre2_b;  // pre-LN pairs, when enabled
};

// BAT encoder (ATS + FFTS with MFSA) or the vanilla Transformer-encoder
// baseline, plus the softmax classification head.
class Model {
  public:
    Model(ModelConfig cfg, unsigned long long seed);

    // Token-level class distributions, [n x C]. `mask` marks real (non-pad)
    // positions; padded key columns are excluded from attention.
    TensorPtr forward(Tape& tape, const std::vector<int>& tokens,
                      const std::vector<bool>& mask) const;
    TensorPtr forward(Tape& tape, const std::vector<int>& tokens) const;

    // Single sublayer entry points, used directly by tests.
    TensorPtr ats_sublayer(Tape& tape, const TensorPtr& x, int layer,
                           const TensorPtr& attn_mask = nullptr) const;
    TensorPtr ffts_sublayer(Tape& tape, const TensorPtr& x, int layer) const;
    TensorPtr mfsa(Tape& tape, const TensorPtr& x, int layer,
                   const TensorPtr& attn_mask = nullptr) const;

    std::vector<std::pair<std::string, TensorPtr>> named_parameters() const;
    std::vector<TensorPtr> parameters() const;

    const ModelConfig& config() const { return cfg_; }
    EncoderLayerParams& layer(int i) { return layers_[static_cast<std::size_t>(i)]; }
    TensorPtr embedding() const { return embedding_; }

  private:
    ModelConfig cfg_;
    TensorPtr embedding_;
    std::vector<EncoderLayerParams> layers_;
    TensorPtr head_w_, head_b_;
};

// Learnable scalar count from config alone, excluding the embedding table.
long parameter_count(const ModelConfig& cfg);
long parameter_count_with_embedding(const ModelConfig& cfg);

}  // namespace bat
