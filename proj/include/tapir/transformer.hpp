#pragma once

#include <string>
#include <vector>

#include "tapir/checkpoint.hpp"
#include "tapir/common.hpp"
#include "tapir/tensor.hpp"

namespace tapir {

inline constexpr int kMaxPositions = 512;

enum class AttentionMask { None, Causal };

// Fixed sinusoidal position encoding, [kMaxPositions, d_model].
Tensor sinusoidal_positions(int d_model);

struct EncoderBlockParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;  // attention, [d,d] / [d]
    Tensor ln1_g, ln1_b;
    Tensor w1, b1, w2, b2;  // feed-forward, relu activation
    Tensor ln2_g, ln2_b;
};

// Post-LN Transformer encoder over projected embeddings, with a per-position
// logit head. With a causal mask, position i is independent of positions > i.
class TransformerEncoder {
  public:
    TransformerEncoder() = default;
    TransformerEncoder(int input_dim, int d_model, int ffn_dim, int heads, int layers,
                       int n_labels, Rng& rng);

    // embeds: [T, input_dim]; returns logits [T, n_labels].
    Tensor forward(const Tensor& embeds, AttentionMask mask, real dropout_rate = real(0),
                   Rng* rng = nullptr, bool train = false) const;

    int d_model() const { return d_model_; }
    int heads() const { return heads_; }
    void set_heads(int h) { heads_ = h; }  // restored from model hypers on load
    int layers() const { return static_cast<int>(blocks_.size()); }
    int n_labels() const { return head_w_.dim(0); }

    void collect_params(std::vector<NamedTensor>& out, const std::string& prefix) const;
    static TransformerEncoder from_checkpoint(const LoadedCheckpoint& ck,
                                              const std::string& prefix);

  private:
    int d_model_ = 0;
    int heads_ = 0;
    Tensor in_w_, in_b_;  // embedding projection to d_model
    Tensor positions_;    // fixed, untracked
    std::vector<EncoderBlockParams> blocks_;
    Tensor head_w_, head_b_;
};

}  // namespace tapir
