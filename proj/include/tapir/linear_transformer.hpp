#pragma once

#include <string>
#include <vector>

#include "tapir/checkpoint.hpp"
#include "tapir/common.hpp"
#include "tapir/tensor.hpp"
#include "tapir/transformer.hpp"

namespace tapir {

// Linear-attention encoder with feature map phi(x) = elu(x) + 1. Shares the
// block layout of TransformerEncoder; only the attention kernel differs.
//
// Causal mode runs the recurrent view: per head, S_i = S_{i-1} + phi(K_i) V_i^T
// and Z_i = Z_{i-1} + phi(K_i) with S_0 = Z_0 = 0, an O(1) state update per
// token. Unmasked mode uses the global S_N, Z_N for every position, so a
// position's output changes as the sequence grows; for a single layer the
// final position equals the causal step-N output.
class LinearTransformerEncoder {
  public:
    LinearTransformerEncoder() = default;
    LinearTransformerEncoder(int input_dim, int d_model, int ffn_dim, int heads, int layers,
                             int n_labels, Rng& rng);

    Tensor forward(const Tensor& embeds, AttentionMask mask, real dropout_rate = real(0),
                   Rng* rng = nullptr, bool train = false) const;

    int d_model() const { return d_model_; }
    int heads() const { return heads_; }
    void set_heads(int h) { heads_ = h; }
    int layers() const { return static_cast<int>(blocks_.size()); }
    int n_labels() const { return head_w_.dim(0); }

    void collect_params(std::vector<NamedTensor>& out, const std::string& prefix) const;
    static LinearTransformerEncoder from_checkpoint(const LoadedCheckpoint& ck,
                                                    const std::string& prefix);

  private:
    Tensor attention(const Tensor& x, const EncoderBlockParams& blk, AttentionMask mask) const;

    int d_model_ = 0;
    int heads_ = 0;
    Tensor in_w_, in_b_;
    Tensor positions_;
    std::vector<EncoderBlockParams> blocks_;
    Tensor head_w_, head_b_;
};

}  // namespace tapir
