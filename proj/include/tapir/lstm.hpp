#pragma once

#include <string>
#include <vector>

#include "tapir/checkpoint.hpp"
#include "tapir/common.hpp"
#include "tapir/tensor.hpp"

namespace tapir {

// Incremental first-pass labeller: stacked LSTM plus a logit head. Strictly
// causal; the state after step t depends only on inputs up to t.
class LstmStack {
  public:
    struct Layer {
        Tensor w;  // [4H, in+H], gate order i,f,o,c-hat
        Tensor b;  // [4H]
    };

    struct State {
        std::vector<Tensor> h;
        std::vector<Tensor> c;
    };

    LstmStack() = default;
    LstmStack(int input_dim, int hidden, int layers, int n_labels, Rng& rng);

    State initial_state() const;  // h_0 = c_0 = 0

    // Advances all layers; returns the top hidden state h_t. Inter-layer
    // dropout applies at train time only.
    Tensor step(State& state, const Tensor& x_t, real dropout_rate = real(0), Rng* rng = nullptr,
                bool train = false) const;

    Tensor logits(const Tensor& h_top) const;  // output head

    int hidden() const { return hidden_; }
    int layers() const { return static_cast<int>(layers_.size()); }
    int input_dim() const { return input_dim_; }
    int n_labels() const { return head_w_.dim(0); }

    void collect_params(std::vector<NamedTensor>& out, const std::string& prefix) const;
    static LstmStack from_checkpoint(const LoadedCheckpoint& ck, const std::string& prefix);

  private:
    int input_dim_ = 0;
    int hidden_ = 0;
    std::vector<Layer> layers_;
    Tensor head_w_;  // [L, H]
    Tensor head_b_;  // [L]
};

}  // namespace tapir
