#include "tapir/lstm.hpp"

#include "tapir/init.hpp"
#include "tapir/ops.hpp"

namespace tapir {

LstmStack::LstmStack(int input_dim, int hidden, int layers, int n_labels, Rng& rng)
    : input_dim_(input_dim), hidden_(hidden) {
    for (int l = 0; l < layers; ++l) {
        const int in = l == 0 ? input_dim : hidden;
        layers_.push_back({xavier_init({4 * hidden, in + hidden}, rng),
                           xavier_init({4 * hidden}, rng)});
    }
    head_w_ = xavier_init({n_labels, hidden}, rng);
    head_b_ = xavier_init({n_labels}, rng);
}

LstmStack::State LstmStack::initial_state() const {
    State s;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        s.h.push_back(Tensor::zeros({hidden_}));
        s.c.push_back(Tensor::zeros({hidden_}));
    }
    return s;
}

Tensor LstmStack::step(State& state, const Tensor& x_t, real dropout_rate, Rng* rng,
                       bool train) const {
    Tensor input = x_t;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (l > 0 && train && dropout_rate > real(0) && rng != nullptr) {
            input = dropout(input, dropout_rate, *rng, true);
        }
        const Layer& ly = layers_[l];
        Tensor g = linear_vec(concat(input, state.h[l]), ly.w, ly.b);
        Tensor i_gate = sigmoid(slice(g, 0, hidden_));
        Tensor f_gate = sigmoid(slice(g, hidden_, hidden_));
        Tensor o_gate = sigmoid(slice(g, 2 * hidden_, hidden_));
        Tensor c_hat = tanh(slice(g, 3 * hidden_, hidden_));
        state.c[l] = add(mul(f_gate, state.c[l]), mul(i_gate, c_hat));
        state.h[l] = mul(o_gate, tanh(state.c[l]));
        input = state.h[l];
    }
    return input;
}

Tensor LstmStack::logits(const Tensor& h_top) const { return linear_vec(h_top, head_w_, head_b_); }

void LstmStack::collect_params(std::vector<NamedTensor>& out, const std::string& prefix) const {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        out.push_back({prefix + "layer" + std::to_string(l) + ".w", layers_[l].w});
        out.push_back({prefix + "layer" + std::to_string(l) + ".b", layers_[l].b});
    }
    out.push_back({prefix + "head.w", head_w_});
    out.push_back({prefix + "head.b", head_b_});
}

LstmStack LstmStack::from_checkpoint(const LoadedCheckpoint& ck, const std::string& prefix) {
    LstmStack s;
    for (int l = 0;; ++l) {
        const std::string base = prefix + "layer" + std::to_string(l) + ".";
        if (!ck.has(base + "w")) break;
        s.layers_.push_back({ck.get(base + "w"), ck.get(base + "b")});
    }
    if (s.layers_.empty()) throw DataError("checkpoint has no LSTM layers under " + prefix);
    s.head_w_ = ck.get(prefix + "head.w");
    s.head_b_ = ck.get(prefix + "head.b");
    s.hidden_ = s.layers_[0].w.dim(0) / 4;
    s.input_dim_ = s.layers_[0].w.dim(1) - s.hidden_;
    return s;
}

}  // namespace tapir
