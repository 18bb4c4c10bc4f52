#pragma once

#include <string>
#include <vector>

#include "tapir/checkpoint.hpp"
#include "tapir/common.hpp"
#include "tapir/tensor.hpp"

namespace tapir {

// Controller: an LSTMN cell whose recurrence runs over attention summaries of
// the phi cache instead of its own previous hidden state. Additional layers
// (ctrl_layers > 1) are plain LSTM cells stacked on the controller output.
class LstmnController {
  public:
    struct ExtraLayer {
        Tensor w;  // [4Hc, 2Hc]
        Tensor b;
    };

    struct State {
        Tensor k_tilde_prev;          // previous adaptive summary of the cache
        std::vector<Tensor> tape;     // memory tape: cell c_i per processed step
        std::vector<Tensor> extra_h;  // stacked plain-LSTM states
        std::vector<Tensor> extra_c;
    };

    struct StepOut {
        Tensor k_t;        // controller output fed to the policy head
        Tensor attention;  // s^t over cache slots, empty tensor at t=1
    };

    LstmnController() = default;
    LstmnController(int phi_dim, int input_dim, int hidden, int layers, Rng& rng);

    State initial_state() const;  // k~ = 0, empty tape

    // phi_slots: aged cache contents, oldest first; slot_times: absolute step
    // index of each slot (1-based), used to pick the matching tape cell.
    StepOut step(State& state, const std::vector<Tensor>& phi_slots,
                 const std::vector<int>& slot_times, const Tensor& h_t, const Tensor& x_t) const;

    int hidden() const { return hidden_; }
    int phi_dim() const { return phi_dim_; }
    int layers() const { return 1 + static_cast<int>(extra_.size()); }

    void collect_params(std::vector<NamedTensor>& out, const std::string& prefix) const;
    static LstmnController from_checkpoint(const LoadedCheckpoint& ck, const std::string& prefix);

  private:
    int phi_dim_ = 0;
    int input_dim_ = 0;
    int hidden_ = 0;
    // attention (additive form): e_i = v^T tanh(W_c phi_i + W_h h_t + W_k k~_{t-1} + b_u)
    Tensor w_c_;  // [Hc, P]
    Tensor w_h_;  // [Hc, H]
    Tensor w_k_;  // [Hc, P]
    Tensor b_u_;  // [Hc]
    Tensor v_;    // [Hc]
    // recurrent update over [k~_t, x_t]
    Tensor w_gates_;  // [4Hc, P+E]
    Tensor b_gates_;  // [4Hc]
    std::vector<ExtraLayer> extra_;
};

}  // namespace tapir
