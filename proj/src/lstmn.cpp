#include "tapir/lstmn.hpp"

#include <stdexcept>

#include "tapir/init.hpp"
#include "tapir/ops.hpp"

namespace tapir {

LstmnController::LstmnController(int phi_dim, int input_dim, int hidden, int layers, Rng& rng)
    : phi_dim_(phi_dim), input_dim_(input_dim), hidden_(hidden) {
    w_c_ = xavier_init({hidden, phi_dim}, rng);
    w_h_ = xavier_init({hidden, phi_dim}, rng);
    w_k_ = xavier_init({hidden, phi_dim}, rng);
    b_u_ = xavier_init({hidden}, rng);
    v_ = xavier_init({hidden}, rng);
    w_gates_ = xavier_init({4 * hidden, phi_dim + input_dim}, rng);
    b_gates_ = xavier_init({4 * hidden}, rng);
    for (int l = 1; l < layers; ++l) {
        extra_.push_back({xavier_init({4 * hidden, 2 * hidden}, rng), xavier_init({4 * hidden}, rng)});
    }
}

LstmnController::State LstmnController::initial_state() const {
    State s;
    s.k_tilde_prev = Tensor::zeros({phi_dim_});
    for (std::size_t l = 0; l < extra_.size(); ++l) {
        s.extra_h.push_back(Tensor::zeros({hidden_}));
        s.extra_c.push_back(Tensor::zeros({hidden_}));
    }
    return s;
}

LstmnController::StepOut LstmnController::step(State& state, const std::vector<Tensor>& phi_slots,
                                               const std::vector<int>& slot_times, const Tensor& h_t,
                                               const Tensor& x_t) const {
    if (phi_slots.size() != slot_times.size()) {
        throw std::logic_error("controller: cache slots and slot times misaligned");
    }
    Tensor k_tilde, c_tilde, attention;
    if (phi_slots.empty()) {
        k_tilde = Tensor::zeros({phi_dim_});
        c_tilde = Tensor::zeros({hidden_});
    } else {
        const Tensor wh_h = matvec(w_h_, h_t);
        const Tensor wk_k = matvec(w_k_, state.k_tilde_prev);
        std::vector<Tensor> scores;
        scores.reserve(phi_slots.size());
        for (const Tensor& phi : phi_slots) {
            Tensor u = add(add(add(matvec(w_c_, phi), wh_h), wk_k), b_u_);
            scores.push_back(dot(v_, tanh(u)));
        }
        attention = softmax(stack_scalars(scores));
        std::vector<Tensor> cells;
        cells.reserve(slot_times.size());
        for (int t : slot_times) {
            const std::size_t idx = static_cast<std::size_t>(t) - 1;  // tape is 1-based in time
            if (idx >= state.tape.size()) {
                throw std::logic_error("controller: tape/cache misalignment");
            }
            cells.push_back(state.tape[idx]);
        }
        k_tilde = weighted_sum(attention, phi_slots);
        c_tilde = weighted_sum(attention, cells);
    }

    Tensor g = linear_vec(concat(k_tilde, x_t), w_gates_, b_gates_);
    Tensor i_gate = sigmoid(slice(g, 0, hidden_));
    Tensor f_gate = sigmoid(slice(g, hidden_, hidden_));
    Tensor o_gate = sigmoid(slice(g, 2 * hidden_, hidden_));
    Tensor c_hat = tanh(slice(g, 3 * hidden_, hidden_));
    Tensor c_t = add(mul(f_gate, c_tilde), mul(i_gate, c_hat));
    Tensor k_t = mul(o_gate, tanh(c_t));

    state.tape.push_back(c_t);
    state.k_tilde_prev = k_tilde;

    Tensor out = k_t;
    for (std::size_t l = 0; l < extra_.size(); ++l) {
        Tensor ge = linear_vec(concat(out, state.extra_h[l]), extra_[l].w, extra_[l].b);
        Tensor ie = sigmoid(slice(ge, 0, hidden_));
        Tensor fe = sigmoid(slice(ge, hidden_, hidden_));
        Tensor oe = sigmoid(slice(ge, 2 * hidden_, hidden_));
        Tensor ce_hat = tanh(slice(ge, 3 * hidden_, hidden_));
        state.extra_c[l] = add(mul(fe, state.extra_c[l]), mul(ie, ce_hat));
        state.extra_h[l] = mul(oe, tanh(state.extra_c[l]));
        out = state.extra_h[l];
    }
    return {out, attention};
}

void LstmnController::collect_params(std::vector<NamedTensor>& out,
                                     const std::string& prefix) const {
    out.push_back({prefix + "w_c", w_c_});
    out.push_back({prefix + "w_h", w_h_});
    out.push_back({prefix + "w_k", w_k_});
    out.push_back({prefix + "b_u", b_u_});
    out.push_back({prefix + "v", v_});
    out.push_back({prefix + "w_gates", w_gates_});
    out.push_back({prefix + "b_gates", b_gates_});
    for (std::size_t l = 0; l < extra_.size(); ++l) {
        out.push_back({prefix + "extra" + std::to_string(l) + ".w", extra_[l].w});
        out.push_back({prefix + "extra" + std::to_string(l) + ".b", extra_[l].b});
    }
}

LstmnController LstmnController::from_checkpoint(const LoadedCheckpoint& ck,
                                                 const std::string& prefix) {
    LstmnController c;
    c.w_c_ = ck.get(prefix + "w_c");
    c.w_h_ = ck.get(prefix + "w_h");
    c.w_k_ = ck.get(prefix + "w_k");
    c.b_u_ = ck.get(prefix + "b_u");
    c.v_ = ck.get(prefix + "v");
    c.w_gates_ = ck.get(prefix + "w_gates");
    c.b_gates_ = ck.get(prefix + "b_gates");
    for (int l = 0;; ++l) {
        const std::string base = prefix + "extra" + std::to_string(l) + ".";
        if (!ck.has(base + "w")) break;
        c.extra_.push_back({ck.get(base + "w"), ck.get(base + "b")});
    }
    c.hidden_ = c.v_.dim(0);
    c.phi_dim_ = c.w_c_.dim(1);
    c.input_dim_ = c.w_gates_.dim(1) - c.phi_dim_;
    return c;
}

}  // namespace tapir
