#include "tapir/projections.hpp"

#include <algorithm>

#include "tapir/init.hpp"
#include "tapir/ops.hpp"

namespace tapir {

CacheProjections::CacheProjections(int hidden, int n_labels, Rng& rng)
    : w_y_(xavier_init({hidden, n_labels}, rng)),
      b_z_(xavier_init({hidden}, rng)),
      w_in_(xavier_init({hidden, hidden}, rng)),
      w_out_(xavier_init({hidden, hidden}, rng)),
      b_phi_(xavier_init({hidden}, rng)) {}

Tensor CacheProjections::project_z(const Tensor& logits) const {
    return tanh(linear_vec(logits, w_y_, b_z_));
}

Tensor CacheProjections::fuse_phi(const Tensor& h, const Tensor& z) const {
    return tanh(add(add(matvec(w_in_, h), matvec(w_out_, z)), b_phi_));
}

void CacheProjections::collect_params(std::vector<NamedTensor>& out,
                                      const std::string& prefix) const {
    out.push_back({prefix + "w_y", w_y_});
    out.push_back({prefix + "b_z", b_z_});
    out.push_back({prefix + "w_in", w_in_});
    out.push_back({prefix + "w_out", w_out_});
    out.push_back({prefix + "b_phi", b_phi_});
}

CacheProjections CacheProjections::from_checkpoint(const LoadedCheckpoint& ck,
                                                   const std::string& prefix) {
    CacheProjections p;
    p.w_y_ = ck.get(prefix + "w_y");
    p.b_z_ = ck.get(prefix + "b_z");
    p.w_in_ = ck.get(prefix + "w_in");
    p.w_out_ = ck.get(prefix + "w_out");
    p.b_phi_ = ck.get(prefix + "b_phi");
    return p;
}

PolicyHead::PolicyHead(int ctrl_hidden, Rng& rng)
    : theta_(xavier_init({ctrl_hidden}, rng)), bias_(xavier_init({1}, rng)) {}

namespace {

Tensor clamp_open_unit(const Tensor& s) {
    const real lo = kBceEps, hi = real(1) - kBceEps;
    const real v = s.item();
    if (v >= lo && v <= hi) return s;
    // saturated: constant with zero gradient
    return Tensor::scalar(std::min(std::max(v, lo), hi));
}

}  // namespace

Tensor PolicyHead::score(const Tensor& k_t) const {
    return clamp_open_unit(sigmoid(add(dot(theta_, k_t), bias_)));
}

void PolicyHead::collect_params(std::vector<NamedTensor>& out, const std::string& prefix) const {
    out.push_back({prefix + "theta", theta_});
    out.push_back({prefix + "bias", bias_});
}

PolicyHead PolicyHead::from_checkpoint(const LoadedCheckpoint& ck, const std::string& prefix) {
    PolicyHead h;
    h.theta_ = ck.get(prefix + "theta");
    h.bias_ = ck.get(prefix + "bias");
    return h;
}

}  // namespace tapir
