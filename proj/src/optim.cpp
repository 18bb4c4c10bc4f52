#include "tapir/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace tapir {

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (const Tensor& p : params_) {
        if (!p.tracked()) throw std::invalid_argument("AdamW: parameter without gradient slot");
        m_.emplace_back(p.size(), real(0));
        v_.emplace_back(p.size(), real(0));
    }
}

void AdamW::step(real lr_override) {
    const real lr = lr_override >= real(0) ? lr_override : cfg_.lr;
    ++step_;
    const real b1t = real(1) - static_cast<real>(std::pow(cfg_.beta1, static_cast<real>(step_)));
    const real b2t = real(1) - static_cast<real>(std::pow(cfg_.beta2, static_cast<real>(step_)));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        auto& val = params_[pi].value();
        const auto& g = params_[pi].grad();
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < val.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (real(1) - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (real(1) - cfg_.beta2) * g[i] * g[i];
            const real mhat = m[i] / b1t;
            const real vhat = v[i] / b2t;
            val[i] -= lr * cfg_.weight_decay * val[i];
            val[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void AdamW::zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
}

real clip_global_norm(std::vector<Tensor>& params, real max_norm) {
    double sq = 0;
    for (const Tensor& p : params) {
        if (!p.tracked()) continue;
        for (real g : p.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const real norm = static_cast<real>(std::sqrt(sq));
    if (max_norm <= real(0) || norm <= max_norm) return norm;
    const real s = max_norm / norm;
    for (Tensor& p : params) {
        if (!p.tracked()) continue;
        for (real& g : p.grad()) g *= s;
    }
    return norm;
}

real lr_schedule(int epoch, real base_lr, int warmup, const std::vector<int>& decay_points,
                 real factor) {
    real lr = base_lr;
    if (warmup > 0 && epoch < warmup) {
        lr = base_lr * static_cast<real>(epoch + 1) / static_cast<real>(warmup);
    }
    for (int p : decay_points) {
        if (epoch >= p) lr *= factor;
    }
    return lr;
}

}  // namespace tapir
