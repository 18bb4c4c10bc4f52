#pragma once

#include <vector>

#include "tapir/common.hpp"
#include "tapir/tensor.hpp"

namespace tapir {

struct AdamWConfig {
    real lr = real(1e-4);
    real beta1 = real(0.9);
    real beta2 = real(0.98);
    real eps = real(1e-8);
    real weight_decay = real(0.01);
};

// AdamW with decoupled weight decay: the decay multiplies the parameter
// directly and never enters the moment estimates.
class AdamW {
  public:
    AdamW(std::vector<Tensor> params, AdamWConfig cfg);

    // Applies one update from the gradients currently held by the parameters.
    // `lr_override` < 0 keeps the configured rate.
    void step(real lr_override = real(-1));

    void zero_grad();
    long step_count() const { return step_; }
    const AdamWConfig& config() const { return cfg_; }

  private:
    std::vector<Tensor> params_;
    std::vector<std::vector<real>> m_;
    std::vector<std::vector<real>> v_;
    AdamWConfig cfg_;
    long step_ = 0;
};

// Scales all gradients by max_norm/norm when the global L2 norm exceeds
// max_norm. max_norm <= 0 disables clipping. Returns the pre-clip norm.
real clip_global_norm(std::vector<Tensor>& params, real max_norm);

// Linear warmup over the first `warmup` epochs, then multiplicative decay by
// `factor` once `epoch >= point` for each decay point. Epochs are 0-indexed.
real lr_schedule(int epoch, real base_lr, int warmup = 5,
                 const std::vector<int>& decay_points = {30, 40, 45}, real factor = real(0.5));

}  // namespace tapir
