#pragma once

#include <string>
#include <vector>

#include "tapir/checkpoint.hpp"
#include "tapir/common.hpp"
#include "tapir/tensor.hpp"

namespace tapir {

// Cache entry projections: z represents the output, phi fuses input and
// output. Both live in (-1,1) and share the hidden dimension of h.
//   z   = tanh(W_y * y_logits + b_z)
//   phi = tanh(W_in * h + W_out * z + b_phi)
class CacheProjections {
  public:
    CacheProjections() = default;
    CacheProjections(int hidden, int n_labels, Rng& rng);

    Tensor project_z(const Tensor& logits) const;
    Tensor fuse_phi(const Tensor& h, const Tensor& z) const;

    int hidden() const { return w_in_.dim(0); }

    void collect_params(std::vector<NamedTensor>& out, const std::string& prefix) const;
    static CacheProjections from_checkpoint(const LoadedCheckpoint& ck, const std::string& prefix);

  private:
    Tensor w_y_;    // [H, L]
    Tensor b_z_;    // [H]
    Tensor w_in_;   // [H, H]
    Tensor w_out_;  // [H, H]
    Tensor b_phi_;  // [H]
};

enum class Action : char { Write = 'W', Revise = 'R' };

// Revision policy: score = sigma(theta^T k_t + b). The score is clamped to
// the open interval (0,1) (same epsilon as the BCE loss), which also makes
// tau = 1 mean "never revise" exactly.
class PolicyHead {
  public:
    PolicyHead() = default;
    PolicyHead(int ctrl_hidden, Rng& rng);

    Tensor score(const Tensor& k_t) const;

    void collect_params(std::vector<NamedTensor>& out, const std::string& prefix) const;
    static PolicyHead from_checkpoint(const LoadedCheckpoint& ck, const std::string& prefix);

  private:
    Tensor theta_;  // [Hc]
    Tensor bias_;   // [1]
};

inline Action decide_action(double score, double tau) {
    return score >= tau ? Action::Revise : Action::Write;
}

}  // namespace tapir
