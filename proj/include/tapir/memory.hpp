#pragma once

#include <deque>
#include <utility>
#include <vector>

#include "tapir/common.hpp"
#include "tapir/projections.hpp"
#include "tapir/tensor.hpp"

namespace tapir {

struct TimedSlot {
    int time;  // absolute step index, 1-based
    Tensor value;
};

// The three fixed-capacity caches over h, z and phi with synchronized slot
// ages and FIFO eviction. The h cache is pushed unconditionally each step
// before the action branch, so within a step it may run one ahead of z/phi;
// at step boundaries all three have equal length.
class CacheSet {
  public:
    explicit CacheSet(int capacity) : capacity_(capacity) {}

    int capacity() const { return capacity_; }
    int h_size() const { return static_cast<int>(h_.size()); }
    int zp_size() const { return static_cast<int>(z_.size()); }

    void push_h(int time, Tensor h);
    void push_zp(int time, Tensor z, Tensor phi);

    // Convenience composite used when all three values belong to one step.
    void push(int time, Tensor h, Tensor z, Tensor phi);

    // Clears z/phi and recomputes them from (time, logits) pairs joined with
    // the stored h of the same step; the h cache is untouched.
    void rebuild_zp(const std::vector<std::pair<int, Tensor>>& logit_rows,
                    const CacheProjections& proj);

    const Tensor& h_at_time(int time) const;       // throws if evicted
    const Tensor& z_by_slot(int slot) const { return z_[static_cast<std::size_t>(slot)].value; }
    const Tensor& phi_by_slot(int slot) const { return phi_[static_cast<std::size_t>(slot)].value; }
    int zp_time(int slot) const { return z_[static_cast<std::size_t>(slot)].time; }
    int h_time(int slot) const { return h_[static_cast<std::size_t>(slot)].time; }

    std::vector<Tensor> phi_slots() const;  // oldest first
    std::vector<int> phi_times() const;

    // Alignment invariant: |h| >= |z| = |phi|, matching times, length <= N.
    void check_aligned() const;

  private:
    int capacity_;
    std::deque<TimedSlot> h_, z_, phi_;
};

}  // namespace tapir
