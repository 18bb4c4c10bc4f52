#include "tapir/memory.hpp"

#include <stdexcept>

namespace tapir {

void CacheSet::push_h(int time, Tensor h) {
    if (static_cast<int>(h_.size()) == capacity_) h_.pop_front();
    h_.push_back({time, std::move(h)});
}

void CacheSet::push_zp(int time, Tensor z, Tensor phi) {
    if (static_cast<int>(z_.size()) == capacity_ && static_cast<int>(phi_.size()) == capacity_) {
        z_.pop_front();
        phi_.pop_front();
    }
    z_.push_back({time, std::move(z)});
    phi_.push_back({time, std::move(phi)});
}

void CacheSet::push(int time, Tensor h, Tensor z, Tensor phi) {
    push_h(time, std::move(h));
    push_zp(time, std::move(z), std::move(phi));
}

void CacheSet::rebuild_zp(const std::vector<std::pair<int, Tensor>>& logit_rows,
                          const CacheProjections& proj) {
    z_.clear();
    phi_.clear();
    for (const auto& [time, logits] : logit_rows) {
        Tensor z = proj.project_z(logits);
        Tensor phi = proj.fuse_phi(h_at_time(time), z);
        z_.push_back({time, z});
        phi_.push_back({time, std::move(phi)});
    }
    if (static_cast<int>(z_.size()) > capacity_) {
        throw std::logic_error("cache rebuild exceeds capacity");
    }
}

const Tensor& CacheSet::h_at_time(int time) const {
    for (const auto& slot : h_) {
        if (slot.time == time) return slot.value;
    }
    throw std::logic_error("hidden state for requested step is no longer cached");
}

std::vector<Tensor> CacheSet::phi_slots() const {
    std::vector<Tensor> out;
    out.reserve(phi_.size());
    for (const auto& s : phi_) out.push_back(s.value);
    return out;
}

std::vector<int> CacheSet::phi_times() const {
    std::vector<int> out;
    out.reserve(phi_.size());
    for (const auto& s : phi_) out.push_back(s.time);
    return out;
}

void CacheSet::check_aligned() const {
    if (z_.size() != phi_.size()) throw std::logic_error("cache z/phi length mismatch");
    if (h_.size() < z_.size()) throw std::logic_error("cache h shorter than z/phi");
    if (static_cast<int>(h_.size()) > capacity_ || static_cast<int>(z_.size()) > capacity_) {
        throw std::logic_error("cache over capacity");
    }
    for (std::size_t i = 0; i < z_.size(); ++i) {
        if (z_[i].time != phi_[i].time) throw std::logic_error("cache slot times misaligned");
    }
    // slot times are contiguous and end at the newest step
    for (std::size_t i = 1; i < z_.size(); ++i) {
        if (z_[i].time != z_[i - 1].time + 1) throw std::logic_error("cache slot times not contiguous");
    }
}

}  // namespace tapir
