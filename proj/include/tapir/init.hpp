#pragma once

#include <cmath>
#include <vector>

#include "tapir/common.hpp"
#include "tapir/tensor.hpp"

namespace tapir {

// Xavier/Glorot uniform: U[-a, a] with a = sqrt(6 / (fan_in + fan_out)).
// For matrices [out,in] the fans are the two extents; vectors use n for both.
inline Tensor xavier_init(const std::vector<int>& shape, Rng& rng, bool requires_grad = true) {
    const std::size_t n = shape_numel(shape);
    double fan_in, fan_out;
    if (shape.size() >= 2) {
        fan_out = static_cast<double>(shape[0]);
        fan_in = static_cast<double>(n) / fan_out;
    } else {
        fan_in = fan_out = static_cast<double>(shape[0]);
    }
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<real> data(n);
    for (auto& v : data) v = static_cast<real>(rng.uniform(-a, a));
    return Tensor::from(std::move(data), shape, requires_grad);
}

}  // namespace tapir
