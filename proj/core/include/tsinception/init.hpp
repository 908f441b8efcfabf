#pragma once

#include <cmath>

#include "tsinception/rng.hpp"
#include "tsinception/tensor.hpp"

namespace tsinception {

// glorot/xavier uniform: values drawn from U(-L, L), L = sqrt(6/(fan_in+fan_out)).
// conv weights [F,M,k] use fan_in = M*k, fan_out = F*k; dense [C,M] uses
// fan_in = M, fan_out = C. values are drawn in flat index order so a fixed
// seed reproduces the tensor bit-for-bit.
template <typename S>
void glorot_uniform(Tensor<S>& w, int fan_in, int fan_out, Rng& rng) {
  check(fan_in > 0 && fan_out > 0, "glorot: fans must be positive, got ", fan_in, "/", fan_out);
  const double limit = std::sqrt(6.0 / (static_cast<double>(fan_in) + fan_out));
  for (auto& v : w.data) v = static_cast<S>(rng.uniform(-limit, limit));
}

}  // namespace tsinception
