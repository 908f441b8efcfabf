#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tsinception/tensor.hpp"

namespace tsinception {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// one bias-corrected adam update on a single tensor. t is the 1-based step
// count AFTER this update (pass t=1 for the first step). m and v must have
// the value's shape and start at zero.
template <typename S>
void adam_step(Tensor<S>& value, const Tensor<S>& grad, Tensor<S>& m, Tensor<S>& v,
               std::int64_t t, const AdamConfig& cfg, double lr) {
  check(value.same_shape(grad) && value.same_shape(m) && value.same_shape(v),
        "adam: value/grad/m/v shapes must match");
  check(t >= 1, "adam: step count must be >= 1, got ", t);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < value.data.size(); ++i) {
    const double g = static_cast<double>(grad.data[i]);
    const double mi = cfg.beta1 * static_cast<double>(m.data[i]) + (1.0 - cfg.beta1) * g;
    const double vi = cfg.beta2 * static_cast<double>(v.data[i]) + (1.0 - cfg.beta2) * g * g;
    m.data[i] = static_cast<S>(mi);
    v.data[i] = static_cast<S>(vi);
    const double m_hat = mi / c1;
    const double v_hat = vi / c2;
    value.data[i] -= static_cast<S>(lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
  }
}

}  // namespace tsinception
