#pragma once

#include <functional>
#include <vector>

namespace tsinception {

// central-difference gradient of a scalar function, (f(x+h) - f(x-h)) / 2h
// per coordinate. double precision only: the default h = 1e-5 is meaningless
// in 32-bit arithmetic. used as the independent oracle for every analytic
// backward pass.
inline std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
    double h = 1e-5) {
  std::vector<double> g(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace tsinception
