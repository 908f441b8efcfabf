#pragma once

// shared helpers for the test suites: independent reference implementations
// (kept deliberately naive and separate from the library kernels), finite
// difference harness glue, and small utilities.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "tsinception/rng.hpp"
#include "tsinception/tensor.hpp"

namespace testsup {

using tsinception::Rng;
using tsinception::Tensor;

// --- independent reference kernels (oracles) ---------------------------------

// conv via an explicitly materialized zero-padded copy; quadruple loop.
// same padding: floor((k-1)/2) zeros left, ceil((k-1)/2) zeros right.
inline Tensor<double> ref_conv1d(const Tensor<double>& in, const Tensor<double>& w,
                                 const Tensor<double>& b, bool same, int stride) {
  const int M = in.dim(0), T = in.dim(1);
  const int F = w.dim(0), k = w.dim(2);
  const int pad_l = same ? (k - 1) / 2 : 0;
  const int pad_r = same ? k - 1 - pad_l : 0;
  const int Tp = T + pad_l + pad_r;
  std::vector<std::vector<double>> padded(M, std::vector<double>(Tp, 0.0));
  for (int c = 0; c < M; ++c)
    for (int t = 0; t < T; ++t) padded[c][pad_l + t] = in(c, t);
  const int To = (Tp - k) / stride + 1;
  Tensor<double> out({F, To});
  for (int f = 0; f < F; ++f)
    for (int t = 0; t < To; ++t) {
      double acc = b(f);
      for (int c = 0; c < M; ++c)
        for (int j = 0; j < k; ++j) acc += padded[c][t * stride + j] * w(f, c, j);
      out(f, t) = acc;
    }
  return out;
}

// max pooling with windows leaning left for even sizes; padding is never a
// candidate (windows are clipped to valid positions).
inline Tensor<double> ref_maxpool1d(const Tensor<double>& in, int window) {
  const int M = in.dim(0), T = in.dim(1);
  const int reach_l = window / 2;           // ceil((w-1)/2)
  const int reach_r = (window - 1) / 2;     // floor((w-1)/2)
  Tensor<double> out({M, T});
  for (int c = 0; c < M; ++c)
    for (int t = 0; t < T; ++t) {
      const int lo = std::max(0, t - reach_l);
      const int hi = std::min(T - 1, t + reach_r);
      double best = in(c, lo);
      for (int s = lo + 1; s <= hi; ++s) best = std::max(best, in(c, s));
      out(c, t) = best;
    }
  return out;
}

// compensated (kahan) mean, used as the independent aggregation oracle
inline double kahan_mean(const std::vector<double>& xs) {
  double sum = 0.0, comp = 0.0;
  for (double x : xs) {
    const double y = x - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum / static_cast<double>(xs.size());
}

// --- finite-difference harness ------------------------------------------------

// |a - b| <= tol * max(1, |a|, |b|)
inline bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]) / std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, d);
  }
  return worst;
}

inline Tensor<double> random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0,
                                    double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

inline std::vector<double> flatten(const std::vector<const Tensor<double>*>& ts) {
  std::vector<double> out;
  for (const auto* t : ts) out.insert(out.end(), t->data.begin(), t->data.end());
  return out;
}

inline void unflatten(const std::vector<double>& flat, std::vector<Tensor<double>*> ts) {
  std::size_t pos = 0;
  for (auto* t : ts) {
    std::copy(flat.begin() + pos, flat.begin() + pos + t->data.size(), t->data.begin());
    pos += t->data.size();
  }
}

// --- filesystem helpers ---------------------------------------------------------

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("tsinception_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

}  // namespace testsup
