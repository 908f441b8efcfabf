#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "tsinception/error.hpp"

namespace tsinception {

// dense row-major tensor of rank 1..3.
// series are [channels, length]; conv weights are [filters, channels, k].
template <typename S>
struct Tensor {
  std::vector<int> shape;
  std::vector<S> data;

  Tensor() = default;

  explicit Tensor(std::vector<int> sh) : shape(std::move(sh)) {
    data.assign(checked_size(shape), S(0));
  }

  Tensor(std::vector<int> sh, std::vector<S> values) : shape(std::move(sh)), data(std::move(values)) {
    check(checked_size(shape) == data.size(), "tensor: shape wants ", checked_size(shape),
          " values, got ", data.size());
  }

  static std::size_t checked_size(const std::vector<int>& sh) {
    check(!sh.empty() && sh.size() <= 3, "tensor: rank must be 1..3, got ", sh.size());
    std::size_t n = 1;
    for (std::size_t i = 0; i < sh.size(); ++i) {
      check(sh[i] > 0, "tensor: dimension ", i, " must be positive, got ", sh[i]);
      n *= static_cast<std::size_t>(sh[i]);
    }
    return n;
  }

  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return data.size(); }

  S& operator()(int i) { return data[static_cast<std::size_t>(i)]; }
  const S& operator()(int i) const { return data[static_cast<std::size_t>(i)]; }

  S& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  const S& operator()(int i, int j) const {
    return data[static_cast<std::size_t>(i) * shape[1] + j];
  }

  S& operator()(int i, int j, int k) {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  const S& operator()(int i, int j, int k) const {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }

  // contiguous row of a rank-2 tensor
  S* row(int i) { return data.data() + static_cast<std::size_t>(i) * shape[1]; }
  const S* row(int i) const { return data.data() + static_cast<std::size_t>(i) * shape[1]; }

  void zero() { std::fill(data.begin(), data.end(), S(0)); }
  void fill(S v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

inline std::string shape_str(const std::vector<int>& sh) {
  std::string s = "[";
  for (std::size_t i = 0; i < sh.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(sh[i]);
  }
  return s + "]";
}

}  // namespace tsinception
