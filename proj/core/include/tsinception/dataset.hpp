#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsinception/rng.hpp"
#include "tsinception/tensor.hpp"

namespace tsinception {

template <typename S>
struct LabeledSeries {
  Tensor<S> values;  // [channels, length]
  int label = 0;     // class index in [1, num_classes]
};

// immutable after construction; safe for unrestricted shared reads
template <typename S>
struct Dataset {
  std::vector<LabeledSeries<S>> train;
  std::vector<LabeledSeries<S>> test;
  int num_classes = 0;
  int channels = 0;
  int length = 0;
  std::string name;
  std::string provenance;
  // original file label for class c sits at index c-1; identity for
  // generated data
  std::vector<double> label_mapping;
};

// per channel: (x - mean) / population std; a constant channel maps to zeros
template <typename S>
Tensor<S> z_normalize(const Tensor<S>& series);

// text rows are "label <sep> v1 <sep> ... <sep> vT" with tab or comma
// separators (auto-detected per file); labels are remapped to [1, C] by
// sorted order of the distinct training labels, and every series is
// z-normalized unless normalize is false
template <typename S>
Dataset<S> load_ucr(const std::string& train_path, const std::string& test_path,
                    bool normalize = true);

// writes both splits in the same text format, labels restored through the
// recorded mapping; values print in shortest round-trip form, so a reload
// with normalize=false reproduces the dataset exactly
template <typename S>
void save_ucr(const Dataset<S>& ds, const std::string& train_path,
              const std::string& test_path);

struct SyntheticSpec {
  int length = 256;
  int num_classes = 2;
  int train_per_class = 64;
  int test_per_class = 512;
  double noise_low = 0.0;
  double noise_high = 0.1;
  double amplitude = 1.0;
  std::vector<int> pattern_starts;  // empty: start_c = (c-1)*length/num_classes
  std::uint64_t seed = 0;

  // pattern covers one tenth of the series
  int pattern_length() const { return length / 10; }
};

// each series is uniform noise with the class's window overwritten by the
// amplitude; raw values are emitted (normalization happens at load/training
// time) so the window location — and hence the label — stays recoverable
template <typename S>
Dataset<S> generate_synthetic(const SyntheticSpec& spec);

// index batches covering [0, n) exactly once; pass a generator to shuffle
std::vector<std::vector<int>> batch_iterator(int n, int batch_size, Rng* shuffle = nullptr);

}  // namespace tsinception
