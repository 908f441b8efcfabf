#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsinception/dataset.hpp"
#include "tsinception/network.hpp"
#include "tsinception/train.hpp"

namespace tsinception {

// identically configured networks differing only in seed; the ensemble output
// is the arithmetic mean of the members' probability vectors
template <typename S>
struct EnsembleModel {
  NetworkConfig config;
  std::vector<Network<S>> members;
  std::vector<std::uint64_t> seeds;
  std::uint64_t base_seed = 0;
};

// member j (0-based) initializes and shuffles with seed base_seed + j;
// members train one after another and training errors carry the member index
template <typename S>
EnsembleModel<S> train_ensemble(const Dataset<S>& dataset, const NetworkConfig& config,
                                int n, std::uint64_t base_seed, const TrainConfig& tcfg,
                                std::vector<TrainHistory>* histories = nullptr);

// mean of the members' class probabilities, accumulated in double in member
// order
template <typename S>
Tensor<S> ensemble_predict(EnsembleModel<S>& model, const Tensor<S>& x);

template <typename S>
void ensemble_predict_batch(EnsembleModel<S>& model, const std::vector<const Tensor<S>*>& xs,
                            std::vector<Tensor<S>>& probs);

template <typename S>
double ensemble_evaluate(EnsembleModel<S>& model, const std::vector<LabeledSeries<S>>& split,
                         int chunk = 128);

struct EnsembleSizeRow {
  int size = 0;
  double accuracy = 0.0;
};

// accuracy per requested size, where the size-x ensemble reuses the first x
// members of the pool
template <typename S>
std::vector<EnsembleSizeRow> ensemble_size_sweep(EnsembleModel<S>& pool,
                                                 const std::vector<LabeledSeries<S>>& split,
                                                 const std::vector<int>& sizes,
                                                 int chunk = 128);

// directory layout: manifest.json (member count, seeds, config and its crc)
// plus one checkpoint file per member
template <typename S>
void save_ensemble(EnsembleModel<S>& model, const std::string& dir);

template <typename S>
EnsembleModel<S> load_ensemble(const std::string& dir);

}  // namespace tsinception
