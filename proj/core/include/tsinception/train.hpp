#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "tsinception/dataset.hpp"
#include "tsinception/network.hpp"

namespace tsinception {

struct TrainConfig {
  int epochs = 1500;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double plateau_factor = 0.5;
  int plateau_patience = 50;
  double min_learning_rate = 1e-4;
  std::uint64_t seed = 0;
  bool shuffle = true;
  // keep the parameters from the lowest-training-loss epoch rather than the
  // final epoch
  bool checkpoint_best = true;
};

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;  // 1-based; 0 until the first epoch completes
  double best_loss = std::numeric_limits<double>::infinity();
};

struct PlateauState {
  double lr = 0.0;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
};

// if the latest training loss has not improved on the best by more than 1e-4
// for `patience` consecutive epochs, multiply the rate by `factor` (floored
// at min_lr) and restart the count; a new best also restarts it
double reduce_lr_on_plateau(const TrainHistory& history, PlateauState& state, double factor,
                            int patience, double min_lr);

// mini-batch loop: shuffled batches, mean softmax cross-entropy, backprop,
// one adam update per batch; the learning rate follows the plateau schedule
// between epochs; non-finite loss aborts naming the epoch and batch
template <typename S>
TrainHistory train(Network<S>& net, const Dataset<S>& dataset, const TrainConfig& cfg);

// 1-based class with the largest score; ties go to the lowest class index
template <typename S>
int argmax_class(const Tensor<S>& scores);

// fraction of series whose predicted class matches the label; forward passes
// run in chunks to bound memory
template <typename S>
double evaluate(Network<S>& net, const std::vector<LabeledSeries<S>>& split,
                int chunk = 128);

// columns: epoch, loss, accuracy, lr, seconds
void save_history_csv(const TrainHistory& history, const std::string& path);

}  // namespace tsinception
