#pragma once

#include <string>
#include <vector>

#include "tsinception/config.hpp"
#include "tsinception/ops.hpp"
#include "tsinception/rng.hpp"

namespace tsinception {

// view of one learnable tensor and its gradient accumulator. running
// normalization statistics are exposed with grad == nullptr.
template <typename S>
struct ParamRef {
  std::string name;
  Tensor<S>* value;
  Tensor<S>* grad;
};

template <typename S>
struct ConvBlock {
  Tensor<S> w, b, d_w, d_b;  // w [filters, channels, k], b [filters]

  void init(int filters, int channels, int k, Rng& rng);
  int filters() const { return w.dim(0); }
  int kernel() const { return w.dim(2); }
};

template <typename S>
struct BatchNormBlock {
  BatchNormState<S> state;
  Tensor<S> d_gamma, d_beta;

  explicit BatchNormBlock(int channels = 1)
      : state(channels), d_gamma({channels}), d_beta({channels}) {}
};

template <typename S>
struct InceptionModule {
  int in_channels = 0, out_channels = 0;
  bool has_bottleneck = false;
  ConvBlock<S> bottleneck;             // k=1 on the module input
  std::vector<ConvBlock<S>> branches;  // one per filter length, fed by the bottleneck output
  bool has_maxpool = false;
  int maxpool_window = 3;
  ConvBlock<S> maxpool_proj;  // k=1 on the pooled module input
  BatchNormBlock<S> norm;     // over the concatenated channels
};

// adds the input of module `from` (projected to matching channels) to the
// output of module `to`, then relu.
template <typename S>
struct ShortcutBlock {
  int from = 0, to = 0;
  ConvBlock<S> proj;  // k=1
  BatchNormBlock<S> norm;
};

// activation record written by a train-mode forward and consumed by backward.
// indexed [module][sample] / [shortcut][sample].
template <typename S>
struct ForwardStash {
  int batch = 0;
  std::vector<const Tensor<S>*> inputs;  // borrowed

  std::vector<std::vector<Tensor<S>>> bneck;   // bottleneck outputs (unused slots stay empty)
  std::vector<std::vector<Tensor<S>>> pooled;  // maxpool outputs, pre-projection
  std::vector<std::vector<Tensor<S>>> concat;  // pre-normalization concatenation
  std::vector<std::vector<Tensor<S>>> out;     // post-relu module outputs, pre-merge
  std::vector<BatchNormStash> norm_stash;

  std::vector<std::vector<Tensor<S>>> sc_proj;  // shortcut projections, pre-normalization
  std::vector<std::vector<Tensor<S>>> merged;   // relu(module output + normalized projection)
  std::vector<BatchNormStash> sc_norm_stash;

  std::vector<Tensor<S>> gap;  // pooled features per sample
};

template <typename S>
struct Network {
  NetworkConfig config;
  std::vector<InceptionModule<S>> modules;
  std::vector<ShortcutBlock<S>> shortcuts;
  Tensor<S> head_w, head_b, d_head_w, d_head_b;  // dense [C, out_channels]

  // learnable tensors in a fixed structural order (running stats excluded)
  std::vector<ParamRef<S>> params();
  // learnables plus running statistics, the full persisted state
  std::vector<ParamRef<S>> state_tensors();
  void zero_grad();

  int output_channels() const;  // channels entering the head
  // index of the shortcut ending at module j, or -1
  int shortcut_at(int j) const;

  // batched forward to logits. train mode uses batch normalization statistics
  // and updates the running ones; infer mode reads the running statistics.
  // stash may be null when no backward pass will follow.
  void forward_logits(const std::vector<const Tensor<S>*>& inputs, Mode mode,
                      ForwardStash<S>* stash, std::vector<Tensor<S>>& logits);

  // infer-style forward to per-sample probability vectors
  void forward(const std::vector<const Tensor<S>*>& inputs, Mode mode,
               std::vector<Tensor<S>>& probs);

  // accumulates parameter gradients from per-sample logit gradients; the
  // stash must come from a train-mode forward over the same inputs.
  // d_inputs, when given, receives the gradient w.r.t. each input series.
  void backward(const ForwardStash<S>& stash, const std::vector<Tensor<S>>& d_logits,
                std::vector<Tensor<S>>* d_inputs = nullptr);
};

template <typename S>
Network<S> build_network(const NetworkConfig& config, Rng& rng);

// receptive field of a stride-1 chain: 1 + sum(k_i - 1); empty chain -> 1
int receptive_field(const std::vector<int>& filter_lengths);
// network convention: each module contributes its maximum filter length
int receptive_field(const NetworkConfig& config);

struct ParamCount {
  std::string name;
  long long count;
};

// learnable scalars (running statistics excluded); breakdown rows are per
// tensor in structural order
template <typename S>
long long parameter_count(Network<S>& net, std::vector<ParamCount>* breakdown = nullptr);

}  // namespace tsinception
