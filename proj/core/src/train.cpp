#include "tsinception/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "tsinception/adam.hpp"
#include "tsinception/error.hpp"
#include "tsinception/ops.hpp"

namespace tsinception {

double reduce_lr_on_plateau(const TrainHistory& history, PlateauState& state, double factor,
                            int patience, double min_lr) {
  check(factor > 0.0 && factor < 1.0, "training: plateau factor must be in (0,1), got ",
        factor);
  check(patience >= 1, "training: plateau patience must be positive, got ", patience);
  if (history.epochs.empty()) return state.lr;
  const double loss = history.epochs.back().loss;
  if (loss < state.best - 1e-4) {
    state.best = loss;
    state.stale = 0;
  } else {
    ++state.stale;
    if (state.stale >= patience) {
      state.lr = std::max(state.lr * factor, min_lr);
      state.stale = 0;
    }
  }
  return state.lr;
}

template <typename S>
int argmax_class(const Tensor<S>& scores) {
  check(scores.rank() == 1 && scores.dim(0) >= 1,
        "training: class scores must be a non-empty vector, got ", shape_str(scores.shape));
  int best = 0;
  for (int c = 1; c < scores.dim(0); ++c)
    if (scores.data[c] > scores.data[best]) best = c;
  return best + 1;
}

namespace {

template <typename S>
struct AdamSlot {
  Tensor<S>* value;
  Tensor<S>* grad;
  Tensor<S> m, v;
};

template <typename S>
std::vector<AdamSlot<S>> make_slots(Network<S>& net) {
  std::vector<AdamSlot<S>> slots;
  for (auto& p : net.params()) {
    AdamSlot<S> s;
    s.value = p.value;
    s.grad = p.grad;
    s.m = Tensor<S>(p.value->shape);
    s.v = Tensor<S>(p.value->shape);
    slots.push_back(std::move(s));
  }
  return slots;
}

}  // namespace

template <typename S>
TrainHistory train(Network<S>& net, const Dataset<S>& dataset, const TrainConfig& cfg) {
  check(cfg.epochs >= 1, "training: epochs must be positive, got ", cfg.epochs);
  check(cfg.batch_size >= 1, "training: batch size must be positive, got ", cfg.batch_size);
  check(cfg.learning_rate >= 0.0, "training: learning rate must be non-negative");
  check(!dataset.train.empty(), "training: the training split is empty");
  check(dataset.channels == net.config.input_channels, "training: dataset has ",
        dataset.channels, " channels, the network expects ", net.config.input_channels);
  check(dataset.num_classes == net.config.num_classes, "training: dataset has ",
        dataset.num_classes, " classes, the network expects ", net.config.num_classes);
  for (const auto& row : dataset.train)
    check(row.label >= 1 && row.label <= dataset.num_classes, "training: label ",
          row.label, " is outside [1, ", dataset.num_classes, "]");

  const int n = static_cast<int>(dataset.train.size());
  auto slots = make_slots(net);
  auto state = net.state_tensors();
  std::vector<std::vector<S>> best_values;

  Rng shuffle_rng(cfg.seed);
  AdamConfig adam;
  PlateauState plateau{cfg.learning_rate};
  TrainHistory history;
  std::int64_t step = 0;
  double lr = cfg.learning_rate;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const auto batches = batch_iterator(n, cfg.batch_size, cfg.shuffle ? &shuffle_rng : nullptr);
    double loss_sum = 0.0;
    int correct = 0;

    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      const int bn = static_cast<int>(batch.size());
      std::vector<const Tensor<S>*> inputs;
      for (int idx : batch) inputs.push_back(&dataset.train[idx].values);

      ForwardStash<S> stash;
      std::vector<Tensor<S>> logits;
      net.forward_logits(inputs, Mode::train, &stash, logits);

      double batch_loss = 0.0;
      std::vector<Tensor<S>> d_logits(bn);
      for (int i = 0; i < bn; ++i) {
        const int label = dataset.train[batch[i]].label;
        batch_loss += softmax_cross_entropy<S>(logits[i], label, nullptr, &d_logits[i]);
        if (argmax_class(logits[i]) == label) ++correct;
        // mean reduction over the batch
        for (auto& g : d_logits[i].data) g = static_cast<S>(g / bn);
      }
      batch_loss /= bn;
      check(std::isfinite(batch_loss), "training: loss became non-finite at epoch ", epoch,
            ", batch ", b + 1, "; lower the learning rate");
      loss_sum += batch_loss * bn;

      net.zero_grad();
      net.backward(stash, d_logits);
      ++step;
      for (auto& s : slots) adam_step(*s.value, *s.grad, s.m, s.v, step, adam, lr);
    }

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    EpochStats stats;
    stats.loss = loss_sum / n;
    stats.accuracy = static_cast<double>(correct) / n;
    stats.learning_rate = lr;
    stats.seconds = seconds;
    history.epochs.push_back(stats);

    if (stats.loss < history.best_loss) {
      history.best_loss = stats.loss;
      history.best_epoch = epoch;
      if (cfg.checkpoint_best) {
        best_values.clear();
        for (auto& ref : state) best_values.push_back(ref.value->data);
      }
    }
    lr = reduce_lr_on_plateau(history, plateau, cfg.plateau_factor, cfg.plateau_patience,
                              cfg.min_learning_rate);
  }

  if (cfg.checkpoint_best && !best_values.empty())
    for (std::size_t i = 0; i < state.size(); ++i) state[i].value->data = best_values[i];
  return history;
}

template <typename S>
double evaluate(Network<S>& net, const std::vector<LabeledSeries<S>>& split, int chunk) {
  check(!split.empty(), "training: cannot evaluate an empty split");
  check(chunk >= 1, "training: evaluation chunk must be positive, got ", chunk);
  int correct = 0;
  for (std::size_t at = 0; at < split.size(); at += chunk) {
    const std::size_t hi = std::min(split.size(), at + chunk);
    std::vector<const Tensor<S>*> inputs;
    for (std::size_t i = at; i < hi; ++i) inputs.push_back(&split[i].values);
    std::vector<Tensor<S>> probs;
    net.forward(inputs, Mode::infer, probs);
    for (std::size_t i = at; i < hi; ++i)
      if (argmax_class(probs[i - at]) == split[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

void save_history_csv(const TrainHistory& history, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  check(out.good(), "training: cannot write \"", path, "\"");
  out << "epoch,loss,accuracy,lr,seconds\n";
  out.precision(17);
  for (std::size_t e = 0; e < history.epochs.size(); ++e) {
    const auto& s = history.epochs[e];
    out << e + 1 << ',' << s.loss << ',' << s.accuracy << ',' << s.learning_rate << ','
        << s.seconds << '\n';
  }
  check(out.good(), "training: write to \"", path, "\" failed");
}

#define TSINCEPTION_INSTANTIATE_TRAIN(S)                                          \
  template int argmax_class<S>(const Tensor<S>&);                                 \
  template TrainHistory train<S>(Network<S>&, const Dataset<S>&, const TrainConfig&); \
  template double evaluate<S>(Network<S>&, const std::vector<LabeledSeries<S>>&, int);

TSINCEPTION_INSTANTIATE_TRAIN(float)
TSINCEPTION_INSTANTIATE_TRAIN(double)

}  // namespace tsinception
