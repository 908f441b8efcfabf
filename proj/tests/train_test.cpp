#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "support/test_support.hpp"
#include "tsinception/parallel.hpp"
#include "tsinception/train.hpp"

using namespace tsinception;
using testsup::TempDir;
using testsup::slurp;

namespace {

NetworkConfig tiny_net(int classes = 2) {
  NetworkConfig c;
  c.depth = 2;
  c.num_classes = classes;
  c.module.filter_lengths = {3, 5};
  c.module.filters_per_branch = 2;
  c.module.bottleneck_size = 2;
  return c;
}

template <typename S>
Dataset<S> tiny_data(int classes = 2, int train_per_class = 4, int length = 40,
                     std::uint64_t seed = 0) {
  SyntheticSpec spec;
  spec.length = length;
  spec.num_classes = classes;
  spec.train_per_class = train_per_class;
  spec.test_per_class = 4;
  spec.seed = seed;
  return generate_synthetic<S>(spec);
}

template <typename S>
std::vector<S> flat_state(Network<S>& net) {
  std::vector<S> out;
  for (auto& ref : net.state_tensors())
    out.insert(out.end(), ref.value->data.begin(), ref.value->data.end());
  return out;
}

TrainHistory history_of(const std::vector<double>& losses) {
  TrainHistory h;
  for (double l : losses) {
    EpochStats s;
    s.loss = l;
    h.epochs.push_back(s);
  }
  return h;
}

}  // namespace

// ---------------------------------------------------------------- schedule

TEST_CASE("plateau: improving loss never reduces the rate") {
  PlateauState st{1e-3};
  TrainHistory h;
  for (int e = 0; e < 10; ++e) {
    h.epochs.push_back({1.0 - 0.1 * e, 0, 0, 0});
    CHECK(reduce_lr_on_plateau(h, st, 0.5, 3, 1e-4) == 1e-3);
  }
}

TEST_CASE("plateau: flat loss for patience+1 epochs halves the rate once") {
  PlateauState st{1e-3};
  TrainHistory h;
  // first epoch sets the best; the next `patience` identical losses trip the
  // reduction exactly once
  double lr = 0.0;
  for (int e = 0; e < 4; ++e) {
    h.epochs.push_back({0.5, 0, 0, 0});
    lr = reduce_lr_on_plateau(h, st, 0.5, 3, 1e-4);
  }
  CHECK(lr == 5e-4);
  // an improvement of exactly 1e-4 is not "more than 1e-4": still stale
  h.epochs.push_back({0.5 - 1e-4, 0, 0, 0});
  CHECK(reduce_lr_on_plateau(h, st, 0.5, 3, 1e-4) == 5e-4);
  // a real improvement resets the counter
  h.epochs.push_back({0.3, 0, 0, 0});
  CHECK(reduce_lr_on_plateau(h, st, 0.5, 3, 1e-4) == 5e-4);
  CHECK(st.stale == 0);
}

TEST_CASE("plateau: the rate never drops below the floor") {
  PlateauState st{2e-4};
  auto h = history_of({1.0});
  (void)reduce_lr_on_plateau(h, st, 0.5, 1, 1e-4);
  for (int e = 0; e < 5; ++e) {
    h.epochs.push_back({1.0, 0, 0, 0});
    const double lr = reduce_lr_on_plateau(h, st, 0.5, 1, 1e-4);
    CHECK(lr >= 1e-4);
  }
  CHECK(st.lr == 1e-4);
  CHECK_THROWS_AS((void)reduce_lr_on_plateau(h, st, 1.5, 3, 1e-4), Error);
  CHECK_THROWS_AS((void)reduce_lr_on_plateau(h, st, 0.5, 0, 1e-4), Error);
}

// ---------------------------------------------------------------- training loop

TEST_CASE("train: a zero learning rate leaves every parameter bit-identical") {
  auto ds = tiny_data<double>();
  Rng rng(1);
  auto net = build_network<double>(tiny_net(), rng);
  const auto params_before = [&] {
    std::vector<double> out;
    for (auto& p : net.params()) out.insert(out.end(), p.value->data.begin(), p.value->data.end());
    return out;
  }();
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.0;
  cfg.checkpoint_best = false;
  (void)train(net, ds, cfg);
  std::vector<double> after;
  for (auto& p : net.params()) after.insert(after.end(), p.value->data.begin(), p.value->data.end());
  CHECK(params_before == after);
}

TEST_CASE("train: the first-epoch entry records the plain forward loss") {
  auto ds = tiny_data<double>(2, 4, 40, 5);
  Rng r1(2), r2(2);
  auto net = build_network<double>(tiny_net(), r1);
  auto probe = build_network<double>(tiny_net(), r2);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 64;  // one batch: the recorded loss is the initial loss
  cfg.learning_rate = 0.0;
  const auto h = train(net, ds, cfg);

  std::vector<const Tensor<double>*> batch;
  for (auto& r : ds.train) batch.push_back(&r.values);
  std::vector<Tensor<double>> logits;
  probe.forward_logits(batch, Mode::train, nullptr, logits);
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    loss += softmax_cross_entropy<double>(logits[i], ds.train[i].label, nullptr, nullptr);
  loss /= static_cast<double>(logits.size());
  CHECK(h.epochs[0].loss == doctest::Approx(loss).epsilon(1e-12));
}

TEST_CASE("train: mean initialization loss sits near ln C on a balanced problem") {
  // the initialization loss is a random variable over weight draws; its mean
  // settles near ln C while individual draws can sit a few tenths away, so
  // average over several draws at the default width and depth
  for (int classes : {2, 3}) {
    double sum = 0.0;
    const int draws = 5;
    for (int d = 0; d < draws; ++d) {
      SyntheticSpec sp;
      sp.length = 256;
      sp.num_classes = classes;
      sp.train_per_class = 12;
      sp.test_per_class = 1;
      sp.seed = 5 + d;
      const auto ds = generate_synthetic<float>(sp);
      NetworkConfig nc;
      nc.num_classes = classes;
      Rng rng(40 + d);
      auto net = build_network<float>(nc, rng);
      std::vector<const Tensor<float>*> batch;
      for (auto& r : ds.train) batch.push_back(&r.values);
      std::vector<Tensor<float>> logits;
      net.forward_logits(batch, Mode::train, nullptr, logits);
      double loss = 0.0;
      for (std::size_t i = 0; i < logits.size(); ++i)
        loss += softmax_cross_entropy<float>(logits[i], ds.train[i].label, nullptr, nullptr);
      sum += loss / static_cast<double>(logits.size());
    }
    CHECK(std::abs(sum / draws - std::log(classes)) < 0.15);
  }
}

TEST_CASE("train: same seed gives an identical history and identical weights") {
  auto ds = tiny_data<float>();
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 3;
  cfg.seed = 9;
  Rng r1(3), r2(3);
  auto n1 = build_network<float>(tiny_net(), r1);
  auto n2 = build_network<float>(tiny_net(), r2);
  const auto h1 = train(n1, ds, cfg);
  const auto h2 = train(n2, ds, cfg);
  REQUIRE(h1.epochs.size() == h2.epochs.size());
  for (std::size_t e = 0; e < h1.epochs.size(); ++e) {
    CHECK(h1.epochs[e].loss == h2.epochs[e].loss);
    CHECK(h1.epochs[e].accuracy == h2.epochs[e].accuracy);
  }
  CHECK(flat_state(n1) == flat_state(n2));
}

TEST_CASE("train: histories are identical for any worker count") {
  auto ds = tiny_data<float>();
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 3;
  cfg.seed = 4;
  set_worker_count(1);
  Rng r1(6);
  auto n1 = build_network<float>(tiny_net(), r1);
  const auto h1 = train(n1, ds, cfg);
  set_worker_count(3);
  Rng r2(6);
  auto n2 = build_network<float>(tiny_net(), r2);
  const auto h2 = train(n2, ds, cfg);
  set_worker_count(1);
  for (std::size_t e = 0; e < h1.epochs.size(); ++e)
    CHECK(h1.epochs[e].loss == h2.epochs[e].loss);
  CHECK(flat_state(n1) == flat_state(n2));
}

TEST_CASE("train: the returned model is the lowest-loss epoch's snapshot") {
  auto ds = tiny_data<float>(2, 4, 40, 13);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.05;  // large enough to oscillate
  cfg.seed = 2;
  Rng r1(8);
  auto full = build_network<float>(tiny_net(), r1);
  const auto h = train(full, ds, cfg);
  REQUIRE(h.best_epoch >= 1);
  CHECK(h.best_loss <= h.epochs.back().loss);
  CHECK(h.epochs[h.best_epoch - 1].loss == h.best_loss);
  for (const auto& e : h.epochs) CHECK(e.loss >= h.best_loss);

  // replaying the run for best_epoch epochs reproduces the returned weights
  Rng r2(8);
  auto replay = build_network<float>(tiny_net(), r2);
  TrainConfig shorter = cfg;
  shorter.epochs = h.best_epoch;
  shorter.checkpoint_best = false;
  (void)train(replay, ds, shorter);
  CHECK(flat_state(full) == flat_state(replay));
}

TEST_CASE("train: loss drops below the initial epoch on the synthetic problem") {
  auto ds = tiny_data<float>(2, 8, 60, 17);
  TrainConfig cfg;
  cfg.epochs = 25;
  cfg.batch_size = 8;
  cfg.seed = 5;
  Rng rng(9);
  auto net = build_network<float>(tiny_net(), rng);
  const auto h = train(net, ds, cfg);
  CHECK(h.epochs.back().loss < h.epochs.front().loss);
  for (std::size_t e = 1; e < h.epochs.size(); ++e)
    CHECK(h.epochs[e].learning_rate <= h.epochs[e - 1].learning_rate);
  for (const auto& e : h.epochs) {
    CHECK(e.accuracy >= 0.0);
    CHECK(e.accuracy <= 1.0);
    CHECK(e.seconds >= 0.0);
  }
}

TEST_CASE("train: a non-finite loss aborts naming the epoch and batch") {
  auto ds = tiny_data<double>();
  Rng rng(10);
  auto net = build_network<double>(tiny_net(), rng);
  // a poisoned head bias reaches the logits directly (a poisoned input would
  // be laundered to zeros by the relu comparisons)
  net.head_b.data[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.shuffle = false;
  try {
    (void)train(net, ds, cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("batch 1") != std::string::npos);
  }
}

TEST_CASE("train: mismatched shapes fail before the first step") {
  auto ds = tiny_data<double>();
  NetworkConfig wrong = tiny_net();
  wrong.input_channels = 2;
  Rng rng(11);
  auto net = build_network<double>(wrong, rng);
  TrainConfig cfg;
  cfg.epochs = 1;
  try {
    (void)train(net, ds, cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("channels") != std::string::npos);
  }

  NetworkConfig wrong_c = tiny_net(5);
  auto net2 = build_network<double>(wrong_c, rng);
  CHECK_THROWS_AS((void)train(net2, ds, cfg), Error);
}

// ---------------------------------------------------------------- evaluation

TEST_CASE("argmax_class: largest score wins, ties go to the lowest class") {
  CHECK(argmax_class(Tensor<double>({3}, {0.2, 0.5, 0.3})) == 2);
  CHECK(argmax_class(Tensor<double>({2}, {0.5, 0.5})) == 1);
  CHECK(argmax_class(Tensor<double>({1}, {1.0})) == 1);
  CHECK_THROWS_AS((void)argmax_class(Tensor<double>({2, 2})), Error);
}

TEST_CASE("evaluate: a constant predictor scores the class-1 frequency") {
  auto ds = tiny_data<double>(2, 4, 40, 19);
  Rng rng(12);
  auto net = build_network<double>(tiny_net(), rng);
  for (auto& p : net.params()) p.value->zero();
  // all-zero logits: every tie resolves to class 1
  const double acc = evaluate(net, ds.test);
  int ones = 0;
  for (const auto& r : ds.test) ones += r.label == 1 ? 1 : 0;
  CHECK(acc == doctest::Approx(static_cast<double>(ones) / ds.test.size()));
}

TEST_CASE("evaluate: chunked forward passes agree with one big batch") {
  auto ds = tiny_data<double>(2, 3, 30, 23);
  Rng rng(13);
  auto net = build_network<double>(tiny_net(), rng);
  CHECK(evaluate(net, ds.test, 2) == evaluate(net, ds.test, 128));
  CHECK_THROWS_AS((void)evaluate(net, std::vector<LabeledSeries<double>>{}), Error);
}

TEST_CASE("history csv: epoch, loss, accuracy, lr, seconds") {
  TempDir dir("history_csv");
  TrainHistory h;
  h.epochs.push_back({0.9, 0.5, 1e-3, 0.25});
  h.epochs.push_back({0.4, 0.75, 1e-3, 0.24});
  const auto path = dir.file("history.csv");
  save_history_csv(h, path);
  const auto text = slurp(path);
  CHECK(text.find("epoch,loss,accuracy,lr,seconds") == 0);
  CHECK(text.find("\n1,0.9") != std::string::npos);
  CHECK(text.find("\n2,0.4") != std::string::npos);
}
