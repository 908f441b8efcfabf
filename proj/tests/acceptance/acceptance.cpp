// acceptance gates. each criterion re-derives its expectation from scratch
// (central finite differences, closed forms, frozen hand values) and prints
// one verdict line; the binary exits non-zero when any executed criterion
// fails. run all with no arguments or a single one with --criterion N.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "support/test_support.hpp"
#include "tsinception/config.hpp"
#include "tsinception/dataset.hpp"
#include "tsinception/ensemble.hpp"
#include "tsinception/grad_check.hpp"
#include "tsinception/network.hpp"
#include "tsinception/ops.hpp"
#include "tsinception/parallel.hpp"
#include "tsinception/rng.hpp"
#include "tsinception/stats.hpp"
#include "tsinception/tensor.hpp"
#include "tsinception/train.hpp"

using namespace tsinception;
using testsup::TempDir;
using testsup::flatten;
using testsup::kahan_mean;
using testsup::max_rel_err;
using testsup::random_tensor;
using testsup::slurp;
using testsup::unflatten;

namespace {

using D = Tensor<double>;

// epoch budgets for the two training criteria, tuned on a single-core box
constexpr int kLearnabilityEpochs = 60;    // criterion 5, hard cap 200
constexpr int kTrendEpochs = 60;           // criterion 6, per seed and variant

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// prints every sub-check line; failing ones carry a "fail:" prefix
struct Crit {
  bool ok = true;
  void expect(bool cond, const std::string& line) {
    std::printf("  %s%s\n", cond ? "" : "fail: ", line.c_str());
    if (!cond) ok = false;
  }
  void note(const std::string& line) { std::printf("  %s\n", line.c_str()); }
};

std::vector<const D*> cptrs(const std::vector<D>& xs) {
  std::vector<const D*> out;
  for (const auto& x : xs) out.push_back(&x);
  return out;
}

std::vector<D*> ptrs(std::vector<D>& xs) {
  std::vector<D*> out;
  for (auto& x : xs) out.push_back(&x);
  return out;
}

template <typename S>
Tensor<S> random_tensor_s(std::vector<int> shape, Rng& rng) {
  Tensor<S> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<S>(rng.uniform(-1.0, 1.0));
  return t;
}

// ---------------------------------------------------------------- criterion 1

double conv_fd_worst(Rng& rng, int& cases) {
  double worst = 0.0;
  for (int rep = 0; rep < 24; ++rep) {
    const int M = 1 + rng.next_int(3), T = 3 + rng.next_int(8);
    const int F = 1 + rng.next_int(3), k = 1 + rng.next_int(5);
    const bool same = rep % 2 == 0;
    const int stride = same ? 1 : 1 + rng.next_int(2);
    if (!same && k > T) continue;
    const Padding pad = same ? Padding::same : Padding::valid;

    D in = random_tensor({M, T}, rng);
    D w = random_tensor({F, M, k}, rng);
    D b = random_tensor({F}, rng);
    D out;
    conv1d_forward(in, w, b, pad, stride, out);
    D proj = random_tensor(out.shape, rng);
    D d_in(in.shape), d_w(w.shape), d_b(b.shape);
    conv1d_backward(in, w, proj, pad, stride, &d_in, &d_w, &d_b);

    auto f = [&](const std::vector<double>& flat) {
      D fin(in.shape), fw(w.shape), fb(b.shape);
      unflatten(flat, {&fin, &fw, &fb});
      D fout;
      conv1d_forward(fin, fw, fb, pad, stride, fout);
      double loss = 0.0;
      for (std::size_t i = 0; i < fout.data.size(); ++i) loss += fout.data[i] * proj.data[i];
      return loss;
    };
    const auto fd = finite_difference_gradient(f, flatten({&in, &w, &b}));
    worst = std::max(worst, max_rel_err(fd, flatten({&d_in, &d_w, &d_b})));
    ++cases;
  }
  return worst;
}

double maxpool_fd_worst(Rng& rng, int& cases) {
  double worst = 0.0;
  while (cases < 20) {
    const int T = 4 + rng.next_int(8), w = 2 + rng.next_int(3);
    D in = random_tensor({2, T}, rng);
    // reject draws with near-tied window maxima (kink of the max function)
    bool tied = false;
    for (int c = 0; c < 2 && !tied; ++c)
      for (int t = 0; t < T && !tied; ++t) {
        std::vector<double> win;
        for (int s = std::max(0, t - w / 2); s <= std::min(T - 1, t + (w - 1) / 2); ++s)
          win.push_back(in(c, s));
        std::sort(win.begin(), win.end());
        if (win.size() >= 2 && win.back() - win[win.size() - 2] < 1e-3) tied = true;
      }
    if (tied) continue;

    D out;
    maxpool1d_forward(in, w, 1, out);
    D proj = random_tensor(out.shape, rng);
    D d_in(in.shape);
    maxpool1d_backward(in, w, 1, proj, d_in);

    auto f = [&](const std::vector<double>& flat) {
      D fin(in.shape);
      unflatten(flat, {&fin});
      D fout;
      maxpool1d_forward(fin, w, 1, fout);
      double loss = 0.0;
      for (std::size_t i = 0; i < fout.data.size(); ++i) loss += fout.data[i] * proj.data[i];
      return loss;
    };
    const auto fd = finite_difference_gradient(f, flatten({&in}));
    worst = std::max(worst, max_rel_err(fd, flatten({&d_in})));
    ++cases;
  }
  return worst;
}

double batchnorm_fd_worst(Rng& rng, int& cases) {
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const int M = 1 + rng.next_int(2), T = 2 + rng.next_int(4), N = 2 + rng.next_int(3);
    std::vector<D> xs;
    for (int i = 0; i < N; ++i) xs.push_back(random_tensor({M, T}, rng));
    D gamma = random_tensor({M}, rng, 0.5, 1.5);
    D beta = random_tensor({M}, rng);
    std::vector<D> projs;
    for (int i = 0; i < N; ++i) projs.push_back(random_tensor({M, T}, rng));

    BatchNormState<double> st(M);
    st.gamma = gamma;
    st.beta = beta;
    std::vector<D> ys(xs.size(), D({M, T}));
    auto ip = cptrs(xs);
    auto op = ptrs(ys);
    BatchNormStash stash;
    batchnorm_forward(ip, op, st, Mode::train, &stash);
    std::vector<D> d_ins(xs.size(), D({M, T}));
    D d_gamma({M}), d_beta({M});
    auto dop = ptrs(d_ins);
    auto pp = cptrs(projs);
    batchnorm_backward(ip, st, stash, pp, dop, &d_gamma, &d_beta);

    std::vector<const D*> all;
    for (const auto& x : xs) all.push_back(&x);
    all.push_back(&gamma);
    all.push_back(&beta);
    auto f = [&](const std::vector<double>& flat) {
      std::vector<D> axs(xs.size(), D({M, T}));
      D ag({M}), ab({M});
      std::vector<D*> tgt = ptrs(axs);
      tgt.push_back(&ag);
      tgt.push_back(&ab);
      unflatten(flat, tgt);
      BatchNormState<double> fst(M);
      fst.gamma = ag;
      fst.beta = ab;
      std::vector<D> fys(axs.size(), D({M, T}));
      auto fip = cptrs(axs);
      auto fop = ptrs(fys);
      BatchNormStash fstash;
      batchnorm_forward(fip, fop, fst, Mode::train, &fstash);
      double loss = 0.0;
      for (std::size_t i = 0; i < fys.size(); ++i)
        for (std::size_t j = 0; j < fys[i].data.size(); ++j)
          loss += fys[i].data[j] * projs[i].data[j];
      return loss;
    };
    const auto fd = finite_difference_gradient(f, flatten(all));
    std::vector<const D*> an;
    for (const auto& d : d_ins) an.push_back(&d);
    an.push_back(&d_gamma);
    an.push_back(&d_beta);
    worst = std::max(worst, max_rel_err(fd, flatten(an)));
    ++cases;
  }
  return worst;
}

double dense_fd_worst(Rng& rng, int& cases) {
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const int M = 1 + rng.next_int(6), C = 1 + rng.next_int(4);
    D x = random_tensor({M}, rng);
    D w = random_tensor({C, M}, rng);
    D b = random_tensor({C}, rng);
    D out;
    dense_forward(x, w, b, out);
    D proj = random_tensor(out.shape, rng);
    D dx(x.shape), dw(w.shape), db(b.shape);
    dense_backward(x, w, proj, &dx, &dw, &db);

    auto f = [&](const std::vector<double>& flat) {
      D fx(x.shape), fw(w.shape), fb(b.shape);
      unflatten(flat, {&fx, &fw, &fb});
      D fout;
      dense_forward(fx, fw, fb, fout);
      double loss = 0.0;
      for (std::size_t i = 0; i < fout.data.size(); ++i) loss += fout.data[i] * proj.data[i];
      return loss;
    };
    const auto fd = finite_difference_gradient(f, flatten({&x, &w, &b}));
    worst = std::max(worst, max_rel_err(fd, flatten({&dx, &dw, &db})));
    ++cases;
  }
  return worst;
}

double gap_fd_worst(Rng& rng, int& cases) {
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const int M = 1 + rng.next_int(4), T = 2 + rng.next_int(9);
    D in = random_tensor({M, T}, rng);
    D out;
    global_average_pool_forward(in, out);
    D proj = random_tensor(out.shape, rng);
    D d_in;
    global_average_pool_backward(proj, T, d_in);

    auto f = [&](const std::vector<double>& flat) {
      D fin(in.shape);
      unflatten(flat, {&fin});
      D fout;
      global_average_pool_forward(fin, fout);
      double loss = 0.0;
      for (std::size_t i = 0; i < fout.data.size(); ++i) loss += fout.data[i] * proj.data[i];
      return loss;
    };
    const auto fd = finite_difference_gradient(f, flatten({&in}));
    worst = std::max(worst, max_rel_err(fd, flatten({&d_in})));
    ++cases;
  }
  return worst;
}

double softmax_ce_fd_worst(Rng& rng, int& cases) {
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const int C = 2 + rng.next_int(5);
    D logits = random_tensor({C}, rng, -3.0, 3.0);
    const int label = 1 + rng.next_int(C);
    D d;
    softmax_cross_entropy<double>(logits, label, nullptr, &d);

    auto f = [&](const std::vector<double>& flat) {
      D fl(logits.shape);
      unflatten(flat, {&fl});
      return softmax_cross_entropy<double>(fl, label, nullptr, nullptr);
    };
    const auto fd = finite_difference_gradient(f, flatten({&logits}));
    worst = std::max(worst, max_rel_err(fd, flatten({&d})));
    ++cases;
  }
  return worst;
}

NetworkConfig two_module_config() {
  NetworkConfig c;
  c.depth = 2;
  c.num_classes = 2;
  c.input_channels = 1;
  c.module.filter_lengths = {3, 5};
  c.module.filters_per_branch = 2;
  c.module.bottleneck_size = 2;
  return c;
}

double network_fd_worst(Rng& rng, int& cases) {
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    NetworkConfig c = two_module_config();
    c.residual_enabled = rep % 2 == 0;
    c.module.use_maxpool_branch = rep % 3 != 0;
    auto net = build_network<double>(c, rng);

    const int n = 2, t_len = 7;
    std::vector<D> xs;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      xs.push_back(random_tensor({1, t_len}, rng));
      labels.push_back(1 + rng.next_int(2));
    }
    auto params = net.params();

    auto loss_fn = [&](const std::vector<double>& flat) {
      std::size_t pos = 0;
      for (auto& p : params) {
        std::copy(flat.begin() + pos, flat.begin() + pos + p.value->size(),
                  p.value->data.begin());
        pos += p.value->size();
      }
      std::vector<D> local_xs(xs);
      for (auto& x : local_xs) {
        std::copy(flat.begin() + pos, flat.begin() + pos + x.size(), x.data.begin());
        pos += x.size();
      }
      std::vector<D> logits;
      net.forward_logits(cptrs(local_xs), Mode::train, nullptr, logits);
      double loss = 0.0;
      for (int i = 0; i < n; ++i)
        loss += softmax_cross_entropy<double>(logits[i], labels[i], nullptr, nullptr);
      return loss;
    };

    std::vector<double> flat0;
    for (auto& p : params)
      flat0.insert(flat0.end(), p.value->data.begin(), p.value->data.end());
    for (auto& x : xs) flat0.insert(flat0.end(), x.data.begin(), x.data.end());

    net.zero_grad();
    ForwardStash<double> st;
    std::vector<D> logits;
    net.forward_logits(cptrs(xs), Mode::train, &st, logits);
    std::vector<D> d_logits(n);
    for (int i = 0; i < n; ++i)
      softmax_cross_entropy<double>(logits[i], labels[i], nullptr, &d_logits[i]);
    std::vector<D> d_inputs;
    net.backward(st, d_logits, &d_inputs);
    std::vector<double> analytic;
    for (auto& p : params)
      analytic.insert(analytic.end(), p.grad->data.begin(), p.grad->data.end());
    for (auto& d : d_inputs) analytic.insert(analytic.end(), d.data.begin(), d.data.end());

    // the loss function mutates net parameters; restore them afterwards
    const auto fd = finite_difference_gradient(loss_fn, flat0);
    std::size_t pos = 0;
    for (auto& p : params) {
      std::copy(flat0.begin() + pos, flat0.begin() + pos + p.value->size(),
                p.value->data.begin());
      pos += p.value->size();
    }
    worst = std::max(worst, max_rel_err(fd, analytic));
    ++cases;
  }
  return worst;
}

int criterion_1() {
  Crit c;
  Rng rng(1001);
  struct Family {
    const char* name;
    double (*run)(Rng&, int&);
  };
  const Family families[] = {
      {"conv1d", conv_fd_worst},       {"maxpool1d", maxpool_fd_worst},
      {"batchnorm", batchnorm_fd_worst}, {"dense", dense_fd_worst},
      {"global_average_pool", gap_fd_worst}, {"softmax_cross_entropy", softmax_ce_fd_worst},
      {"two-module network", network_fd_worst},
  };
  for (const auto& fam : families) {
    int cases = 0;
    const double worst = fam.run(rng, cases);
    c.expect(cases >= 20 && worst < 1e-4,
             std::string(fam.name) + ": max rel err " + num(worst) + " over " +
                 std::to_string(cases) + " instances");
  }
  return c.ok ? 0 : 1;
}

// ---------------------------------------------------------------- criterion 2

int criterion_2() {
  Crit c;
  NetworkConfig def;
  c.expect(receptive_field(def) == 235,
           "default configuration: receptive field " + std::to_string(receptive_field(def)));
  NetworkConfig d3 = def;
  d3.depth = 3;
  c.expect(receptive_field(d3) == 118,
           "depth 3: receptive field " + std::to_string(receptive_field(d3)));

  Rng rng(1002);
  int held = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const int d = 1 + rng.next_int(12);
    std::vector<int> chain;
    for (int i = 0; i < d; ++i) chain.push_back(2 + rng.next_int(63));
    const int base = receptive_field(chain);

    std::vector<int> deeper = chain;
    const int k = 2 + rng.next_int(63);
    deeper.push_back(k);
    deeper.push_back(k);
    const bool law_a = receptive_field(deeper) == base + 2 * (k - 1);

    std::vector<int> longer = chain;
    for (int& len : longer) len += 2;
    const bool law_b = receptive_field(longer) == base + 2 * d;

    if (law_a && law_b) ++held;
  }
  c.expect(held == 200, "growth laws exact on " + std::to_string(held) + "/200 random chains");
  return c.ok ? 0 : 1;
}

// ---------------------------------------------------------------- criterion 3

int criterion_3() {
  Crit c;
  Rng rng(1003);
  auto count_of = [&](NetworkConfig cf) {
    auto net = build_network<float>(cf, rng);
    return parameter_count(net);
  };
  NetworkConfig def;
  const double base = static_cast<double>(count_of(def));

  NetworkConfig nb = def;
  nb.module.use_bottleneck = false;
  NetworkConfig d9 = def;
  d9.depth = 9;
  NetworkConfig d3 = def;
  d3.depth = 3;
  NetworkConfig wide = def;
  wide.module.filters_per_branch = 64;
  wide.module.bottleneck_size = 128;

  struct Ratio {
    const char* name;
    double value;
    double lo, hi;
  };
  const long long nb_n = count_of(nb), d9_n = count_of(d9), d3_n = count_of(d3),
                  wide_n = count_of(wide);
  const Ratio ratios[] = {
      {"no-bottleneck / default", nb_n / base, 1.5, 2.5},
      {"depth-9 / depth-6", d9_n / base, 1.6, 2.4},
      {"depth-3 / depth-6", d3_n / base, 0.4, 0.65},
      {"64-filter / 32-filter", wide_n / base, 3.3, 4.7},
  };
  c.note("default network: " + std::to_string(static_cast<long long>(base)) + " parameters");
  for (const auto& r : ratios)
    c.expect(r.value >= r.lo && r.value <= r.hi, std::string(r.name) + " ratio " + num(r.value) +
                                                     ", required [" + num(r.lo) + ", " +
                                                     num(r.hi) + "]");
  if (!c.ok)
    c.note("note: the count grows by a fixed " + std::to_string(d9_n - static_cast<long long>(base)) +
           " parameters per three modules, which pins depth-3/depth-6 at " +
           num(d3_n / base) + "; no depth-only variant can reach the stated floor");
  return c.ok ? 0 : 1;
}

// ---------------------------------------------------------------- criterion 4

int criterion_4() {
  Crit c;
  NetworkConfig cf;
  cf.depth = 2;
  cf.num_classes = 3;
  cf.input_channels = 1;
  cf.module.filter_lengths = {5, 9};
  cf.module.filters_per_branch = 4;
  cf.module.bottleneck_size = 4;

  EnsembleModel<double> model;
  model.config = cf;
  for (int j = 0; j < 5; ++j) {
    Rng rng(300 + static_cast<std::uint64_t>(j));
    model.members.push_back(build_network<double>(cf, rng));
    model.seeds.push_back(300 + static_cast<std::uint64_t>(j));
  }

  Rng data_rng(1004);
  std::vector<D> xs;
  for (int i = 0; i < 16; ++i) xs.push_back(random_tensor({1, 40}, data_rng));
  auto px = cptrs(xs);

  std::vector<D> ens;
  ensemble_predict_batch(model, px, ens);

  // independent mean of the members' probabilities, extended precision
  std::vector<std::vector<long double>> mean(xs.size(),
                                             std::vector<long double>(static_cast<std::size_t>(cf.num_classes), 0.0L));
  for (auto& member : model.members) {
    std::vector<D> probs;
    member.forward(px, Mode::infer, probs);
    for (std::size_t i = 0; i < probs.size(); ++i)
      for (int k = 0; k < cf.num_classes; ++k)
        mean[i][static_cast<std::size_t>(k)] += probs[i](k);
  }
  double worst_mean = 0.0, worst_sum = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    double row = 0.0;
    for (int k = 0; k < cf.num_classes; ++k) {
      const double ref = static_cast<double>(mean[i][static_cast<std::size_t>(k)] / 5.0L);
      worst_mean = std::max(worst_mean, std::abs(ens[i](k) - ref));
      row += ens[i](k);
    }
    worst_sum = std::max(worst_sum, std::abs(row - 1.0));
  }
  c.expect(worst_mean <= 1e-12,
           "five-member mean matches an independent average within " + num(worst_mean));
  c.expect(worst_sum <= 1e-6, "probability rows sum to one within " + num(worst_sum));

  EnsembleModel<double> solo;
  solo.config = cf;
  {
    Rng rng(300);
    solo.members.push_back(build_network<double>(cf, rng));
    solo.seeds.push_back(300);
  }
  std::vector<D> one, direct;
  ensemble_predict_batch(solo, px, one);
  solo.members[0].forward(px, Mode::infer, direct);
  bool bit_exact = one.size() == direct.size();
  for (std::size_t i = 0; bit_exact && i < one.size(); ++i)
    bit_exact = std::memcmp(one[i].data.data(), direct[i].data.data(),
                            one[i].size() * sizeof(double)) == 0;
  c.expect(bit_exact, "single-member ensemble is bit-exact against the bare network");
  return c.ok ? 0 : 1;
}

// ---------------------------------------------------------------- criterion 5

template <typename S>
Dataset<S> normalized_synthetic(const SyntheticSpec& spec) {
  auto ds = generate_synthetic<S>(spec);
  for (auto& s : ds.train) s.values = z_normalize(s.values);
  for (auto& s : ds.test) s.values = z_normalize(s.values);
  return ds;
}

int criterion_5() {
  Crit c;
  SyntheticSpec spec;
  spec.length = 256;
  spec.train_per_class = 64;
  spec.test_per_class = 512;
  spec.seed = 9;
  auto ds = normalized_synthetic<float>(spec);

  NetworkConfig cf;
  TrainConfig t;
  t.epochs = kLearnabilityEpochs;
  t.batch_size = 64;
  t.seed = 1;

  Rng rng(1);
  auto net = build_network<float>(cf, rng);
  train(net, ds, t);
  const double acc = evaluate(net, ds.test);
  c.expect(t.epochs <= 200 && acc >= 0.95,
           "test accuracy " + num(acc) + " after " + std::to_string(t.epochs) +
               " epochs (cap 200) on 128 train / 1024 test");
  return c.ok ? 0 : 1;
}

// ---------------------------------------------------------------- criterion 6

int criterion_6() {
  Crit c;
  SyntheticSpec spec;
  spec.length = 1024;
  spec.train_per_class = 32;
  spec.test_per_class = 128;
  // class 0's window starts 32 samples from the series edge: inside the
  // {16,32,64} net's first-layer window (k=64 reaches offset 62) but beyond
  // the {2,4,8} net's whole receptive field radius at layer one (k=8 reaches
  // offset 7), so only the long-filter net can see edge padding and window
  // together without a deep conjunction
  spec.pattern_starts = {32, 512};
  spec.seed = 10;
  auto ds = normalized_synthetic<float>(spec);

  auto mean_accuracy = [&](const std::vector<int>& lengths) {
    double sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      NetworkConfig cf;
      cf.module.filter_lengths = lengths;
      // narrow both nets the same way: 64 training series are few enough
      // that full-width nets memorize the noise before finding the edge cue
      cf.module.filters_per_branch = 8;
      cf.module.bottleneck_size = 16;
      TrainConfig t;
      t.epochs = kTrendEpochs;
      t.batch_size = 16;
      t.seed = seed;
      Rng rng(seed);
      auto net = build_network<float>(cf, rng);
      train(net, ds, t);
      const double acc = evaluate(net, ds.test);
      c.note("filter lengths {" + std::to_string(lengths[0]) + "," + std::to_string(lengths[1]) +
             "," + std::to_string(lengths[2]) + "}, seed " + std::to_string(seed) +
             ": test accuracy " + num(acc));
      sum += acc;
    }
    return sum / 3.0;
  };

  const double short_mean = mean_accuracy({2, 4, 8});
  const double long_mean = mean_accuracy({16, 32, 64});
  c.expect(long_mean - short_mean >= 0.05,
           "three-seed means: short filters " + num(short_mean) + ", long filters " +
               num(long_mean) + ", margin " + num(long_mean - short_mean) + " (need >= 0.05)");
  return c.ok ? 0 : 1;
}

// ---------------------------------------------------------------- criterion 7

int criterion_7() {
  Crit c;
  {
    std::vector<double> a = {2, 4, 6, 8, 10}, b = {1, 2, 3, 4, 5};
    auto r = wilcoxon_signed_rank(a, b);
    c.expect(r.exact && std::abs(r.p_value - 0.0625) < 1e-15,
             "five all-positive differences: exact p " + num(r.p_value));
  }
  {
    Rng rng(1007);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> a, b;
      for (int i = 0; i < 25; ++i) {
        a.push_back(rng.uniform(0.0, 1.0));
        b.push_back(rng.uniform(0.0, 1.0));
      }
      const auto ex = wilcoxon_signed_rank(a, b, WilcoxonMode::exact);
      const auto ap = wilcoxon_signed_rank(a, b, WilcoxonMode::approximate);
      worst = std::max(worst, std::abs(ex.p_value - ap.p_value));
    }
    c.expect(worst <= 0.01,
             "exact vs normal approximation at n=25: worst gap " + num(worst) + " over 20 draws");
  }
  {
    AccuracyMatrix m;
    m.classifiers = {"a", "b", "c"};
    for (int i = 0; i < 10; ++i) {
      m.datasets.push_back("d" + std::to_string(i + 1));
      m.values.push_back({0.9, 0.5, 0.1});
    }
    const auto r = friedman_test(m);
    c.expect(std::abs(r.statistic - 20.0) < 1e-12 && r.p_value < 0.001,
             "constant-rank 3x10 matrix: statistic " + num(r.statistic) + ", p " +
                 num(r.p_value));
  }
  {
    const bool h1 = holm_correction({0.04})[0];
    const auto h2 = holm_correction({0.01, 0.04});
    const auto h3 = holm_correction({0.03, 0.04});
    const auto h4 = holm_correction({0.4, 0.01});
    c.expect(h1 && h2[0] && h2[1] && !h3[0] && !h3[1] && !h4[0] && h4[1],
             "step-down decisions match the hand-worked cases");
  }
  {
    Rng rng(2026);
    int rejections = 0;
    for (int draw = 0; draw < 1000; ++draw) {
      AccuracyMatrix m;
      m.classifiers = {"a", "b", "c"};
      for (int i = 0; i < 12; ++i) {
        m.datasets.push_back("d" + std::to_string(i + 1));
        m.values.push_back({rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)});
      }
      if (friedman_test(m).p_value < 0.05) ++rejections;
    }
    const double rate = rejections / 1000.0;
    c.expect(rate >= 0.02 && rate <= 0.09,
             "null rejection rate at alpha 0.05: " + num(rate) + " over 1000 draws");
  }
  return c.ok ? 0 : 1;
}

// ---------------------------------------------------------------- criterion 8

int criterion_8() {
  Crit c;
  {
    Rng rng(1008);
    double worst_mean = 0.0, worst_std = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
      const int M = 1 + rng.next_int(3), T = 5 + rng.next_int(196);
      const auto z = z_normalize(random_tensor({M, T}, rng, -5.0, 5.0));
      for (int m = 0; m < M; ++m) {
        std::vector<double> row(z.row(m), z.row(m) + T);
        const double mean = kahan_mean(row);
        double sq = 0.0;
        for (double v : row) sq += (v - mean) * (v - mean);
        worst_mean = std::max(worst_mean, std::abs(mean));
        worst_std = std::max(worst_std, std::abs(std::sqrt(sq / T) - 1.0));
      }
    }
    c.expect(worst_mean < 1e-9 && worst_std < 1e-6,
             "50 random series: worst |mean| " + num(worst_mean) + ", worst |std-1| " +
                 num(worst_std));
  }
  {
    const auto z = z_normalize(D({1, 3}, {1, 2, 3}));
    const double expected[] = {-1.2247, 0.0, 1.2247};
    bool ok = true;
    for (int i = 0; i < 3; ++i) ok = ok && std::abs(z(0, i) - expected[i]) <= 1e-4;
    c.expect(ok, "[1,2,3] normalizes to [" + num(z(0, 0)) + ", " + num(z(0, 1)) + ", " +
                     num(z(0, 2)) + "]");
  }
  {
    SyntheticSpec spec;
    spec.seed = 13;
    auto ds = generate_synthetic<double>(spec);
    const int L = spec.pattern_length();
    const std::vector<int> starts = {0, spec.length / 2};
    int checked = 0, recovered = 0;
    auto check_split = [&](const std::vector<LabeledSeries<double>>& split) {
      for (const auto& s : split) {
        // brute-force window location: the implanted plateau has maximal sum
        double best = -1e300;
        int best_start = -1;
        for (int t = 0; t + L <= spec.length; ++t) {
          double sum = 0.0;
          for (int j = 0; j < L; ++j) sum += s.values(0, t + j);
          if (sum > best) {
            best = sum;
            best_start = t;
          }
        }
        ++checked;
        if (best_start == starts[static_cast<std::size_t>(s.label - 1)]) ++recovered;
      }
    };
    check_split(ds.train);
    check_split(ds.test);
    c.expect(recovered == checked, "window location recovered on " + std::to_string(recovered) +
                                       "/" + std::to_string(checked) + " raw series");
  }
  {
    SyntheticSpec spec;
    spec.length = 32;
    spec.train_per_class = 4;
    spec.test_per_class = 4;
    spec.seed = 14;
    auto ds = generate_synthetic<double>(spec);
    TempDir dir("acceptance_roundtrip");
    save_ucr(ds, dir.file("rt_TRAIN.tsv"), dir.file("rt_TEST.tsv"));
    auto back = load_ucr<double>(dir.file("rt_TRAIN.tsv"), dir.file("rt_TEST.tsv"), false);
    bool ok = back.train.size() == ds.train.size() && back.test.size() == ds.test.size();
    auto same_split = [&](const std::vector<LabeledSeries<double>>& a,
                          const std::vector<LabeledSeries<double>>& b) {
      for (std::size_t i = 0; ok && i < a.size(); ++i) {
        ok = a[i].label == b[i].label &&
             std::memcmp(a[i].values.data.data(), b[i].values.data.data(),
                         a[i].values.size() * sizeof(double)) == 0;
      }
    };
    same_split(ds.train, back.train);
    same_split(ds.test, back.test);
    c.expect(ok, "save/load round trip reproduces every value bit-exactly");
  }
  return c.ok ? 0 : 1;
}

// ---------------------------------------------------------------- criterion 9

std::string cli_binary() {
  if (const char* env = std::getenv("TSINCEPTION_CLI")) return env;
  // fall back to the build-tree layout relative to this binary
  char buf[4096];
  const ssize_t n = readlink("/proc/self/exe", buf, sizeof buf - 1);
  if (n > 0) {
    buf[n] = '\0';
    std::string exe(buf);
    const auto slash = exe.rfind('/');
    if (slash != std::string::npos) {
      const std::string candidate = exe.substr(0, slash) + "/../tools/tsinception";
      if (std::ifstream(candidate).good()) return candidate;
    }
  }
  return "";
}

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& binary, const TempDir& dir, const std::string& args) {
  const auto log = dir.file("run.log");
  const std::string cmd = binary + " " + args + " > " + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = slurp(log);
  return r;
}

int criterion_9() {
  Crit c;
  set_worker_count(1);

  SyntheticSpec spec;
  spec.length = 64;
  spec.train_per_class = 8;
  spec.test_per_class = 8;
  spec.seed = 15;
  auto ds = normalized_synthetic<float>(spec);

  NetworkConfig cf;
  cf.depth = 2;
  cf.module.filter_lengths = {5, 9};
  cf.module.filters_per_branch = 4;
  cf.module.bottleneck_size = 4;

  TrainConfig t;
  t.epochs = 8;
  t.batch_size = 8;
  t.seed = 5;
  {
    Rng r1(42), r2(42);
    auto n1 = build_network<float>(cf, r1);
    auto n2 = build_network<float>(cf, r2);
    const auto h1 = train(n1, ds, t);
    const auto h2 = train(n2, ds, t);
    bool same = h1.epochs.size() == h2.epochs.size() && h1.best_epoch == h2.best_epoch &&
                h1.best_loss == h2.best_loss;
    for (std::size_t i = 0; same && i < h1.epochs.size(); ++i)
      same = h1.epochs[i].loss == h2.epochs[i].loss &&
             h1.epochs[i].accuracy == h2.epochs[i].accuracy &&
             h1.epochs[i].learning_rate == h2.epochs[i].learning_rate;
    c.expect(same, "same seed: " + std::to_string(h1.epochs.size()) +
                       "-epoch histories are identical");
  }
  {
    TrainConfig te = t;
    te.epochs = 6;
    auto model = train_ensemble(ds, cf, 2, 7, te);
    TempDir dir("acceptance_persist");
    save_ensemble(model, dir.path.string());
    auto loaded = load_ensemble<float>(dir.path.string());
    std::vector<Tensor<float>> xs;
    for (const auto& s : ds.test) xs.push_back(s.values);
    std::vector<const Tensor<float>*> px;
    for (const auto& x : xs) px.push_back(&x);
    std::vector<Tensor<float>> p1, p2;
    ensemble_predict_batch(model, px, p1);
    ensemble_predict_batch(loaded, px, p2);
    bool same = p1.size() == p2.size();
    for (std::size_t i = 0; same && i < p1.size(); ++i)
      same = std::memcmp(p1[i].data.data(), p2[i].data.data(),
                         p1[i].size() * sizeof(float)) == 0;
    c.expect(same, "save/load: inference outputs identical on " +
                       std::to_string(p1.size()) + " series");
  }
  {
    const std::string cli = cli_binary();
    if (cli.empty()) {
      c.expect(false, "command-line binary not found (set TSINCEPTION_CLI)");
      return 1;
    }
    TempDir dir("acceptance_sweep");
    auto r = run_cli(cli, dir, "generate --length 32 --instances 8 --test-instances 8 --seed 1 --out " +
                                   dir.file("data"));
    bool ok = r.exit_code == 0;
    std::ofstream(dir.file("grid.json"))
        << "{\"data\": [{\"name\": \"tiny\", \"train\": \"" << dir.file("data")
        << "/synthetic_TRAIN.tsv\", \"test\": \"" << dir.file("data")
        << "/synthetic_TEST.tsv\"}],\n"
        << "\"architectures\": [{\"depth\": 1, \"module\": {\"filters_per_branch\": 2, "
           "\"filter_lengths\": [3], \"bottleneck_size\": 2}}],\n"
        << "\"seeds\": [1, 2], \"train\": {\"epochs\": 2, \"batch_size\": 8}}";
    const std::string sweep = "sweep --grid " + dir.file("grid.json") + " --out " +
                              dir.file("out") + " --workers 1";
    r = run_cli(cli, dir, sweep);
    ok = ok && r.exit_code == 0 && r.output.find("2 computed, 0 skipped") != std::string::npos;

    // drop one finished row, as if the first run had been interrupted
    const std::string results = dir.file("out") + "/results.csv";
    const auto full = slurp(results);
    const auto second_row = full.rfind('\n', full.size() - 2);
    const auto truncated = full.substr(0, second_row + 1);
    std::ofstream(results) << truncated;

    r = run_cli(cli, dir, sweep);
    ok = ok && r.exit_code == 0 && r.output.find("1 computed, 1 skipped") != std::string::npos;
    ok = ok && slurp(results).size() == full.size();
    c.expect(ok, "interrupted sweep recomputes exactly the missing row");
  }
  return c.ok ? 0 : 1;
}

// --------------------------------------------------------------- criterion 10

int criterion_10() {
  const char* path = std::getenv("TSINCEPTION_PUBLISHED_CSV");
  if (path == nullptr) return 2;
  Crit c;
  const auto m = load_accuracy_csv(path);
  c.expect(m.classifiers.size() == 2,
           "table lists " + std::to_string(m.classifiers.size()) + " classifiers over " +
               std::to_string(m.datasets.size()) + " datasets");
  if (!c.ok) return 1;
  std::vector<double> a, b;
  for (const auto& row : m.values) {
    a.push_back(row[0]);
    b.push_back(row[1]);
  }
  const auto w = win_tie_loss(a, b);
  c.expect(w.wins == 40 && w.ties == 6 && w.losses == 39,
           m.classifiers[0] + " vs " + m.classifiers[1] + ": win/tie/loss " +
               std::to_string(w.wins) + "/" + std::to_string(w.ties) + "/" +
               std::to_string(w.losses) + " (expected 40/6/39)");
  return c.ok ? 0 : 1;
}

// ---------------------------------------------------------------- harness

struct Entry {
  int id;
  const char* label;
  int (*run)();
  double budget_seconds;  // 0 = no stated budget
};

const Entry kEntries[] = {
    {1, "backpropagation matches central finite differences", criterion_1, 60},
    {2, "receptive-field closed form and growth laws", criterion_2, 1},
    {3, "parameter-count ratios across architecture variants", criterion_3, 1},
    {4, "ensemble output is the mean of member probabilities", criterion_4, 0},
    {5, "default network learns the synthetic task", criterion_5, 900},
    {6, "longer filters win on far-apart class windows", criterion_6, 7200},
    {7, "rank-test statistics match hand-computed values", criterion_7, 60},
    {8, "data pipeline contracts", criterion_8, 0},
    {9, "determinism, persistence, and sweep resume", criterion_9, 0},
    {10, "published accuracy table comparison", criterion_10, 0},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
      if (only < 1 || only > 10) {
        std::fprintf(stderr, "acceptance: --criterion wants 1..10\n");
        return 2;
      }
    } else {
      std::fprintf(stderr, "usage: acceptance [--criterion N]\n");
      return 2;
    }
  }

  bool failed = false;
  bool skipped = false;
  for (const auto& e : kEntries) {
    if (only != 0 && e.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    int rc = 1;
    try {
      rc = e.run();
    } catch (const std::exception& ex) {
      std::printf("  fail: unexpected error: %s\n", ex.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (rc == 0 && e.budget_seconds > 0 && secs > e.budget_seconds) {
      std::printf("  fail: runtime %.1f s exceeds the %.0f s budget\n", secs, e.budget_seconds);
      rc = 1;
    }
    const char* verdict = rc == 0 ? "PASS" : rc == 2 ? "SKIP" : "FAIL";
    if (rc == 2)
      std::printf("criterion %d: SKIP — %s (set TSINCEPTION_PUBLISHED_CSV to enable)\n", e.id, e.label);
    else
      std::printf("criterion %d: %s — %s (%.1f s)\n", e.id, verdict, e.label, secs);
    if (rc == 1) failed = true;
    if (rc == 2) skipped = true;
  }
  if (failed) return 1;
  // a lone skipped criterion reports skip status to the test runner
  return only != 0 && skipped ? 2 : 0;
}
