#include "tsinception/network.hpp"

#include <algorithm>
#include <cstring>

#include "tsinception/error.hpp"
#include "tsinception/init.hpp"
#include "tsinception/parallel.hpp"

namespace tsinception {

namespace {

// rows [at, at + src.dim(0)) of dst <- src; both [*, T], contiguous blocks
template <typename S>
void scatter_rows(const Tensor<S>& src, Tensor<S>& dst, int at) {
  std::copy(src.data.begin(), src.data.end(),
            dst.data.begin() + static_cast<std::size_t>(at) * dst.dim(1));
}

// dst [rows, T] <- rows [at, at + rows) of src
template <typename S>
void gather_rows(const Tensor<S>& src, int at, int rows, Tensor<S>& dst) {
  if (dst.shape != std::vector<int>{rows, src.dim(1)}) dst = Tensor<S>({rows, src.dim(1)});
  const auto* from = src.data.data() + static_cast<std::size_t>(at) * src.dim(1);
  std::copy(from, from + dst.size(), dst.data.begin());
}

template <typename S>
void add_into(Tensor<S>& dst, const Tensor<S>& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

template <typename S>
void ensure_zero(Tensor<S>& t, const std::vector<int>& shape) {
  if (t.shape != shape)
    t = Tensor<S>(shape);
  else
    t.zero();
}

}  // namespace

template <typename S>
void ConvBlock<S>::init(int filters, int channels, int k, Rng& rng) {
  w = Tensor<S>({filters, channels, k});
  b = Tensor<S>({filters});
  d_w = Tensor<S>({filters, channels, k});
  d_b = Tensor<S>({filters});
  glorot_uniform(w, channels * k, filters * k, rng);
}

void validate(const NetworkConfig& config) {
  check(config.depth >= 1, "config: depth must be >= 1, got ", config.depth);
  check(config.num_classes >= 1, "config: num_classes must be >= 1, got ", config.num_classes);
  check(config.input_channels >= 1, "config: input_channels must be >= 1, got ",
        config.input_channels);
  check(config.residual_period >= 1, "config: residual_period must be >= 1, got ",
        config.residual_period);
  const auto& m = config.module;
  check(!m.filter_lengths.empty(), "config: filter_lengths must not be empty");
  for (std::size_t i = 0; i < m.filter_lengths.size(); ++i)
    check(m.filter_lengths[i] >= 1, "config: filter_lengths[", i, "] must be >= 1, got ",
          m.filter_lengths[i]);
  check(m.filters_per_branch >= 1, "config: filters_per_branch must be >= 1, got ",
        m.filters_per_branch);
  check(m.bottleneck_size >= 1, "config: bottleneck_size must be >= 1, got ", m.bottleneck_size);
  check(m.maxpool_window >= 1, "config: maxpool_window must be >= 1, got ", m.maxpool_window);
}

template <typename S>
Network<S> build_network(const NetworkConfig& config, Rng& rng) {
  validate(config);
  Network<S> net;
  net.config = config;
  const auto& mc = config.module;
  const int c_out = mc.output_channels();

  int in_ch = config.input_channels;
  for (int j = 0; j < config.depth; ++j) {
    InceptionModule<S> mod;
    mod.in_channels = in_ch;
    mod.out_channels = c_out;
    // a 1x1 conv over one channel cannot reduce dimensionality
    mod.has_bottleneck = mc.use_bottleneck && in_ch > 1;
    int src_ch = in_ch;
    if (mod.has_bottleneck) {
      const int width = std::min(mc.bottleneck_size, in_ch);
      mod.bottleneck.init(width, in_ch, 1, rng);
      src_ch = width;
    }
    for (int k : mc.filter_lengths) {
      ConvBlock<S> br;
      br.init(mc.filters_per_branch, src_ch, k, rng);
      mod.branches.push_back(std::move(br));
    }
    mod.has_maxpool = mc.use_maxpool_branch;
    mod.maxpool_window = mc.maxpool_window;
    if (mod.has_maxpool) mod.maxpool_proj.init(mc.filters_per_branch, in_ch, 1, rng);
    mod.norm = BatchNormBlock<S>(c_out);
    net.modules.push_back(std::move(mod));
    in_ch = c_out;
  }

  if (config.residual_enabled) {
    // one shortcut per group of residual_period modules; a trailing partial
    // group is bridged to the network end
    for (int g0 = 0; g0 < config.depth; g0 += config.residual_period) {
      ShortcutBlock<S> sc;
      sc.from = g0;
      sc.to = std::min(g0 + config.residual_period, config.depth) - 1;
      const int src = (g0 == 0) ? config.input_channels : c_out;
      sc.proj.init(c_out, src, 1, rng);
      sc.norm = BatchNormBlock<S>(c_out);
      net.shortcuts.push_back(std::move(sc));
    }
  }

  net.head_w = Tensor<S>({config.num_classes, c_out});
  net.head_b = Tensor<S>({config.num_classes});
  net.d_head_w = Tensor<S>({config.num_classes, c_out});
  net.d_head_b = Tensor<S>({config.num_classes});
  glorot_uniform(net.head_w, c_out, config.num_classes, rng);
  return net;
}

template <typename S>
int Network<S>::output_channels() const {
  return modules.back().out_channels;
}

template <typename S>
int Network<S>::shortcut_at(int j) const {
  for (std::size_t s = 0; s < shortcuts.size(); ++s)
    if (shortcuts[s].to == j) return static_cast<int>(s);
  return -1;
}

template <typename S>
std::vector<ParamRef<S>> Network<S>::params() {
  std::vector<ParamRef<S>> out;
  auto add = [&](const std::string& name, Tensor<S>& value, Tensor<S>& grad) {
    out.push_back({name, &value, &grad});
  };
  for (std::size_t j = 0; j < modules.size(); ++j) {
    auto& mod = modules[j];
    const std::string p = cat("module", j, ".");
    if (mod.has_bottleneck) {
      add(p + "bottleneck.w", mod.bottleneck.w, mod.bottleneck.d_w);
      add(p + "bottleneck.b", mod.bottleneck.b, mod.bottleneck.d_b);
    }
    for (std::size_t bi = 0; bi < mod.branches.size(); ++bi) {
      add(cat(p, "branch", bi, ".w"), mod.branches[bi].w, mod.branches[bi].d_w);
      add(cat(p, "branch", bi, ".b"), mod.branches[bi].b, mod.branches[bi].d_b);
    }
    if (mod.has_maxpool) {
      add(p + "maxpool_proj.w", mod.maxpool_proj.w, mod.maxpool_proj.d_w);
      add(p + "maxpool_proj.b", mod.maxpool_proj.b, mod.maxpool_proj.d_b);
    }
    add(p + "norm.gamma", mod.norm.state.gamma, mod.norm.d_gamma);
    add(p + "norm.beta", mod.norm.state.beta, mod.norm.d_beta);
  }
  for (std::size_t s = 0; s < shortcuts.size(); ++s) {
    auto& sc = shortcuts[s];
    const std::string p = cat("shortcut", s, ".");
    add(p + "proj.w", sc.proj.w, sc.proj.d_w);
    add(p + "proj.b", sc.proj.b, sc.proj.d_b);
    add(p + "norm.gamma", sc.norm.state.gamma, sc.norm.d_gamma);
    add(p + "norm.beta", sc.norm.state.beta, sc.norm.d_beta);
  }
  add("head.w", head_w, d_head_w);
  add("head.b", head_b, d_head_b);
  return out;
}

template <typename S>
std::vector<ParamRef<S>> Network<S>::state_tensors() {
  // learnables in params() order with each norm block's running statistics
  // appended right after its beta
  std::vector<ParamRef<S>> out;
  for (auto& p : params()) {
    out.push_back(p);
    const auto& name = p.name;
    const auto pos = name.rfind(".norm.beta");
    if (pos != std::string::npos && pos + 10 == name.size()) {
      const std::string base = name.substr(0, pos);
      BatchNormState<S>* st = nullptr;
      for (std::size_t j = 0; j < modules.size(); ++j)
        if (base == cat("module", j)) st = &modules[j].norm.state;
      for (std::size_t s = 0; s < shortcuts.size(); ++s)
        if (base == cat("shortcut", s)) st = &shortcuts[s].norm.state;
      out.push_back({base + ".norm.running_mean", &st->running_mean, nullptr});
      out.push_back({base + ".norm.running_var", &st->running_var, nullptr});
    }
  }
  return out;
}

template <typename S>
void Network<S>::zero_grad() {
  for (auto& p : params()) p.grad->zero();
}

template <typename S>
void Network<S>::forward_logits(const std::vector<const Tensor<S>*>& inputs, Mode mode,
                                ForwardStash<S>* stash, std::vector<Tensor<S>>& logits) {
  const int n = static_cast<int>(inputs.size());
  check(n > 0, "forward: empty batch");
  for (int i = 0; i < n; ++i) {
    check(inputs[i]->rank() == 2 && inputs[i]->dim(0) == config.input_channels,
          "forward: series ", i, " must be [", config.input_channels, ",T], got ",
          shape_str(inputs[i]->shape));
    check(inputs[i]->dim(1) == inputs[0]->dim(1),
          "forward: all series in a batch must share one length");
  }
  const int depth = config.depth;

  ForwardStash<S> local;
  ForwardStash<S>& st = stash ? *stash : local;
  st.batch = n;
  st.inputs = inputs;
  auto size_grid = [&](std::vector<std::vector<Tensor<S>>>& g, std::size_t outer) {
    g.resize(outer);
    for (auto& row : g) row.resize(static_cast<std::size_t>(n));
  };
  size_grid(st.bneck, modules.size());
  size_grid(st.pooled, modules.size());
  size_grid(st.concat, modules.size());
  size_grid(st.out, modules.size());
  st.norm_stash.resize(modules.size());
  size_grid(st.sc_proj, shortcuts.size());
  size_grid(st.merged, shortcuts.size());
  st.sc_norm_stash.resize(shortcuts.size());
  st.gap.resize(static_cast<std::size_t>(n));

  auto stage_input = [&](int j, int i) -> const Tensor<S>& {
    if (j == 0) return *st.inputs[i];
    const int s = shortcut_at(j - 1);
    return s >= 0 ? st.merged[s][i] : st.out[j - 1][i];
  };

  for (int j = 0; j < depth; ++j) {
    auto& mod = modules[j];
    parallel_for(n, [&](int i) {
      const Tensor<S>& x = stage_input(j, i);
      const int t_len = x.dim(1);
      Tensor<S>& cc = st.concat[j][i];
      if (cc.shape != std::vector<int>{mod.out_channels, t_len})
        cc = Tensor<S>({mod.out_channels, t_len});
      const Tensor<S>* src = &x;
      if (mod.has_bottleneck) {
        conv1d_forward(x, mod.bottleneck.w, mod.bottleneck.b, Padding::same, 1, st.bneck[j][i]);
        src = &st.bneck[j][i];
      }
      Tensor<S> tmp;
      int row = 0;
      for (auto& br : mod.branches) {
        conv1d_forward(*src, br.w, br.b, Padding::same, 1, tmp);
        scatter_rows(tmp, cc, row);
        row += br.filters();
      }
      if (mod.has_maxpool) {
        maxpool1d_forward(x, mod.maxpool_window, 1, st.pooled[j][i]);
        conv1d_forward(st.pooled[j][i], mod.maxpool_proj.w, mod.maxpool_proj.b, Padding::same, 1,
                       tmp);
        scatter_rows(tmp, cc, row);
      }
    });

    {
      std::vector<const Tensor<S>*> ip(static_cast<std::size_t>(n));
      std::vector<Tensor<S>*> op(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        ip[i] = &st.concat[j][i];
        op[i] = &st.out[j][i];
      }
      batchnorm_forward(ip, op, mod.norm.state, mode, &st.norm_stash[j]);
    }
    parallel_for(n, [&](int i) { relu_forward(st.out[j][i], st.out[j][i]); });

    const int s = shortcut_at(j);
    if (s >= 0) {
      auto& sc = shortcuts[s];
      parallel_for(n, [&](int i) {
        conv1d_forward(stage_input(sc.from, i), sc.proj.w, sc.proj.b, Padding::same, 1,
                       st.sc_proj[s][i]);
      });
      std::vector<const Tensor<S>*> ip(static_cast<std::size_t>(n));
      std::vector<Tensor<S>*> op(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        ip[i] = &st.sc_proj[s][i];
        op[i] = &st.merged[s][i];
      }
      batchnorm_forward(ip, op, sc.norm.state, mode, &st.sc_norm_stash[s]);
      parallel_for(n, [&](int i) {
        Tensor<S>& m = st.merged[s][i];
        const Tensor<S>& a = st.out[j][i];
        for (std::size_t idx = 0; idx < m.data.size(); ++idx) {
          const S v = m.data[idx] + a.data[idx];
          m.data[idx] = v > S(0) ? v : S(0);
        }
      });
    }
  }

  logits.resize(static_cast<std::size_t>(n));
  parallel_for(n, [&](int i) {
    global_average_pool_forward(stage_input(depth, i), st.gap[i]);
    dense_forward(st.gap[i], head_w, head_b, logits[static_cast<std::size_t>(i)]);
  });
}

template <typename S>
void Network<S>::forward(const std::vector<const Tensor<S>*>& inputs, Mode mode,
                         std::vector<Tensor<S>>& probs) {
  std::vector<Tensor<S>> logits;
  forward_logits(inputs, mode, nullptr, logits);
  probs.resize(logits.size());
  parallel_for(static_cast<int>(logits.size()),
               [&](int i) { softmax(logits[static_cast<std::size_t>(i)], probs[i]); });
}

template <typename S>
void Network<S>::backward(const ForwardStash<S>& st, const std::vector<Tensor<S>>& d_logits,
                          std::vector<Tensor<S>>* d_inputs) {
  const int n = st.batch;
  const int depth = config.depth;
  check(n > 0 && static_cast<int>(d_logits.size()) == n,
        "backward: logit gradients must match the forward batch");
  check(static_cast<int>(st.concat.size()) == depth && static_cast<int>(st.gap.size()) == n,
        "backward: stash does not match this network");

  auto stage_input = [&](int j, int i) -> const Tensor<S>& {
    if (j == 0) return *st.inputs[i];
    const int s = shortcut_at(j - 1);
    return s >= 0 ? st.merged[s][i] : st.out[j - 1][i];
  };

  // d_stage[j][i]: gradient w.r.t. the input of module j (j == depth: head input)
  std::vector<std::vector<Tensor<S>>> d_stage(static_cast<std::size_t>(depth) + 1);
  for (int j = 0; j <= depth; ++j) {
    d_stage[j].resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) d_stage[j][i] = Tensor<S>(stage_input(j, i).shape);
  }

  // head: per-sample input gradients in parallel, weight gradients in sample order
  parallel_for(n, [&](int i) {
    Tensor<S> d_gap(st.gap[i].shape);
    dense_backward<S>(st.gap[i], head_w, d_logits[static_cast<std::size_t>(i)], &d_gap, nullptr,
                      nullptr);
    global_average_pool_backward(d_gap, stage_input(depth, i).dim(1), d_stage[depth][i]);
  });
  for (int i = 0; i < n; ++i)
    dense_backward<S>(st.gap[i], head_w, d_logits[static_cast<std::size_t>(i)], nullptr, &d_head_w,
                      &d_head_b);

  for (int j = depth - 1; j >= 0; --j) {
    auto& mod = modules[j];
    const int s = shortcut_at(j);

    // gradient w.r.t. this module's post-relu output (pre-merge)
    std::vector<Tensor<S>> d_sum;  // shortcut only: grad past the post-add relu
    std::vector<const Tensor<S>*> d_mod_out(static_cast<std::size_t>(n));
    if (s >= 0) {
      auto& sc = shortcuts[s];
      d_sum.resize(static_cast<std::size_t>(n));
      parallel_for(n, [&](int i) { relu_backward(st.merged[s][i], d_stage[j + 1][i], d_sum[i]); });

      std::vector<Tensor<S>> d_proj(static_cast<std::size_t>(n));
      {
        std::vector<const Tensor<S>*> ip(static_cast<std::size_t>(n)),
            go(static_cast<std::size_t>(n));
        std::vector<Tensor<S>*> dp(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
          ip[i] = &st.sc_proj[s][i];
          go[i] = &d_sum[i];
          d_proj[i] = Tensor<S>(st.sc_proj[s][i].shape);
          dp[i] = &d_proj[i];
        }
        batchnorm_backward(ip, sc.norm.state, st.sc_norm_stash[s], go, dp, &sc.norm.d_gamma,
                           &sc.norm.d_beta);
      }
      std::vector<Tensor<S>> lw(static_cast<std::size_t>(n)), lb(static_cast<std::size_t>(n));
      parallel_for(n, [&](int i) {
        lw[i] = Tensor<S>(sc.proj.w.shape);
        lb[i] = Tensor<S>(sc.proj.b.shape);
        conv1d_backward(stage_input(sc.from, i), sc.proj.w, d_proj[static_cast<std::size_t>(i)],
                        Padding::same, 1, &d_stage[sc.from][i], &lw[i], &lb[i]);
      });
      for (int i = 0; i < n; ++i) {
        add_into(sc.proj.d_w, lw[i]);
        add_into(sc.proj.d_b, lb[i]);
      }
      for (int i = 0; i < n; ++i) d_mod_out[i] = &d_sum[i];
    } else {
      for (int i = 0; i < n; ++i) d_mod_out[i] = &d_stage[j + 1][i];
    }

    // module-output relu, then batch normalization
    std::vector<Tensor<S>> d_bn_out(static_cast<std::size_t>(n));
    parallel_for(n, [&](int i) { relu_backward(st.out[j][i], *d_mod_out[i], d_bn_out[i]); });
    std::vector<Tensor<S>> d_concat(static_cast<std::size_t>(n));
    {
      std::vector<const Tensor<S>*> ip(static_cast<std::size_t>(n)),
          go(static_cast<std::size_t>(n));
      std::vector<Tensor<S>*> dp(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        ip[i] = &st.concat[j][i];
        go[i] = &d_bn_out[i];
        d_concat[i] = Tensor<S>(st.concat[j][i].shape);
        dp[i] = &d_concat[i];
      }
      batchnorm_backward(ip, mod.norm.state, st.norm_stash[j], go, dp, &mod.norm.d_gamma,
                         &mod.norm.d_beta);
    }

    // branch convolutions: per-sample local weight gradients, reduced in
    // sample order afterwards so results are identical for any worker count
    struct Local {
      Tensor<S> bneck_w, bneck_b, mp_w, mp_b;
      std::vector<Tensor<S>> br_w, br_b;
    };
    std::vector<Local> locals(static_cast<std::size_t>(n));
    parallel_for(n, [&](int i) {
      Local& loc = locals[static_cast<std::size_t>(i)];
      loc.br_w.resize(mod.branches.size());
      loc.br_b.resize(mod.branches.size());
      for (std::size_t bi = 0; bi < mod.branches.size(); ++bi) {
        loc.br_w[bi] = Tensor<S>(mod.branches[bi].w.shape);
        loc.br_b[bi] = Tensor<S>(mod.branches[bi].b.shape);
      }
      const Tensor<S>& x = stage_input(j, i);
      const Tensor<S>* src = mod.has_bottleneck ? &st.bneck[j][i] : &x;
      Tensor<S> d_src;
      Tensor<S>* d_branch_in = &d_stage[j][i];
      if (mod.has_bottleneck) {
        d_src = Tensor<S>(src->shape);
        d_branch_in = &d_src;
      }
      Tensor<S> d_br;
      int row = 0;
      for (std::size_t bi = 0; bi < mod.branches.size(); ++bi) {
        auto& br = mod.branches[bi];
        gather_rows(d_concat[static_cast<std::size_t>(i)], row, br.filters(), d_br);
        conv1d_backward(*src, br.w, d_br, Padding::same, 1, d_branch_in, &loc.br_w[bi],
                        &loc.br_b[bi]);
        row += br.filters();
      }
      if (mod.has_maxpool) {
        loc.mp_w = Tensor<S>(mod.maxpool_proj.w.shape);
        loc.mp_b = Tensor<S>(mod.maxpool_proj.b.shape);
        gather_rows(d_concat[static_cast<std::size_t>(i)], row, mod.maxpool_proj.filters(), d_br);
        Tensor<S> d_pooled(st.pooled[j][i].shape);
        conv1d_backward(st.pooled[j][i], mod.maxpool_proj.w, d_br, Padding::same, 1, &d_pooled,
                        &loc.mp_w, &loc.mp_b);
        maxpool1d_backward(x, mod.maxpool_window, 1, d_pooled, d_stage[j][i]);
      }
      if (mod.has_bottleneck) {
        loc.bneck_w = Tensor<S>(mod.bottleneck.w.shape);
        loc.bneck_b = Tensor<S>(mod.bottleneck.b.shape);
        conv1d_backward(x, mod.bottleneck.w, d_src, Padding::same, 1, &d_stage[j][i], &loc.bneck_w,
                        &loc.bneck_b);
      }
    });
    for (int i = 0; i < n; ++i) {
      Local& loc = locals[static_cast<std::size_t>(i)];
      for (std::size_t bi = 0; bi < mod.branches.size(); ++bi) {
        add_into(mod.branches[bi].d_w, loc.br_w[bi]);
        add_into(mod.branches[bi].d_b, loc.br_b[bi]);
      }
      if (mod.has_maxpool) {
        add_into(mod.maxpool_proj.d_w, loc.mp_w);
        add_into(mod.maxpool_proj.d_b, loc.mp_b);
      }
      if (mod.has_bottleneck) {
        add_into(mod.bottleneck.d_w, loc.bneck_w);
        add_into(mod.bottleneck.d_b, loc.bneck_b);
      }
    }
  }

  if (d_inputs) {
    d_inputs->resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) (*d_inputs)[i] = std::move(d_stage[0][i]);
  }
}

int receptive_field(const std::vector<int>& filter_lengths) {
  long long rf = 1;
  for (std::size_t i = 0; i < filter_lengths.size(); ++i) {
    check(filter_lengths[i] >= 1, "receptive field: filter length ", i, " must be >= 1, got ",
          filter_lengths[i]);
    rf += filter_lengths[i] - 1;
  }
  return static_cast<int>(rf);
}

int receptive_field(const NetworkConfig& config) {
  validate(config);
  const int kmax =
      *std::max_element(config.module.filter_lengths.begin(), config.module.filter_lengths.end());
  return receptive_field(std::vector<int>(static_cast<std::size_t>(config.depth), kmax));
}

template <typename S>
long long parameter_count(Network<S>& net, std::vector<ParamCount>* breakdown) {
  long long total = 0;
  if (breakdown) breakdown->clear();
  for (auto& p : net.params()) {
    const long long c = static_cast<long long>(p.value->size());
    total += c;
    if (breakdown) breakdown->push_back({p.name, c});
  }
  return total;
}

#define TSINCEPTION_INSTANTIATE_NETWORK(S)                                    \
  template struct ConvBlock<S>;                                               \
  template struct Network<S>;                                                 \
  template Network<S> build_network<S>(const NetworkConfig&, Rng&);           \
  template long long parameter_count<S>(Network<S>&, std::vector<ParamCount>*);

TSINCEPTION_INSTANTIATE_NETWORK(float)
TSINCEPTION_INSTANTIATE_NETWORK(double)

}  // namespace tsinception
