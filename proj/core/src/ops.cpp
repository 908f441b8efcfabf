#include "tsinception/ops.hpp"

#include <algorithm>
#include <cmath>

#include "tsinception/error.hpp"

namespace tsinception {

namespace {

template <typename S>
void ensure_shape(Tensor<S>& t, std::vector<int> sh) {
  if (t.shape != sh) t = Tensor<S>(std::move(sh));
}

struct ConvDims {
  int M, T, F, k, pad_l, To;
};

template <typename S>
ConvDims conv_dims(const Tensor<S>& in, const Tensor<S>& w, Padding padding, int stride) {
  check(in.rank() == 2, "conv1d: input must be [channels,length], got ", shape_str(in.shape));
  check(w.rank() == 3, "conv1d: weights must be [filters,channels,k], got ", shape_str(w.shape));
  check(stride > 0, "conv1d: stride must be positive, got ", stride);
  ConvDims d;
  d.M = in.dim(0);
  d.T = in.dim(1);
  d.F = w.dim(0);
  d.k = w.dim(2);
  check(w.dim(1) == d.M, "conv1d: weight channels ", w.dim(1), " do not match input channels ",
        d.M);
  if (padding == Padding::same) {
    // floor((k-1)/2) zeros left, ceil((k-1)/2) right; T' = ceil(T/stride)
    d.pad_l = (d.k - 1) / 2;
    d.To = (d.T - 1) / stride + 1;
  } else {
    check(d.k <= d.T, "conv1d: valid padding needs k <= length, got k=", d.k, " length=", d.T);
    d.pad_l = 0;
    d.To = (d.T - d.k) / stride + 1;
  }
  return d;
}

}  // namespace

template <typename S>
void conv1d_forward(const Tensor<S>& in, const Tensor<S>& w, const Tensor<S>& b, Padding padding,
                    int stride, Tensor<S>& out) {
  const ConvDims d = conv_dims(in, w, padding, stride);
  check(b.rank() == 1 && b.dim(0) == d.F, "conv1d: bias must be [", d.F, "], got ",
        shape_str(b.shape));
  ensure_shape(out, {d.F, d.To});
  const S* wd = w.data.data();
  for (int f = 0; f < d.F; ++f) {
    S* orow = out.row(f);
    std::fill(orow, orow + d.To, b(f));
    for (int c = 0; c < d.M; ++c) {
      const S* irow = in.row(c);
      const S* wrow = wd + (static_cast<std::size_t>(f) * d.M + c) * d.k;
      if (stride == 1) {
        for (int j = 0; j < d.k; ++j) {
          const S wv = wrow[j];
          const int off = j - d.pad_l;  // input index = t + off
          const int t0 = std::max(0, -off);
          const int t1 = std::min(d.To, d.T - off);
          const S* ip = irow + off;
          for (int t = t0; t < t1; ++t) orow[t] += wv * ip[t];
        }
      } else {
        for (int t = 0; t < d.To; ++t) {
          S acc = S(0);
          const int base = t * stride - d.pad_l;
          const int j0 = std::max(0, -base);
          const int j1 = std::min(d.k, d.T - base);
          for (int j = j0; j < j1; ++j) acc += wrow[j] * irow[base + j];
          orow[t] += acc;
        }
      }
    }
  }
}

template <typename S>
void conv1d_backward(const Tensor<S>& in, const Tensor<S>& w, const Tensor<S>& d_out,
                     Padding padding, int stride, Tensor<S>* d_in, Tensor<S>* d_w, Tensor<S>* d_b) {
  const ConvDims d = conv_dims(in, w, padding, stride);
  check(d_out.rank() == 2 && d_out.dim(0) == d.F && d_out.dim(1) == d.To,
        "conv1d: upstream gradient must be [", d.F, ",", d.To, "], got ", shape_str(d_out.shape));
  if (d_in) check(d_in->same_shape(in), "conv1d: d_in shape mismatch");
  if (d_w) check(d_w->same_shape(w), "conv1d: d_w shape mismatch");

  if (d_b) {
    check(d_b->rank() == 1 && d_b->dim(0) == d.F, "conv1d: d_b shape mismatch");
    for (int f = 0; f < d.F; ++f) {
      const S* grow = d_out.row(f);
      double acc = 0.0;
      for (int t = 0; t < d.To; ++t) acc += static_cast<double>(grow[t]);
      (*d_b)(f) += static_cast<S>(acc);
    }
  }

  const S* wd = w.data.data();
  S* dwd = d_w ? d_w->data.data() : nullptr;
  for (int f = 0; f < d.F; ++f) {
    const S* grow = d_out.row(f);
    for (int c = 0; c < d.M; ++c) {
      const S* irow = in.row(c);
      S* dirow = d_in ? d_in->row(c) : nullptr;
      const std::size_t wbase = (static_cast<std::size_t>(f) * d.M + c) * d.k;
      if (stride == 1) {
        for (int j = 0; j < d.k; ++j) {
          const int off = j - d.pad_l;
          const int t0 = std::max(0, -off);
          const int t1 = std::min(d.To, d.T - off);
          if (d_w) {
            const S* ip = irow + off;
            S acc = S(0);
            for (int t = t0; t < t1; ++t) acc += grow[t] * ip[t];
            dwd[wbase + j] += acc;
          }
          if (d_in) {
            const S wv = wd[wbase + j];
            S* dp = dirow + off;
            for (int t = t0; t < t1; ++t) dp[t] += wv * grow[t];
          }
        }
      } else {
        for (int t = 0; t < d.To; ++t) {
          const int base = t * stride - d.pad_l;
          const int j0 = std::max(0, -base);
          const int j1 = std::min(d.k, d.T - base);
          const S g = grow[t];
          for (int j = j0; j < j1; ++j) {
            if (d_w) dwd[wbase + j] += g * irow[base + j];
            if (d_in) dirow[base + j] += wd[wbase + j] * g;
          }
        }
      }
    }
  }
}

template <typename S>
void maxpool1d_forward(const Tensor<S>& in, int window, int stride, Tensor<S>& out) {
  check(in.rank() == 2, "maxpool1d: input must be [channels,length], got ", shape_str(in.shape));
  check(window > 0, "maxpool1d: window must be positive, got ", window);
  check(stride > 0, "maxpool1d: stride must be positive, got ", stride);
  const int M = in.dim(0), T = in.dim(1);
  const int To = (T - 1) / stride + 1;
  const int reach_l = window / 2, reach_r = (window - 1) / 2;
  ensure_shape(out, {M, To});
  for (int c = 0; c < M; ++c) {
    const S* irow = in.row(c);
    S* orow = out.row(c);
    for (int t = 0; t < To; ++t) {
      const int center = t * stride;
      const int lo = std::max(0, center - reach_l);
      const int hi = std::min(T - 1, center + reach_r);
      S best = irow[lo];
      for (int s = lo + 1; s <= hi; ++s) best = std::max(best, irow[s]);
      orow[t] = best;
    }
  }
}

template <typename S>
void maxpool1d_backward(const Tensor<S>& in, int window, int stride, const Tensor<S>& d_out,
                        Tensor<S>& d_in) {
  check(window > 0, "maxpool1d: window must be positive, got ", window);
  check(stride > 0, "maxpool1d: stride must be positive, got ", stride);
  const int M = in.dim(0), T = in.dim(1);
  const int To = (T - 1) / stride + 1;
  check(d_out.rank() == 2 && d_out.dim(0) == M && d_out.dim(1) == To,
        "maxpool1d: upstream gradient must be [", M, ",", To, "], got ", shape_str(d_out.shape));
  check(d_in.same_shape(in), "maxpool1d: d_in shape mismatch");
  const int reach_l = window / 2, reach_r = (window - 1) / 2;
  for (int c = 0; c < M; ++c) {
    const S* irow = in.row(c);
    const S* grow = d_out.row(c);
    S* drow = d_in.row(c);
    for (int t = 0; t < To; ++t) {
      const int center = t * stride;
      const int lo = std::max(0, center - reach_l);
      const int hi = std::min(T - 1, center + reach_r);
      int arg = lo;
      for (int s = lo + 1; s <= hi; ++s)
        if (irow[s] > irow[arg]) arg = s;  // strict: ties go to the first maximum
      drow[arg] += grow[t];
    }
  }
}

template <typename S>
void relu_forward(const Tensor<S>& in, Tensor<S>& out) {
  ensure_shape(out, in.shape);
  const S* ip = in.data.data();
  S* op = out.data.data();
  const std::size_t n = in.size();
  for (std::size_t i = 0; i < n; ++i) op[i] = ip[i] > S(0) ? ip[i] : S(0);
}

template <typename S>
void relu_backward(const Tensor<S>& out, const Tensor<S>& d_out, Tensor<S>& d_in) {
  check(out.same_shape(d_out), "relu: output/gradient shape mismatch");
  ensure_shape(d_in, out.shape);
  const S* op = out.data.data();
  const S* gp = d_out.data.data();
  S* dp = d_in.data.data();
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) dp[i] = op[i] > S(0) ? gp[i] : S(0);
}

template <typename S>
void global_average_pool_forward(const Tensor<S>& in, Tensor<S>& out) {
  check(in.rank() == 2, "gap: input must be [channels,length], got ", shape_str(in.shape));
  const int M = in.dim(0), T = in.dim(1);
  ensure_shape(out, {M});
  for (int c = 0; c < M; ++c) {
    const S* irow = in.row(c);
    double acc = 0.0;
    for (int t = 0; t < T; ++t) acc += static_cast<double>(irow[t]);
    out(c) = static_cast<S>(acc / T);
  }
}

template <typename S>
void global_average_pool_backward(const Tensor<S>& d_out, int length, Tensor<S>& d_in) {
  check(d_out.rank() == 1, "gap: upstream gradient must be [channels], got ",
        shape_str(d_out.shape));
  check(length > 0, "gap: length must be positive, got ", length);
  const int M = d_out.dim(0);
  ensure_shape(d_in, {M, length});
  for (int c = 0; c < M; ++c) {
    const S v = static_cast<S>(static_cast<double>(d_out(c)) / length);
    S* drow = d_in.row(c);
    std::fill(drow, drow + length, v);
  }
}

template <typename S>
void dense_forward(const Tensor<S>& in, const Tensor<S>& w, const Tensor<S>& b, Tensor<S>& out) {
  check(in.rank() == 1, "dense: input must be [features], got ", shape_str(in.shape));
  check(w.rank() == 2, "dense: weights must be [classes,features], got ", shape_str(w.shape));
  const int M = in.dim(0), C = w.dim(0);
  check(w.dim(1) == M, "dense: weight features ", w.dim(1), " do not match input features ", M);
  check(b.rank() == 1 && b.dim(0) == C, "dense: bias must be [", C, "], got ", shape_str(b.shape));
  ensure_shape(out, {C});
  for (int i = 0; i < C; ++i) {
    const S* wrow = w.row(i);
    double acc = static_cast<double>(b(i));
    for (int j = 0; j < M; ++j) acc += static_cast<double>(wrow[j]) * in(j);
    out(i) = static_cast<S>(acc);
  }
}

template <typename S>
void dense_backward(const Tensor<S>& in, const Tensor<S>& w, const Tensor<S>& d_out,
                    Tensor<S>* d_in, Tensor<S>* d_w, Tensor<S>* d_b) {
  const int M = in.dim(0), C = w.dim(0);
  check(d_out.rank() == 1 && d_out.dim(0) == C, "dense: upstream gradient must be [", C,
        "], got ", shape_str(d_out.shape));
  if (d_b) {
    check(d_b->same_shape(d_out), "dense: d_b shape mismatch");
    for (int i = 0; i < C; ++i) (*d_b)(i) += d_out(i);
  }
  if (d_w) {
    check(d_w->same_shape(w), "dense: d_w shape mismatch");
    for (int i = 0; i < C; ++i) {
      S* dwrow = d_w->row(i);
      const S g = d_out(i);
      for (int j = 0; j < M; ++j) dwrow[j] += g * in(j);
    }
  }
  if (d_in) {
    check(d_in->same_shape(in), "dense: d_in shape mismatch");
    for (int j = 0; j < M; ++j) {
      double acc = 0.0;
      for (int i = 0; i < C; ++i)
        acc += static_cast<double>(w(i, j)) * static_cast<double>(d_out(i));
      (*d_in)(j) += static_cast<S>(acc);
    }
  }
}

template <typename S>
void softmax(const Tensor<S>& logits, Tensor<S>& probs) {
  check(logits.rank() == 1, "softmax: logits must be [classes], got ", shape_str(logits.shape));
  const int C = logits.dim(0);
  ensure_shape(probs, {C});
  double mx = static_cast<double>(logits(0));
  for (int i = 1; i < C; ++i) mx = std::max(mx, static_cast<double>(logits(i)));
  double z = 0.0;
  for (int i = 0; i < C; ++i) {
    const double e = std::exp(static_cast<double>(logits(i)) - mx);
    probs(i) = static_cast<S>(e);
    z += e;
  }
  for (int i = 0; i < C; ++i) probs(i) = static_cast<S>(static_cast<double>(probs(i)) / z);
}

template <typename S>
S softmax_cross_entropy(const Tensor<S>& logits, int label, Tensor<S>* probs,
                        Tensor<S>* d_logits) {
  check(logits.rank() == 1, "softmax: logits must be [classes], got ", shape_str(logits.shape));
  const int C = logits.dim(0);
  check(label >= 1 && label <= C, "cross entropy: label must be in [1,", C, "], got ", label);
  double mx = static_cast<double>(logits(0));
  for (int i = 1; i < C; ++i) mx = std::max(mx, static_cast<double>(logits(i)));
  double z = 0.0;
  for (int i = 0; i < C; ++i) z += std::exp(static_cast<double>(logits(i)) - mx);
  const double loss = std::log(z) - (static_cast<double>(logits(label - 1)) - mx);
  if (probs || d_logits) {
    if (probs) ensure_shape(*probs, {C});
    if (d_logits) ensure_shape(*d_logits, {C});
    for (int i = 0; i < C; ++i) {
      const double p = std::exp(static_cast<double>(logits(i)) - mx) / z;
      if (probs) (*probs)(i) = static_cast<S>(p);
      if (d_logits) (*d_logits)(i) = static_cast<S>(p - (i == label - 1 ? 1.0 : 0.0));
    }
  }
  return static_cast<S>(loss);
}

template <typename S>
void batchnorm_forward(const std::vector<const Tensor<S>*>& in, std::vector<Tensor<S>*>& out,
                       BatchNormState<S>& state, Mode mode, BatchNormStash* stash) {
  const int M = state.channels();
  const int N = static_cast<int>(in.size());
  check(N > 0, "batchnorm: empty batch");
  check(in.size() == out.size(), "batchnorm: input/output batch sizes differ");
  for (int i = 0; i < N; ++i) {
    check(in[i]->rank() == 2 && in[i]->dim(0) == M, "batchnorm: series ", i, " must have ", M,
          " channels, got ", shape_str(in[i]->shape));
    check(in[i]->same_shape(*in[0]), "batchnorm: series ", i, " shape differs from series 0");
    ensure_shape(*out[i], in[i]->shape);
  }
  const int T = in[0]->dim(1);
  const bool use_batch = (mode == Mode::train) && N >= 2;

  std::vector<double> mean(M), inv_std(M);
  if (use_batch) {
    const double n = static_cast<double>(N) * T;
    for (int c = 0; c < M; ++c) {
      double s = 0.0;
      for (int i = 0; i < N; ++i) {
        const S* row = in[i]->row(c);
        for (int t = 0; t < T; ++t) s += static_cast<double>(row[t]);
      }
      const double mu = s / n;
      double sq = 0.0;
      for (int i = 0; i < N; ++i) {
        const S* row = in[i]->row(c);
        for (int t = 0; t < T; ++t) {
          const double d = static_cast<double>(row[t]) - mu;
          sq += d * d;
        }
      }
      const double var = sq / n;  // population variance
      mean[c] = mu;
      inv_std[c] = 1.0 / std::sqrt(var + state.eps);
      state.running_mean(c) = static_cast<S>(state.momentum *
                                                 static_cast<double>(state.running_mean(c)) +
                                             (1.0 - state.momentum) * mu);
      state.running_var(c) = static_cast<S>(state.momentum *
                                                static_cast<double>(state.running_var(c)) +
                                            (1.0 - state.momentum) * var);
    }
  } else {
    for (int c = 0; c < M; ++c) {
      mean[c] = static_cast<double>(state.running_mean(c));
      inv_std[c] = 1.0 / std::sqrt(static_cast<double>(state.running_var(c)) + state.eps);
    }
  }

  for (int c = 0; c < M; ++c) {
    const S g = static_cast<S>(static_cast<double>(state.gamma(c)) * inv_std[c]);
    const S shift = static_cast<S>(static_cast<double>(state.beta(c)) -
                                   static_cast<double>(state.gamma(c)) * inv_std[c] * mean[c]);
    for (int i = 0; i < N; ++i) {
      const S* x = in[i]->row(c);
      S* y = out[i]->row(c);
      for (int t = 0; t < T; ++t) y[t] = g * x[t] + shift;
    }
  }

  if (stash) {
    stash->mean = std::move(mean);
    stash->inv_std = std::move(inv_std);
    stash->used_batch_stats = use_batch;
  }
}

template <typename S>
void batchnorm_backward(const std::vector<const Tensor<S>*>& in, const BatchNormState<S>& state,
                        const BatchNormStash& stash, const std::vector<const Tensor<S>*>& d_out,
                        std::vector<Tensor<S>*>& d_in, Tensor<S>* d_gamma, Tensor<S>* d_beta) {
  const int M = state.channels();
  const int N = static_cast<int>(in.size());
  check(N > 0, "batchnorm: empty batch");
  check(d_out.size() == in.size() && d_in.size() == in.size(),
        "batchnorm: batch sizes differ between tensors");
  check(static_cast<int>(stash.mean.size()) == M, "batchnorm: stash does not match state");
  const int T = in[0]->dim(1);
  const double n = static_cast<double>(N) * T;

  for (int c = 0; c < M; ++c) {
    const double mu = stash.mean[c];
    const double istd = stash.inv_std[c];
    const double gamma = static_cast<double>(state.gamma(c));

    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int i = 0; i < N; ++i) {
      const S* x = in[i]->row(c);
      const S* dy = d_out[i]->row(c);
      for (int t = 0; t < T; ++t) {
        const double g = static_cast<double>(dy[t]);
        sum_dy += g;
        sum_dy_xhat += g * (static_cast<double>(x[t]) - mu) * istd;
      }
    }
    if (d_gamma) (*d_gamma)(c) += static_cast<S>(sum_dy_xhat);
    if (d_beta) (*d_beta)(c) += static_cast<S>(sum_dy);

    if (stash.used_batch_stats) {
      // batch statistics depend on x: full normalization gradient
      const double scale = gamma * istd / n;
      for (int i = 0; i < N; ++i) {
        const S* x = in[i]->row(c);
        const S* dy = d_out[i]->row(c);
        S* dx = d_in[i]->row(c);
        for (int t = 0; t < T; ++t) {
          const double xhat = (static_cast<double>(x[t]) - mu) * istd;
          dx[t] += static_cast<S>(scale *
                                  (n * static_cast<double>(dy[t]) - sum_dy - xhat * sum_dy_xhat));
        }
      }
    } else {
      // running statistics are constants w.r.t. x
      const double scale = gamma * istd;
      for (int i = 0; i < N; ++i) {
        const S* dy = d_out[i]->row(c);
        S* dx = d_in[i]->row(c);
        for (int t = 0; t < T; ++t) dx[t] += static_cast<S>(scale * static_cast<double>(dy[t]));
      }
    }
  }
}

#define TSINCEPTION_INSTANTIATE_OPS(S)                                                             \
  template void conv1d_forward<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, Padding,   \
                                  int, Tensor<S>&);                                                \
  template void conv1d_backward<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, Padding,  \
                                   int, Tensor<S>*, Tensor<S>*, Tensor<S>*);                       \
  template void maxpool1d_forward<S>(const Tensor<S>&, int, int, Tensor<S>&);                      \
  template void maxpool1d_backward<S>(const Tensor<S>&, int, int, const Tensor<S>&, Tensor<S>&);   \
  template void relu_forward<S>(const Tensor<S>&, Tensor<S>&);                                     \
  template void relu_backward<S>(const Tensor<S>&, const Tensor<S>&, Tensor<S>&);                  \
  template void global_average_pool_forward<S>(const Tensor<S>&, Tensor<S>&);                      \
  template void global_average_pool_backward<S>(const Tensor<S>&, int, Tensor<S>&);                \
  template void dense_forward<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&,             \
                                 Tensor<S>&);                                                      \
  template void dense_backward<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&,            \
                                  Tensor<S>*, Tensor<S>*, Tensor<S>*);                             \
  template void softmax<S>(const Tensor<S>&, Tensor<S>&);                                          \
  template S softmax_cross_entropy<S>(const Tensor<S>&, int, Tensor<S>*, Tensor<S>*);              \
  template void batchnorm_forward<S>(const std::vector<const Tensor<S>*>&,                         \
                                     std::vector<Tensor<S>*>&, BatchNormState<S>&, Mode,           \
                                     BatchNormStash*);                                             \
  template void batchnorm_backward<S>(const std::vector<const Tensor<S>*>&,                        \
                                      const BatchNormState<S>&, const BatchNormStash&,             \
                                      const std::vector<const Tensor<S>*>&,                        \
                                      std::vector<Tensor<S>*>&, Tensor<S>*, Tensor<S>*);

TSINCEPTION_INSTANTIATE_OPS(float)
TSINCEPTION_INSTANTIATE_OPS(double)

}  // namespace tsinception
