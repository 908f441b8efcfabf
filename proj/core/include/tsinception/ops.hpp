#pragma once

#include <vector>

#include "tsinception/tensor.hpp"

namespace tsinception {

enum class Padding { same, valid };
enum class Mode { train, infer };

// --- convolution (cross-correlation, no kernel flip) ------------------------
//
// input [M,T], weights [F,M,k], bias [F] -> output [F,T'].
// 'same' zero-pads floor((k-1)/2) on the left and ceil((k-1)/2) on the right,
// so T' == T at stride 1 for every k (even or odd).
// 'valid' requires k <= T and yields T' = (T - k)/stride + 1.

template <typename S>
void conv1d_forward(const Tensor<S>& in, const Tensor<S>& w, const Tensor<S>& b,
                    Padding padding, int stride, Tensor<S>& out);

// accumulates into any of d_in/d_w/d_b that are non-null (caller zeroes).
template <typename S>
void conv1d_backward(const Tensor<S>& in, const Tensor<S>& w, const Tensor<S>& d_out,
                     Padding padding, int stride, Tensor<S>* d_in, Tensor<S>* d_w,
                     Tensor<S>* d_b);

// --- max pooling -------------------------------------------------------------
//
// same-length pooling: the window at position t covers
// [t - ceil((w-1)/2), t + floor((w-1)/2)] clipped to valid positions, so the
// zero padding is never a candidate maximum (windows lean LEFT for even w,
// the opposite of the conv convention above; both follow from the reference
// cases in the tests).

template <typename S>
void maxpool1d_forward(const Tensor<S>& in, int window, int stride, Tensor<S>& out);

// routes each output gradient to the first (leftmost) maximum of its window.
template <typename S>
void maxpool1d_backward(const Tensor<S>& in, int window, int stride, const Tensor<S>& d_out,
                        Tensor<S>& d_in);

// --- relu --------------------------------------------------------------------

template <typename S>
void relu_forward(const Tensor<S>& in, Tensor<S>& out);

// subgradient 0 at x == 0; the mask is recovered from the forward output
template <typename S>
void relu_backward(const Tensor<S>& out, const Tensor<S>& d_out, Tensor<S>& d_in);

// --- global average pool / dense / softmax -----------------------------------

template <typename S>
void global_average_pool_forward(const Tensor<S>& in, Tensor<S>& out);  // [M,T] -> [M]

template <typename S>
void global_average_pool_backward(const Tensor<S>& d_out, int length, Tensor<S>& d_in);

template <typename S>
void dense_forward(const Tensor<S>& in, const Tensor<S>& w, const Tensor<S>& b,
                   Tensor<S>& out);  // in [M], w [C,M], b [C] -> out [C]

template <typename S>
void dense_backward(const Tensor<S>& in, const Tensor<S>& w, const Tensor<S>& d_out,
                    Tensor<S>* d_in, Tensor<S>* d_w, Tensor<S>* d_b);

// numerically stable softmax (max subtraction); probs sum to 1
template <typename S>
void softmax(const Tensor<S>& logits, Tensor<S>& probs);

// loss = -log p[label]; label is 1-based. d_logits = probs - onehot(label).
// returns the loss; probs/d_logits are resized as needed.
template <typename S>
S softmax_cross_entropy(const Tensor<S>& logits, int label, Tensor<S>* probs,
                        Tensor<S>* d_logits);

// --- batch normalization ------------------------------------------------------
//
// per-channel normalization over batch x time. train mode uses batch
// statistics (population variance) and updates running statistics with
// momentum 0.9 (running = 0.9*running + 0.1*batch); infer mode uses the
// running statistics. a train-mode batch of fewer than 2 series falls back to
// the running statistics and leaves them unchanged.

template <typename S>
struct BatchNormState {
  Tensor<S> gamma, beta;               // learnable scale/shift [M]
  Tensor<S> running_mean, running_var; // state, excluded from parameter counts
  double momentum = 0.9;
  double eps = 1e-5;

  explicit BatchNormState(int channels = 1)
      : gamma({channels}), beta({channels}), running_mean({channels}), running_var({channels}) {
    gamma.fill(S(1));
    running_var.fill(S(1));
  }
  int channels() const { return gamma.dim(0); }
};

struct BatchNormStash {
  std::vector<double> mean, inv_std;  // batch statistics per channel
  bool used_batch_stats = false;
};

template <typename S>
void batchnorm_forward(const std::vector<const Tensor<S>*>& in, std::vector<Tensor<S>*>& out,
                       BatchNormState<S>& state, Mode mode, BatchNormStash* stash);

// gradients for the whole batch; d_in[i] accumulates, d_gamma/d_beta accumulate.
template <typename S>
void batchnorm_backward(const std::vector<const Tensor<S>*>& in, const BatchNormState<S>& state,
                        const BatchNormStash& stash, const std::vector<const Tensor<S>*>& d_out,
                        std::vector<Tensor<S>*>& d_in, Tensor<S>* d_gamma, Tensor<S>* d_beta);

}  // namespace tsinception
