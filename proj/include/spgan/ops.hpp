#pragma once

#include <initializer_list>
#include <vector>

#include "spgan/tensor.hpp"

namespace spgan {

// Zero padding, one extent per image edge.
struct Pad4 {
  int left = 0;
  int right = 0;
  int top = 0;
  int bottom = 0;
};
inline Pad4 pad_all(int p) { return {p, p, p, p}; }

enum class Pointwise { relu, leaky_relu, sigmoid };

// --- convolutions -----------------------------------------------------
//
// Image tensors are rank-3 (C,H,W); batching is handled by the caller
// (training runs batch 1). Kernels: conv2d takes (C_out,C_in,k,k),
// conv_transpose2d takes (C_in,C_out,k,k). Bias is per output channel.

// Output H' = floor((H + top + bottom - k)/stride) + 1, same for W.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, Pad4 pad);

// Adjoint of conv2d with symmetric padding: H' = (H-1)*stride - 2*pad + k.
Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel,
                        const Tensor& bias, int stride, int pad);

// --- normalization / activations ---------------------------------------

// Per-channel (x - mean)/sqrt(var + eps); no learned affine.
Tensor instance_norm(const Tensor& input, double eps = 1e-5);

// Elementwise; relu subgradient at 0 is 0, leaky slope applies at x <= 0.
Tensor pointwise(const Tensor& input, Pointwise kind, double alpha = 0.0);
inline Tensor relu(const Tensor& x) { return pointwise(x, Pointwise::relu); }
inline Tensor leaky_relu(const Tensor& x, double alpha) {
  return pointwise(x, Pointwise::leaky_relu, alpha);
}
inline Tensor sigmoid(const Tensor& x) {
  return pointwise(x, Pointwise::sigmoid);
}

// Softmax across the channel axis per pixel, max-subtracted for stability.
Tensor channel_softmax(const Tensor& input);

// Channel-axis concatenation; all spatial extents must match.
Tensor concat_channels(const std::vector<Tensor>& inputs);

// --- losses -------------------------------------------------------------

// Mean of -[t ln p + (1-t) ln(1-p)], p clamped to [1e-12, 1-1e-12].
Tensor bce_loss(const Tensor& prob, const Tensor& target);

// Mean absolute difference; subgradient 0 at ties.
Tensor l1_loss(const Tensor& a, const Tensor& b);

// --- small helpers (plumbing for losses, tests and the RF oracle) -------

Tensor sum(const Tensor& x);
// sum_i coeffs[i] * x[i]; coeffs are constants.
Tensor weighted_sum(const Tensor& x, const std::vector<double>& coeffs);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
// One element of a rank-3 tensor as a scalar.
Tensor pick(const Tensor& x, int c, int y, int xcol);

}  // namespace spgan
