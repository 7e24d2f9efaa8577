#pragma once

#include <vector>

#include "picnet/tensor.hpp"

namespace picnet::ops {

// Primitive differentiable operations. Every op validates shapes eagerly
// (no broadcasting anywhere), computes its value through the dispatched
// kernels, and records its backward rule on the active GradTape when any
// input requires gradients. Gradients accumulate additively, so a tensor
// used several times receives the sum over all paths.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
// Elementwise (Hadamard) product.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double alpha);

// Dense [M,K] x [K,N] product.
Tensor matmul(const Tensor& a, const Tensor& b);
// 2-D transpose.
Tensor transpose(const Tensor& x);
// out[i,:] = x[i,:] + v
Tensor add_rowvec(const Tensor& x, const Tensor& v);

// Cross-correlation convolutions (no kernel flip), zero padding.
// Bias tensors may be default-constructed to omit the bias term.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad);
// One filter per channel, no cross-channel mixing, no bias.
Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, int stride, int pad);
Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad);

// Ceil-mode average pooling; partial edge windows divide by the in-bounds
// element count, so constant inputs pool to the same constant exactly.
Tensor avg_pool2d(const Tensor& x, int kernel, int stride);

// Bilinear interpolation, half-pixel centers, clamped (align_corners=false).
// Evaluated in difference form so constant inputs upsample exactly.
Tensor bilinear_upsample(const Tensor& x, int out_h, int out_w);

// Row-wise softmax with max subtraction.
Tensor softmax_rows(const Tensor& x);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Concatenation along `axis`; every other extent must agree.
Tensor concat(const std::vector<Tensor>& xs, int axis);

// [B,C,H,W] -> [B,C] spatial mean.
Tensor global_avg_pool(const Tensor& x);

// sqrt of the sum of squares over all elements; gradient at the zero
// tensor is defined as zero.
Tensor frobenius_norm(const Tensor& x);

// Mean over the batch of log-sum-exp(logits_b) - logits_b[label_b].
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Sum of all elements.
Tensor sum(const Tensor& x);

// Layout ops (copying; gradients flow through the permutation).
Tensor reshape(const Tensor& x, Shape new_shape);
// [B,C,H,W] -> [B,H*W,C]: one token per spatial position.
Tensor grid_to_tokens(const Tensor& x);
// [B,T,C] -> [B,C,h,w] with T == h*w.
Tensor tokens_to_grid(const Tensor& x, int h, int w);
// Drops axis 0 at `index`.
Tensor select0(const Tensor& x, int index);
// Stacks equal-shaped tensors along a new leading axis.
Tensor stack0(const std::vector<Tensor>& xs);
// [B,C] -> [B,C,h,w], each channel scalar repeated over the plane. The
// one sanctioned broadcast, used by the channel-attention gate.
Tensor expand_spatial(const Tensor& g, int h, int w);

// Finite-difference oracle hygiene hook: while `watch` is set, relu()
// folds the smallest |input| it sees into *watch. Central differences are
// only valid away from the kink, so gradient-check drivers use this to
// reject sample points whose pre-activations sit within the step size.
void set_relu_watch(double* watch);

}  // namespace picnet::ops
