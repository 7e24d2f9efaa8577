#pragma once

// Shared helpers for op implementations.

#include <memory>

#include "picnet/errors.hpp"
#include "picnet/kernels.hpp"
#include "picnet/tape.hpp"
#include "picnet/tensor.hpp"

namespace picnet::ops::detail {

inline const kernels::KernelTable& K() { return kernels::active(); }

// Gradient buffer of a node, zero-allocated on first use.
inline double* gbuf(const std::shared_ptr<TensorNode>& n) {
  if (n->grad.empty()) n->grad.assign(n->data.size(), 0.0);
  return n->grad.data();
}

// Upstream gradient, or nullptr when the output never received one
// (i.e. it is not on any path to the loss); such entries are no-ops.
inline const double* upstream(const std::shared_ptr<TensorNode>& n) {
  return n->grad.empty() ? nullptr : n->grad.data();
}

inline void check_same_shape(const Tensor& a, const Tensor& b,
                             const char* op) {
  if (!same_shape(a.shape(), b.shape())) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

inline void check_ndim(const Tensor& t, int nd, const char* op) {
  if (t.ndim() != nd) {
    throw ShapeError(std::string(op) + ": expected " + std::to_string(nd) +
                     "-d tensor, got " + shape_str(t.shape()));
  }
}

}  // namespace picnet::ops::detail
