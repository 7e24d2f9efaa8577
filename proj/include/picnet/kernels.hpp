#pragma once

#include <cstddef>
#include <string>

namespace picnet::kernels {

// Inner-loop kernels behind every tensor operation. Two implementations
// exist: a scalar reference and an AVX2 variant, selected once at runtime.
//
// Contract: both variants produce bit-identical results. Elementwise
// kernels are trivially order-free; reductions (sum, dot) are DEFINED as
// four interleaved partial accumulators combined as ((a0+a1)+a2)+a3
// followed by a sequential tail, which is exactly what a 4-lane double
// vector computes. No FMA anywhere (the build also disables contraction),
// sqrt and division are correctly rounded, so dispatch can never change
// a training trajectory.
struct KernelTable {
  const char* name;

  // out[i] = a[i] + b[i]
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  // out[i] = a[i] - b[i]
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  // out[i] = a[i] * b[i]
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[i] = alpha * x[i]
  void (*scale)(double alpha, const double* x, double* out, std::size_t n);
  // y[i] += alpha
  void (*acc_scalar)(double alpha, double* y, std::size_t n);
  // y[i] += a[i] * b[i]
  void (*mul_acc)(const double* a, const double* b, double* y, std::size_t n);
  // sum of x in the 4-lane interleaved order described above
  double (*sum)(const double* x, std::size_t n);
  // dot product of x and y, same reduction order
  double (*dot)(const double* x, const double* y, std::size_t n);
  // out[i] = max(x[i], 0)
  void (*relu)(const double* x, double* out, std::size_t n);
  // dx[i] += x[i] > 0 ? g[i] : 0
  void (*relu_bwd_acc)(const double* x, const double* g, double* dx,
                       std::size_t n);
  // Bias-corrected Adam update for one parameter array. c1 = 1 - beta1^t,
  // c2 = 1 - beta2^t are precomputed by the caller. Gradients are consumed,
  // not zeroed here.
  void (*adam_update)(double* p, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double c1, double c2);
};

// Scalar reference implementation; always available.
const KernelTable& scalar_table();

// AVX2 implementation, or nullptr when the build or the CPU lacks it.
const KernelTable* avx2_table();

// The table used by all tensor ops. Picked once: AVX2 when the CPU
// supports it, overridable with PICNET_SIMD=scalar|avx2|auto.
const KernelTable& active();

// Name of the active table ("scalar" or "avx2"), for config echoes.
std::string active_name();

}  // namespace picnet::kernels
