#include <cmath>
#include <cstddef>

#include "picnet/kernels.hpp"

namespace picnet::kernels {
namespace {

void k_add(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void k_sub(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void k_mul(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void k_axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void k_scale(double alpha, const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

void k_acc_scalar(double alpha, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha;
}

void k_mul_acc(const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

// Reference reduction order: four interleaved lanes, lanes combined as
// ((l0+l1)+l2)+l3, then a sequential tail. The AVX2 variant reproduces
// this exactly.
double k_sum(const double* x, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t n4 = n & ~std::size_t{3};
  for (std::size_t i = 0; i < n4; i += 4) {
    acc[0] += x[i + 0];
    acc[1] += x[i + 1];
    acc[2] += x[i + 2];
    acc[3] += x[i + 3];
  }
  double s = ((acc[0] + acc[1]) + acc[2]) + acc[3];
  for (std::size_t i = n4; i < n; ++i) s += x[i];
  return s;
}

double k_dot(const double* x, const double* y, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t n4 = n & ~std::size_t{3};
  for (std::size_t i = 0; i < n4; i += 4) {
    acc[0] += x[i + 0] * y[i + 0];
    acc[1] += x[i + 1] * y[i + 1];
    acc[2] += x[i + 2] * y[i + 2];
    acc[3] += x[i + 3] * y[i + 3];
  }
  double s = ((acc[0] + acc[1]) + acc[2]) + acc[3];
  for (std::size_t i = n4; i < n; ++i) s += x[i] * y[i];
  return s;
}

void k_relu(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void k_relu_bwd_acc(const double* x, const double* g, double* dx,
                    std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > 0.0) dx[i] += g[i];
  }
}

void k_adam_update(double* p, const double* g, double* m, double* v,
                   std::size_t n, double lr, double beta1, double beta2,
                   double eps, double c1, double c2) {
  const double om1 = 1.0 - beta1;
  const double om2 = 1.0 - beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double mi = beta1 * m[i] + om1 * g[i];
    const double vi = beta2 * v[i] + om2 * (g[i] * g[i]);
    m[i] = mi;
    v[i] = vi;
    const double mhat = mi / c1;
    const double vhat = vi / c2;
    p[i] = p[i] - lr * (mhat / (std::sqrt(vhat) + eps));
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table = {
      .name = "scalar",
      .add = k_add,
      .sub = k_sub,
      .mul = k_mul,
      .axpy = k_axpy,
      .scale = k_scale,
      .acc_scalar = k_acc_scalar,
      .mul_acc = k_mul_acc,
      .sum = k_sum,
      .dot = k_dot,
      .relu = k_relu,
      .relu_bwd_acc = k_relu_bwd_acc,
      .adam_update = k_adam_update,
  };
  return table;
}

}  // namespace picnet::kernels
