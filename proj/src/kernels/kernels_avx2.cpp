// AVX2 kernel variants. This translation unit alone is compiled with
// -mavx2; callers go through the runtime-dispatched table so the binary
// still runs on CPUs without AVX2.
//
// Bit-exactness with the scalar reference relies on three things: mul and
// add stay separate instructions (no FMA; contraction is disabled
// build-wide), reductions keep the scalar path's 4-lane interleaved order,
// and vsqrtpd/vdivpd are correctly rounded.

#include "picnet/kernels.hpp"

#if defined(__AVX2__)

#include <immintrin.h>

#include <cmath>
#include <cstddef>

namespace picnet::kernels {
namespace {

void k_add(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void k_sub(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void k_mul(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void k_axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void k_scale(double alpha, const double* x, double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = alpha * x[i];
}

void k_acc_scalar(double alpha, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), va));
  }
  for (; i < n; ++i) y[i] += alpha;
}

void k_mul_acc(const double* a, const double* b, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod =
        _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += a[i] * b[i];
}

// Lane j of the vector accumulator is exactly the scalar reference's
// acc[j]; the horizontal combine keeps the ((l0+l1)+l2)+l3 order.
double horizontal_sum(__m256d acc) {
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  return ((lanes[0] + lanes[1]) + lanes[2]) + lanes[3];
}

double k_sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t n4 = n & ~std::size_t{3};
  for (std::size_t i = 0; i < n4; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  }
  double s = horizontal_sum(acc);
  for (std::size_t i = n4; i < n; ++i) s += x[i];
  return s;
}

double k_dot(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t n4 = n & ~std::size_t{3};
  for (std::size_t i = 0; i < n4; i += 4) {
    acc = _mm256_add_pd(
        acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  double s = horizontal_sum(acc);
  for (std::size_t i = n4; i < n; ++i) s += x[i] * y[i];
  return s;
}

void k_relu(const double* x, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    // max(x, 0) with x as the first operand matches the scalar ternary,
    // including the x == -0.0 case.
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void k_relu_bwd_acc(const double* x, const double* g, double* dx,
                    std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d gated = _mm256_and_pd(mask, _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), gated));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0) dx[i] += g[i];
  }
}

void k_adam_update(double* p, const double* g, double* m, double* v,
                   std::size_t n, double lr, double beta1, double beta2,
                   double eps, double c1, double c2) {
  const double om1 = 1.0 - beta1;
  const double om2 = 1.0 - beta2;
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d vom1 = _mm256_set1_pd(om1);
  const __m256d vom2 = _mm256_set1_pd(om2);
  const __m256d vc1 = _mm256_set1_pd(c1);
  const __m256d vc2 = _mm256_set1_pd(c2);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vlr = _mm256_set1_pd(lr);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gi = _mm256_loadu_pd(g + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)),
                                     _mm256_mul_pd(vom1, gi));
    const __m256d vi =
        _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                      _mm256_mul_pd(vom2, _mm256_mul_pd(gi, gi)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d mhat = _mm256_div_pd(mi, vc1);
    const __m256d vhat = _mm256_div_pd(vi, vc2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
    const __m256d step = _mm256_mul_pd(vlr, _mm256_div_pd(mhat, denom));
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  for (; i < n; ++i) {
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

const KernelTable* avx2_table() {
  static const KernelTable table = {
      .name = "avx2",
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
  return &table;
}

}  // namespace picnet::kernels

#else  // !__AVX2__

namespace picnet::kernels {

const KernelTable* avx2_table() { return nullptr; }

}  // namespace picnet::kernels

#endif
