#include <cmath>
#include <cstddef>

#include "ops_common.hpp"
#include "picnet/ops.hpp"

namespace picnet::ops {

using detail::gbuf;
using detail::K;
using detail::upstream;

Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "add");
  const std::size_t n = a.data().size();
  Tensor out = Tensor::zeros(a.shape());
  K().add(a.data().data(), b.data().data(), out.mutable_data().data(), n);
  const bool rg = a.requires_grad() || b.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto an = a.node(), bn = b.node(), on = out.node();
    GradTape::active()->record([an, bn, on, n] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      if (an->requires_grad) K().axpy(1.0, g, gbuf(an), n);
      if (bn->requires_grad) K().axpy(1.0, g, gbuf(bn), n);
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "sub");
  const std::size_t n = a.data().size();
  Tensor out = Tensor::zeros(a.shape());
  K().sub(a.data().data(), b.data().data(), out.mutable_data().data(), n);
  const bool rg = a.requires_grad() || b.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto an = a.node(), bn = b.node(), on = out.node();
    GradTape::active()->record([an, bn, on, n] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      if (an->requires_grad) K().axpy(1.0, g, gbuf(an), n);
      if (bn->requires_grad) K().axpy(-1.0, g, gbuf(bn), n);
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "mul");
  const std::size_t n = a.data().size();
  Tensor out = Tensor::zeros(a.shape());
  K().mul(a.data().data(), b.data().data(), out.mutable_data().data(), n);
  const bool rg = a.requires_grad() || b.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto an = a.node(), bn = b.node(), on = out.node();
    GradTape::active()->record([an, bn, on, n] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      if (an->requires_grad) K().mul_acc(g, bn->data.data(), gbuf(an), n);
      if (bn->requires_grad) K().mul_acc(g, an->data.data(), gbuf(bn), n);
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double alpha) {
  const std::size_t n = x.data().size();
  Tensor out = Tensor::zeros(x.shape());
  K().scale(alpha, x.data().data(), out.mutable_data().data(), n);
  const bool rg = x.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto xn = x.node(), on = out.node();
    GradTape::active()->record([xn, on, n, alpha] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      K().axpy(alpha, g, gbuf(xn), n);
    });
  }
  return out;
}

namespace {
thread_local double* g_relu_watch = nullptr;
}

void set_relu_watch(double* watch) { g_relu_watch = watch; }

Tensor relu(const Tensor& x) {
  const std::size_t n = x.data().size();
  Tensor out = Tensor::zeros(x.shape());
  K().relu(x.data().data(), out.mutable_data().data(), n);
  if (g_relu_watch != nullptr) {
    const double* in = x.data().data();
    double m = *g_relu_watch;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = std::fabs(in[i]);
      if (a < m) m = a;
    }
    *g_relu_watch = m;
  }
  const bool rg = x.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto xn = x.node(), on = out.node();
    GradTape::active()->record([xn, on, n] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      K().relu_bwd_acc(xn->data.data(), g, gbuf(xn), n);
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  const std::size_t n = x.data().size();
  Tensor out = Tensor::zeros(x.shape());
  const double* in = x.data().data();
  double* o = out.mutable_data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = in[i];
    if (v >= 0.0) {
      o[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      o[i] = e / (1.0 + e);
    }
  }
  const bool rg = x.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto xn = x.node(), on = out.node();
    GradTape::active()->record([xn, on, n] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      const double* y = on->data.data();
      double* dx = gbuf(xn);
      for (std::size_t i = 0; i < n; ++i) {
        dx[i] += g[i] * y[i] * (1.0 - y[i]);
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  const std::size_t n = x.data().size();
  Tensor out = Tensor::scalar(K().sum(x.data().data(), n));
  const bool rg = x.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto xn = x.node(), on = out.node();
    GradTape::active()->record([xn, on, n] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      K().acc_scalar(g[0], gbuf(xn), n);
    });
  }
  return out;
}

Tensor frobenius_norm(const Tensor& x) {
  const std::size_t n = x.data().size();
  if (n == 0) throw ShapeError("frobenius_norm: empty tensor");
  const double norm = std::sqrt(K().dot(x.data().data(), x.data().data(), n));
  Tensor out = Tensor::scalar(norm);
  const bool rg = x.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto xn = x.node(), on = out.node();
    GradTape::active()->record([xn, on, n] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      double* dx = gbuf(xn);
      const double norm = on->data[0];
      if (norm == 0.0) return;  // subgradient 0 at the zero tensor
      K().axpy(g[0] / norm, xn->data.data(), dx, n);
    });
  }
  return out;
}

}  // namespace picnet::ops
