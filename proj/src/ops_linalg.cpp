#include <cmath>
#include <cstddef>
#include <cstdint>

#include "ops_common.hpp"
#include "picnet/ops.hpp"

namespace picnet::ops {

using detail::gbuf;
using detail::K;
using detail::upstream;

Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::check_ndim(a, 2, "matmul");
  detail::check_ndim(b, 2, "matmul");
  const int m = a.dim(0), k = a.dim(1);
  const int k2 = b.dim(0), n = b.dim(1);
  if (k != k2) {
    throw ShapeError("matmul: inner dimensions disagree, " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros({m, n});
  {
    const double* ap = a.data().data();
    const double* bp = b.data().data();
    double* op = out.mutable_data().data();
    for (int i = 0; i < m; ++i) {
      for (int kk = 0; kk < k; ++kk) {
        K().axpy(ap[i * k + kk], bp + static_cast<std::ptrdiff_t>(kk) * n,
                 op + static_cast<std::ptrdiff_t>(i) * n,
                 static_cast<std::size_t>(n));
      }
    }
  }
  const bool rg = a.requires_grad() || b.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto an = a.node(), bn = b.node(), on = out.node();
    GradTape::active()->record([an, bn, on, m, k, n] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      if (an->requires_grad) {
        // dA = g . B^T
        double* da = gbuf(an);
        const double* bp = bn->data.data();
        for (int i = 0; i < m; ++i) {
          for (int kk = 0; kk < k; ++kk) {
            da[i * k + kk] += K().dot(g + static_cast<std::ptrdiff_t>(i) * n,
                                      bp + static_cast<std::ptrdiff_t>(kk) * n,
                                      static_cast<std::size_t>(n));
          }
        }
      }
      if (bn->requires_grad) {
        // dB = A^T . g
        double* db = gbuf(bn);
        const double* ap = an->data.data();
        for (int i = 0; i < m; ++i) {
          for (int kk = 0; kk < k; ++kk) {
            K().axpy(ap[i * k + kk], g + static_cast<std::ptrdiff_t>(i) * n,
                     db + static_cast<std::ptrdiff_t>(kk) * n,
                     static_cast<std::size_t>(n));
          }
        }
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& x) {
  detail::check_ndim(x, 2, "transpose");
  const int m = x.dim(0), n = x.dim(1);
  Tensor out = Tensor::zeros({n, m});
  {
    const double* in = x.data().data();
    double* o = out.mutable_data().data();
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) o[j * m + i] = in[i * n + j];
    }
  }
  const bool rg = x.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto xn = x.node(), on = out.node();
    GradTape::active()->record([xn, on, m, n] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      double* dx = gbuf(xn);
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) dx[i * n + j] += g[j * m + i];
      }
    });
  }
  return out;
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
  detail::check_ndim(x, 2, "add_rowvec");
  detail::check_ndim(v, 1, "add_rowvec");
  const int m = x.dim(0), n = x.dim(1);
  if (v.dim(0) != n) {
    throw ShapeError("add_rowvec: row length " + std::to_string(n) +
                     " vs vector " + shape_str(v.shape()));
  }
  Tensor out = Tensor::zeros({m, n});
  {
    const double* in = x.data().data();
    const double* vp = v.data().data();
    double* o = out.mutable_data().data();
    for (int i = 0; i < m; ++i) {
      K().add(in + static_cast<std::ptrdiff_t>(i) * n, vp,
              o + static_cast<std::ptrdiff_t>(i) * n,
              static_cast<std::size_t>(n));
    }
  }
  const bool rg = x.requires_grad() || v.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto xn = x.node(), vn = v.node(), on = out.node();
    GradTape::active()->record([xn, vn, on, m, n] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      if (xn->requires_grad) {
        K().axpy(1.0, g, gbuf(xn), static_cast<std::size_t>(m) * n);
      }
      if (vn->requires_grad) {
        double* dv = gbuf(vn);
        for (int i = 0; i < m; ++i) {
          K().axpy(1.0, g + static_cast<std::ptrdiff_t>(i) * n, dv,
                   static_cast<std::size_t>(n));
        }
      }
    });
  }
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  detail::check_ndim(x, 2, "softmax_rows");
  if (!x.all_finite()) {
    throw NumericError("softmax_rows: non-finite input");
  }
  const int m = x.dim(0), n = x.dim(1);
  Tensor out = Tensor::zeros({m, n});
  {
    const double* in = x.data().data();
    double* o = out.mutable_data().data();
    for (int i = 0; i < m; ++i) {
      const double* row = in + static_cast<std::ptrdiff_t>(i) * n;
      double* orow = o + static_cast<std::ptrdiff_t>(i) * n;
      double mx = row[0];
      for (int j = 1; j < n; ++j) mx = row[j] > mx ? row[j] : mx;
      double s = 0.0;
      for (int j = 0; j < n; ++j) {
        orow[j] = std::exp(row[j] - mx);
        s += orow[j];
      }
      const double inv = 1.0 / s;
      for (int j = 0; j < n; ++j) orow[j] *= inv;
    }
  }
  const bool rg = x.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto xn = x.node(), on = out.node();
    GradTape::active()->record([xn, on, m, n] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      const double* y = on->data.data();
      double* dx = gbuf(xn);
      for (int i = 0; i < m; ++i) {
        const double* grow = g + static_cast<std::ptrdiff_t>(i) * n;
        const double* yrow = y + static_cast<std::ptrdiff_t>(i) * n;
        double* drow = dx + static_cast<std::ptrdiff_t>(i) * n;
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += grow[j] * yrow[j];
        for (int j = 0; j < n; ++j) drow[j] += (grow[j] - dot) * yrow[j];
      }
    });
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  detail::check_ndim(logits, 2, "cross_entropy");
  const int b = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != b) {
    throw UsageError("cross_entropy: " + std::to_string(labels.size()) +
                     " labels for batch " + std::to_string(b));
  }
  for (int label : labels) {
    if (label < 0 || label >= k) {
      throw DataError("cross_entropy: label " + std::to_string(label) +
                      " outside [0," + std::to_string(k) + ")");
    }
  }
  double total = 0.0;
  const double* in = logits.data().data();
  for (int i = 0; i < b; ++i) {
    const double* row = in + static_cast<std::ptrdiff_t>(i) * k;
    double mx = row[0];
    for (int j = 1; j < k; ++j) mx = row[j] > mx ? row[j] : mx;
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += std::exp(row[j] - mx);
    total += mx + std::log(s) - row[labels[static_cast<std::size_t>(i)]];
  }
  Tensor out = Tensor::scalar(total / b);
  const bool rg = logits.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto xn = logits.node(), on = out.node();
    GradTape::active()->record([xn, on, b, k, labels] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      const double* in = xn->data.data();
      double* dx = gbuf(xn);
      const double gscale = g[0] / b;
      for (int i = 0; i < b; ++i) {
        const double* row = in + static_cast<std::ptrdiff_t>(i) * k;
        double* drow = dx + static_cast<std::ptrdiff_t>(i) * k;
        double mx = row[0];
        for (int j = 1; j < k; ++j) mx = row[j] > mx ? row[j] : mx;
        double s = 0.0;
        for (int j = 0; j < k; ++j) s += std::exp(row[j] - mx);
        for (int j = 0; j < k; ++j) {
          double p = std::exp(row[j] - mx) / s;
          if (j == labels[static_cast<std::size_t>(i)]) p -= 1.0;
          drow[j] += gscale * p;
        }
      }
    });
  }
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  detail::check_ndim(x, 4, "global_avg_pool");
  const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  Tensor out = Tensor::zeros({b, c});
  {
    const double* in = x.data().data();
    double* o = out.mutable_data().data();
    for (int i = 0; i < b * c; ++i) {
      const double* plane = in + i * hw;
      // Difference-form mean: exact for constant planes.
      double acc = 0.0;
      for (std::int64_t j = 1; j < hw; ++j) acc += plane[j] - plane[0];
      o[i] = plane[0] + acc / static_cast<double>(hw);
    }
  }
  const bool rg = x.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto xn = x.node(), on = out.node();
    GradTape::active()->record([xn, on, b, c, hw] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      double* dx = gbuf(xn);
      for (int i = 0; i < b * c; ++i) {
        K().acc_scalar(g[i] / static_cast<double>(hw), dx + i * hw,
                       static_cast<std::size_t>(hw));
      }
    });
  }
  return out;
}

Tensor expand_spatial(const Tensor& g, int h, int w) {
  detail::check_ndim(g, 2, "expand_spatial");
  if (h < 1 || w < 1) throw ShapeError("expand_spatial: non-positive target");
  const int b = g.dim(0), c = g.dim(1);
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  Tensor out = Tensor::zeros({b, c, h, w});
  {
    const double* in = g.data().data();
    double* o = out.mutable_data().data();
    for (int i = 0; i < b * c; ++i) {
      double* plane = o + i * hw;
      for (std::int64_t j = 0; j < hw; ++j) plane[j] = in[i];
    }
  }
  const bool rg = g.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto gn = g.node(), on = out.node();
    GradTape::active()->record([gn, on, b, c, hw] {
      const double* up = upstream(on);
      if (up == nullptr) return;
      double* dg = gbuf(gn);
      for (int i = 0; i < b * c; ++i) {
        dg[i] += K().sum(up + i * hw, static_cast<std::size_t>(hw));
      }
    });
  }
  return out;
}

}  // namespace picnet::ops
