#include "picnet/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "picnet/errors.hpp"

namespace picnet {

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. a is n x n
// row-major and is destroyed; on return the diagonal holds eigenvalues
// and v holds eigenvectors in columns. Deterministic sweep order.
void jacobi_eigen(std::vector<double>& a, std::vector<double>& v, int n) {
  v.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        off += a[static_cast<std::size_t>(p) * n + q] *
               a[static_cast<std::size_t>(p) * n + q];
      }
    }
    if (off < 1e-24) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[static_cast<std::size_t>(p) * n + q];
        if (std::fabs(apq) < 1e-300) continue;
        const double app = a[static_cast<std::size_t>(p) * n + p];
        const double aqq = a[static_cast<std::size_t>(q) * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int i = 0; i < n; ++i) {
          const double aip = a[static_cast<std::size_t>(i) * n + p];
          const double aiq = a[static_cast<std::size_t>(i) * n + q];
          a[static_cast<std::size_t>(i) * n + p] = c * aip - s * aiq;
          a[static_cast<std::size_t>(i) * n + q] = s * aip + c * aiq;
        }
        for (int i = 0; i < n; ++i) {
          const double api = a[static_cast<std::size_t>(p) * n + i];
          const double aqi = a[static_cast<std::size_t>(q) * n + i];
          a[static_cast<std::size_t>(p) * n + i] = c * api - s * aqi;
          a[static_cast<std::size_t>(q) * n + i] = s * api + c * aqi;
        }
        for (int i = 0; i < n; ++i) {
          const double vip = v[static_cast<std::size_t>(i) * n + p];
          const double viq = v[static_cast<std::size_t>(i) * n + q];
          v[static_cast<std::size_t>(i) * n + p] = c * vip - s * viq;
          v[static_cast<std::size_t>(i) * n + q] = s * vip + c * viq;
        }
      }
    }
  }
}

}  // namespace

PcaModel pca_fit(const Tensor& hsi, int n_components) {
  if (hsi.ndim() != 3) {
    throw ShapeError("pca_fit: expected [bands,H,W], got " +
                     shape_str(hsi.shape()));
  }
  const int bands = hsi.dim(0);
  const std::int64_t pixels =
      static_cast<std::int64_t>(hsi.dim(1)) * hsi.dim(2);
  if (n_components < 1 || n_components > bands) {
    throw ConfigError("pca_fit: n_components " + std::to_string(n_components) +
                      " outside [1," + std::to_string(bands) + "]");
  }

  const double* data = hsi.data().data();
  std::vector<double> mean(static_cast<std::size_t>(bands), 0.0);
  for (int b = 0; b < bands; ++b) {
    const double* plane = data + static_cast<std::int64_t>(b) * pixels;
    double acc = 0.0;
    for (std::int64_t p = 0; p < pixels; ++p) acc += plane[p];
    mean[static_cast<std::size_t>(b)] = acc / static_cast<double>(pixels);
  }

  // Spectral covariance over all pixel spectra.
  std::vector<double> cov(static_cast<std::size_t>(bands) * bands, 0.0);
  for (int i = 0; i < bands; ++i) {
    const double* pi = data + static_cast<std::int64_t>(i) * pixels;
    for (int j = i; j < bands; ++j) {
      const double* pj = data + static_cast<std::int64_t>(j) * pixels;
      double acc = 0.0;
      for (std::int64_t p = 0; p < pixels; ++p) {
        acc += (pi[p] - mean[static_cast<std::size_t>(i)]) *
               (pj[p] - mean[static_cast<std::size_t>(j)]);
      }
      const double c = acc / static_cast<double>(pixels);
      cov[static_cast<std::size_t>(i) * bands + j] = c;
      cov[static_cast<std::size_t>(j) * bands + i] = c;
    }
  }

  std::vector<double> vecs;
  jacobi_eigen(cov, vecs, bands);

  std::vector<int> order(static_cast<std::size_t>(bands));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return cov[static_cast<std::size_t>(a) * bands + a] >
           cov[static_cast<std::size_t>(b) * bands + b];
  });

  PcaModel model;
  model.mean = Tensor::from({bands}, mean);
  model.components = Tensor::zeros({n_components, bands});
  model.eigenvalues.resize(static_cast<std::size_t>(n_components));
  double* comp = model.components.mutable_data().data();
  for (int c = 0; c < n_components; ++c) {
    const int col = order[static_cast<std::size_t>(c)];
    model.eigenvalues[static_cast<std::size_t>(c)] =
        cov[static_cast<std::size_t>(col) * bands + col];
    // Fixed sign: largest-magnitude entry positive.
    int arg = 0;
    double best = 0.0;
    for (int b = 0; b < bands; ++b) {
      const double mag =
          std::fabs(vecs[static_cast<std::size_t>(b) * bands + col]);
      if (mag > best) {
        best = mag;
        arg = b;
      }
    }
    const double sign =
        vecs[static_cast<std::size_t>(arg) * bands + col] < 0.0 ? -1.0 : 1.0;
    for (int b = 0; b < bands; ++b) {
      comp[static_cast<std::size_t>(c) * bands + b] =
          sign * vecs[static_cast<std::size_t>(b) * bands + col];
    }
  }
  return model;
}

Tensor pca_apply(const Tensor& hsi, const PcaModel& model) {
  const int bands = hsi.dim(0);
  if (bands != model.mean.dim(0)) {
    throw ShapeError("pca_apply: " + std::to_string(bands) +
                     " bands vs model with " +
                     std::to_string(model.mean.dim(0)));
  }
  const int h = hsi.dim(1), w = hsi.dim(2);
  const std::int64_t pixels = static_cast<std::int64_t>(h) * w;
  const int nc = model.components.dim(0);
  Tensor out = Tensor::zeros({nc, h, w});
  const double* data = hsi.data().data();
  const double* mean = model.mean.data().data();
  const double* comp = model.components.data().data();
  double* o = out.mutable_data().data();
  for (int c = 0; c < nc; ++c) {
    double* oplane = o + static_cast<std::int64_t>(c) * pixels;
    for (int b = 0; b < bands; ++b) {
      const double weight = comp[static_cast<std::size_t>(c) * bands + b];
      const double* plane = data + static_cast<std::int64_t>(b) * pixels;
      const double mu = mean[b];
      for (std::int64_t p = 0; p < pixels; ++p) {
        oplane[p] += weight * (plane[p] - mu);
      }
    }
  }
  return out;
}

Tensor pca_inverse(const Tensor& projected, const PcaModel& model) {
  const int nc = projected.dim(0);
  if (nc != model.components.dim(0)) {
    throw ShapeError("pca_inverse: component count mismatch");
  }
  const int bands = model.mean.dim(0);
  const int h = projected.dim(1), w = projected.dim(2);
  const std::int64_t pixels = static_cast<std::int64_t>(h) * w;
  Tensor out = Tensor::zeros({bands, h, w});
  const double* proj = projected.data().data();
  const double* mean = model.mean.data().data();
  const double* comp = model.components.data().data();
  double* o = out.mutable_data().data();
  for (int b = 0; b < bands; ++b) {
    double* oplane = o + static_cast<std::int64_t>(b) * pixels;
    for (std::int64_t p = 0; p < pixels; ++p) oplane[p] = mean[b];
    for (int c = 0; c < nc; ++c) {
      const double weight = comp[static_cast<std::size_t>(c) * bands + b];
      const double* pplane = proj + static_cast<std::int64_t>(c) * pixels;
      for (std::int64_t p = 0; p < pixels; ++p) {
        oplane[p] += weight * pplane[p];
      }
    }
  }
  return out;
}

}  // namespace picnet
