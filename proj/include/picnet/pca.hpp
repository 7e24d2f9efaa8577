#pragma once

#include <vector>

#include "picnet/tensor.hpp"

namespace picnet {

// Principal components of the spectral covariance, fit on every pixel's
// spectrum (unsupervised; labels are never touched). Components are
// orthonormal eigenvector rows ordered by descending eigenvalue with a
// deterministic sign convention: the largest-magnitude entry of each
// component is positive (first such index on ties).
struct PcaModel {
  Tensor mean;        // [bands]
  Tensor components;  // [n_components, bands]
  std::vector<double> eigenvalues;  // descending, length n_components
};

// hsi: [bands, H, W]. Throws ConfigError when n_components > bands.
PcaModel pca_fit(const Tensor& hsi, int n_components);

// Projects centered spectra: [bands, H, W] -> [n_components, H, W].
Tensor pca_apply(const Tensor& hsi, const PcaModel& model);

// Reconstruction from the projection: [n_components, H, W] -> [bands, H, W].
Tensor pca_inverse(const Tensor& projected, const PcaModel& model);

}  // namespace picnet
