#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "picnet/tensor.hpp"

namespace picnet {

enum class Split { kTrain, kTest };

struct DatasetMeta {
  std::vector<std::string> classes;
  std::vector<std::array<std::uint8_t, 3>> palette;  // one RGB per class
};

// Co-registered HSI + SAR/LiDAR rasters with disjoint train/test label
// rasters (0 = unlabeled, 1..K = classes). After ingestion both rasters
// share the HSI grid.
struct DatasetBundle {
  Tensor hsi;  // [bands, H, W]
  Tensor aux;  // [c_aux, H, W]
  std::vector<std::int32_t> labels_train;  // H*W row-major
  std::vector<std::int32_t> labels_test;
  int height = 0;
  int width = 0;
  DatasetMeta meta;

  int bands() const { return hsi.dim(0); }
  int aux_channels() const { return aux.dim(0); }
  int num_classes() const { return static_cast<int>(meta.classes.size()); }
  void validate() const;  // throws DataError
};

// Bundle directory layout:
//   meta.json         {"bands","height","width","aux_channels","classes",
//                      "palette","dtype":"f32"}; optional "aux_height"/
//                      "aux_width" when the aux raster needs resampling
//   hsi.bin, aux.bin  little-endian float32, row-major [C][H][W]
//   labels_train.bin, labels_test.bin
//                     little-endian int32, row-major [H][W]
DatasetBundle load_bundle(const std::string& dir);
void save_bundle(const DatasetBundle& bundle, const std::string& dir);

// Nearest-neighbour resampling: out[c,i,j] = x[c, floor((i+0.5)*h/out_h),
// floor((j+0.5)*w/out_w)], clamped. Identity when sizes already match.
Tensor resample_nn(const Tensor& x, int out_h, int out_w);

// Per-channel min-max scaling to [0,1]; constant channels map to 0.
Tensor normalize_channels(const Tensor& x);

// Model-ready rasters: PCA-reduced and normalized HSI plus normalized aux.
struct PreparedBundle {
  Tensor hsi_feat;  // [n_pca, H, W]
  Tensor aux_feat;  // [c_aux, H, W]
  const DatasetBundle* bundle = nullptr;
};

PreparedBundle prepare_features(const DatasetBundle& bundle, int n_pca);

struct PatchBatch {
  Tensor x_h;    // [B, 1, n_pca, k, k]
  Tensor x_aux;  // [B, c_aux, k, k]
  std::vector<int> labels;  // 0-based center-pixel classes; -1 if unlabeled
  std::vector<std::pair<int, int>> centers;  // (row, col)
};

// Streams k x k patches centered on the given pixels, mirror-padding at
// raster borders.
class PatchStream {
 public:
  PatchStream(const PreparedBundle& prep,
              std::vector<std::pair<int, int>> centers, std::vector<int> labels,
              int k, int batch);

  std::optional<PatchBatch> next();
  void reset() { cursor_ = 0; }
  std::int64_t total() const {
    return static_cast<std::int64_t>(centers_.size());
  }
  const std::vector<std::pair<int, int>>& centers() const { return centers_; }

 private:
  const PreparedBundle* prep_;
  std::vector<std::pair<int, int>> centers_;
  std::vector<int> labels_;
  int k_;
  int batch_;
  std::size_t cursor_ = 0;
};

// Centers of every labeled pixel of a split, row-major.
std::vector<std::pair<int, int>> labeled_centers(const DatasetBundle& bundle,
                                                 Split split);

// One patch per labeled pixel of the split; when shuffle_seed is set the
// order is the seeded permutation, otherwise row-major. Throws DataError
// when the split has no labeled pixels or k exceeds the raster.
PatchStream extract_patches(const PreparedBundle& prep, Split split, int k,
                            int batch,
                            std::optional<std::uint64_t> shuffle_seed);

// Cuts one mirror-padded patch from a [C,H,W] raster (shared by the
// stream and by predict-time batching).
void copy_patch(const Tensor& raster, int cy, int cx, int k, double* out);

}  // namespace picnet
