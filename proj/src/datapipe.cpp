#include "picnet/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "picnet/errors.hpp"
#include "picnet/pca.hpp"
#include "picnet/rng.hpp"

namespace picnet {

namespace fs = std::filesystem;
using nlohmann::json;

void DatasetBundle::validate() const {
  if (hsi.ndim() != 3 || aux.ndim() != 3) {
    throw DataError("bundle: hsi and aux must be [C,H,W]");
  }
  if (hsi.dim(1) != height || hsi.dim(2) != width || aux.dim(1) != height ||
      aux.dim(2) != width) {
    throw DataError("bundle: raster extents disagree with height/width");
  }
  const std::size_t pixels =
      static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  if (labels_train.size() != pixels || labels_test.size() != pixels) {
    throw DataError("bundle: label raster size mismatch");
  }
  const int k = num_classes();
  if (k < 1) throw DataError("bundle: no classes declared");
  if (meta.palette.size() != meta.classes.size()) {
    throw DataError("bundle: palette and class list lengths differ");
  }
  for (std::size_t p = 0; p < pixels; ++p) {
    const std::int32_t t = labels_train[p];
    const std::int32_t e = labels_test[p];
    if (t < 0 || t > k) {
      throw DataError("labels_train: value " + std::to_string(t) +
                      " outside [0," + std::to_string(k) + "]");
    }
    if (e < 0 || e > k) {
      throw DataError("labels_test: value " + std::to_string(e) +
                      " outside [0," + std::to_string(k) + "]");
    }
    if (t != 0 && e != 0) {
      throw DataError("bundle: train and test labels overlap at pixel " +
                      std::to_string(p));
    }
  }
}

namespace {

std::vector<float> read_f32(const fs::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected * sizeof(float)) {
    throw DataError(path.string() + ": expected " +
                    std::to_string(expected * sizeof(float)) + " bytes, got " +
                    std::to_string(bytes));
  }
  in.seekg(0);
  std::vector<float> buf(expected);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(bytes));
  if (!in) throw DataError(path.string() + ": short read");
  return buf;
}

std::vector<std::int32_t> read_i32(const fs::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected * sizeof(std::int32_t)) {
    throw DataError(path.string() + ": expected " +
                    std::to_string(expected * sizeof(std::int32_t)) +
                    " bytes, got " + std::to_string(bytes));
  }
  in.seekg(0);
  std::vector<std::int32_t> buf(expected);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(bytes));
  if (!in) throw DataError(path.string() + ": short read");
  return buf;
}

Tensor tensor_from_f32(const std::vector<float>& raw, Shape shape) {
  std::vector<double> data(raw.begin(), raw.end());
  return Tensor::from(std::move(shape), std::move(data));
}

void write_bytes(const fs::path& path, const void* data, std::size_t bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(bytes));
  if (!out) throw IoError(path.string() + ": write failed");
}

void write_f32_tensor(const fs::path& path, const Tensor& t) {
  std::vector<float> raw(t.data().size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = static_cast<float>(t.data()[i]);
  }
  write_bytes(path, raw.data(), raw.size() * sizeof(float));
}

}  // namespace

DatasetBundle load_bundle(const std::string& dir) {
  const fs::path root(dir);
  const fs::path meta_path = root / "meta.json";
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw DataError(meta_path.string() + ": cannot open");
  json meta;
  try {
    meta = json::parse(meta_in);
  } catch (const json::exception& e) {
    throw DataError(meta_path.string() + ": " + e.what());
  }

  auto require = [&](const char* field) -> const json& {
    if (!meta.contains(field)) {
      throw DataError(meta_path.string() + ": missing field '" +
                      std::string(field) + "'");
    }
    return meta.at(field);
  };

  DatasetBundle b;
  const int bands = require("bands").get<int>();
  b.height = require("height").get<int>();
  b.width = require("width").get<int>();
  const int aux_channels = require("aux_channels").get<int>();
  if (bands < 1 || b.height < 1 || b.width < 1 || aux_channels < 1) {
    throw DataError(meta_path.string() + ": non-positive raster extent");
  }
  const std::string dtype = require("dtype").get<std::string>();
  if (dtype != "f32") {
    throw DataError(meta_path.string() + ": unsupported dtype '" + dtype +
                    "'");
  }
  for (const auto& name : require("classes")) {
    b.meta.classes.push_back(name.get<std::string>());
  }
  for (const auto& rgb : require("palette")) {
    if (!rgb.is_array() || rgb.size() != 3) {
      throw DataError(meta_path.string() + ": palette entries must be [r,g,b]");
    }
    b.meta.palette.push_back({rgb[0].get<std::uint8_t>(),
                              rgb[1].get<std::uint8_t>(),
                              rgb[2].get<std::uint8_t>()});
  }

  // The aux raster may live on its own grid; it is resampled to the HSI
  // grid at load time.
  const int aux_h = meta.value("aux_height", b.height);
  const int aux_w = meta.value("aux_width", b.width);

  const std::size_t pixels =
      static_cast<std::size_t>(b.height) * static_cast<std::size_t>(b.width);
  b.hsi = tensor_from_f32(
      read_f32(root / "hsi.bin", static_cast<std::size_t>(bands) * pixels),
      {bands, b.height, b.width});
  Tensor aux = tensor_from_f32(
      read_f32(root / "aux.bin", static_cast<std::size_t>(aux_channels) *
                                     static_cast<std::size_t>(aux_h) *
                                     static_cast<std::size_t>(aux_w)),
      {aux_channels, aux_h, aux_w});
  b.aux = (aux_h == b.height && aux_w == b.width)
              ? aux
              : resample_nn(aux, b.height, b.width);
  b.labels_train = read_i32(root / "labels_train.bin", pixels);
  b.labels_test = read_i32(root / "labels_test.bin", pixels);
  b.validate();
  return b;
}

void save_bundle(const DatasetBundle& bundle, const std::string& dir) {
  bundle.validate();
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError(dir + ": " + ec.message());

  json meta;
  meta["bands"] = bundle.bands();
  meta["height"] = bundle.height;
  meta["width"] = bundle.width;
  meta["aux_channels"] = bundle.aux_channels();
  meta["classes"] = bundle.meta.classes;
  json palette = json::array();
  for (const auto& rgb : bundle.meta.palette) {
    palette.push_back({rgb[0], rgb[1], rgb[2]});
  }
  meta["palette"] = palette;
  meta["dtype"] = "f32";
  const std::string text = meta.dump(2) + "\n";
  write_bytes(root / "meta.json", text.data(), text.size());

  write_f32_tensor(root / "hsi.bin", bundle.hsi);
  write_f32_tensor(root / "aux.bin", bundle.aux);
  write_bytes(root / "labels_train.bin", bundle.labels_train.data(),
              bundle.labels_train.size() * sizeof(std::int32_t));
  write_bytes(root / "labels_test.bin", bundle.labels_test.data(),
              bundle.labels_test.size() * sizeof(std::int32_t));
}

Tensor resample_nn(const Tensor& x, int out_h, int out_w) {
  if (x.ndim() != 3) {
    throw ShapeError("resample_nn: expected [C,h,w], got " +
                     shape_str(x.shape()));
  }
  if (out_h < 1 || out_w < 1) {
    throw ShapeError("resample_nn: non-positive target size");
  }
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h == out_h && w == out_w) return x;
  Tensor out = Tensor::zeros({c, out_h, out_w});
  auto src_index = [](int i, int in, int outn) {
    int s = static_cast<int>(
        std::floor((i + 0.5) * static_cast<double>(in) / outn));
    if (s < 0) s = 0;
    if (s >= in) s = in - 1;
    return s;
  };
  const double* in = x.data().data();
  double* o = out.mutable_data().data();
  for (int ci = 0; ci < c; ++ci) {
    const double* iplane = in + static_cast<std::int64_t>(ci) * h * w;
    double* oplane = o + static_cast<std::int64_t>(ci) * out_h * out_w;
    for (int i = 0; i < out_h; ++i) {
      const int si = src_index(i, h, out_h);
      for (int j = 0; j < out_w; ++j) {
        oplane[static_cast<std::int64_t>(i) * out_w + j] =
            iplane[static_cast<std::int64_t>(si) * w + src_index(j, w, out_w)];
      }
    }
  }
  return out;
}

Tensor normalize_channels(const Tensor& x) {
  if (x.ndim() != 3) {
    throw ShapeError("normalize_channels: expected [C,H,W], got " +
                     shape_str(x.shape()));
  }
  const int c = x.dim(0);
  const std::int64_t pixels = static_cast<std::int64_t>(x.dim(1)) * x.dim(2);
  Tensor out = Tensor::zeros(x.shape());
  const double* in = x.data().data();
  double* o = out.mutable_data().data();
  for (int ci = 0; ci < c; ++ci) {
    const double* iplane = in + ci * pixels;
    double* oplane = o + ci * pixels;
    double lo = iplane[0], hi = iplane[0];
    for (std::int64_t p = 1; p < pixels; ++p) {
      lo = std::min(lo, iplane[p]);
      hi = std::max(hi, iplane[p]);
    }
    if (hi > lo) {
      const double inv = 1.0 / (hi - lo);
      for (std::int64_t p = 0; p < pixels; ++p) {
        oplane[p] = (iplane[p] - lo) * inv;
      }
    }
    // Constant channels stay zero.
  }
  return out;
}

PreparedBundle prepare_features(const DatasetBundle& bundle, int n_pca) {
  PreparedBundle prep;
  const PcaModel pca = pca_fit(bundle.hsi, n_pca);
  prep.hsi_feat = normalize_channels(pca_apply(bundle.hsi, pca));
  prep.aux_feat = normalize_channels(bundle.aux);
  prep.bundle = &bundle;
  return prep;
}

namespace {

// Mirror (symmetric, edge included) index for out-of-range positions.
int mirror_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

}  // namespace

void copy_patch(const Tensor& raster, int cy, int cx, int k, double* out) {
  const int c = raster.dim(0), h = raster.dim(1), w = raster.dim(2);
  const double* in = raster.data().data();
  const int off = k / 2;
  for (int ci = 0; ci < c; ++ci) {
    const double* plane = in + static_cast<std::int64_t>(ci) * h * w;
    for (int dy = 0; dy < k; ++dy) {
      const int sy = mirror_index(cy - off + dy, h);
      for (int dx = 0; dx < k; ++dx) {
        const int sx = mirror_index(cx - off + dx, w);
        out[(static_cast<std::int64_t>(ci) * k + dy) * k + dx] =
            plane[static_cast<std::int64_t>(sy) * w + sx];
      }
    }
  }
}

PatchStream::PatchStream(const PreparedBundle& prep,
                         std::vector<std::pair<int, int>> centers,
                         std::vector<int> labels, int k, int batch)
    : prep_(&prep),
      centers_(std::move(centers)),
      labels_(std::move(labels)),
      k_(k),
      batch_(batch) {
  if (batch_ < 1) throw ConfigError("PatchStream: batch must be >= 1");
  const DatasetBundle& b = *prep.bundle;
  if (k_ < 1 || k_ > std::min(b.height, b.width)) {
    throw ConfigError("PatchStream: patch size " + std::to_string(k_) +
                      " exceeds raster " + std::to_string(b.height) + "x" +
                      std::to_string(b.width));
  }
  if (!labels_.empty() && labels_.size() != centers_.size()) {
    throw UsageError("PatchStream: labels/centers length mismatch");
  }
}

std::optional<PatchBatch> PatchStream::next() {
  if (cursor_ >= centers_.size()) return std::nullopt;
  const std::size_t n =
      std::min<std::size_t>(batch_, centers_.size() - cursor_);
  const int n_pca = prep_->hsi_feat.dim(0);
  const int c_aux = prep_->aux_feat.dim(0);
  PatchBatch batch;
  batch.x_h = Tensor::zeros({static_cast<int>(n), 1, n_pca, k_, k_});
  batch.x_aux = Tensor::zeros({static_cast<int>(n), c_aux, k_, k_});
  double* xh = batch.x_h.mutable_data().data();
  double* xa = batch.x_aux.mutable_data().data();
  const std::int64_t h_block = static_cast<std::int64_t>(n_pca) * k_ * k_;
  const std::int64_t a_block = static_cast<std::int64_t>(c_aux) * k_ * k_;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [cy, cx] = centers_[cursor_ + i];
    copy_patch(prep_->hsi_feat, cy, cx, k_, xh + i * h_block);
    copy_patch(prep_->aux_feat, cy, cx, k_, xa + i * a_block);
    batch.centers.push_back(centers_[cursor_ + i]);
    batch.labels.push_back(labels_.empty() ? -1
                                           : labels_[cursor_ + i]);
  }
  cursor_ += n;
  return batch;
}

std::vector<std::pair<int, int>> labeled_centers(const DatasetBundle& bundle,
                                                 Split split) {
  const std::vector<std::int32_t>& raster =
      split == Split::kTrain ? bundle.labels_train : bundle.labels_test;
  std::vector<std::pair<int, int>> centers;
  for (int y = 0; y < bundle.height; ++y) {
    for (int x = 0; x < bundle.width; ++x) {
      if (raster[static_cast<std::size_t>(y) * bundle.width + x] != 0) {
        centers.emplace_back(y, x);
      }
    }
  }
  return centers;
}

PatchStream extract_patches(const PreparedBundle& prep, Split split, int k,
                            int batch,
                            std::optional<std::uint64_t> shuffle_seed) {
  const DatasetBundle& bundle = *prep.bundle;
  std::vector<std::pair<int, int>> centers = labeled_centers(bundle, split);
  if (centers.empty()) {
    throw DataError("extract_patches: split has no labeled pixels");
  }
  if (shuffle_seed.has_value()) {
    Rng rng(*shuffle_seed);
    rng.shuffle(centers);
  }
  const std::vector<std::int32_t>& raster =
      split == Split::kTrain ? bundle.labels_train : bundle.labels_test;
  std::vector<int> labels;
  labels.reserve(centers.size());
  for (const auto& [y, x] : centers) {
    labels.push_back(raster[static_cast<std::size_t>(y) * bundle.width + x] -
                     1);
  }
  return PatchStream(prep, std::move(centers), std::move(labels), k, batch);
}

}  // namespace picnet
