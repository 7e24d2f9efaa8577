#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "picnet/datapipe.hpp"
#include "picnet/errors.hpp"
#include "picnet/pca.hpp"
#include "picnet/rng.hpp"
#include "picnet/synth.hpp"
#include "picnet/tensor.hpp"
#include "testutil.hpp"

using namespace picnet;
using testutil::random_tensor;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("picnet_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Power iteration with deflation: the independent eigendecomposition
// oracle for the PCA fit.
struct PowerPca {
  std::vector<double> mean;
  std::vector<std::vector<double>> components;
};

PowerPca power_pca(const Tensor& hsi, int n_components) {
  const int bands = hsi.dim(0);
  const std::int64_t pixels =
      static_cast<std::int64_t>(hsi.dim(1)) * hsi.dim(2);
  const double* data = hsi.data().data();
  PowerPca out;
  out.mean.assign(static_cast<std::size_t>(bands), 0.0);
  for (int b = 0; b < bands; ++b) {
    for (std::int64_t p = 0; p < pixels; ++p) {
      out.mean[static_cast<std::size_t>(b)] += data[b * pixels + p];
    }
    out.mean[static_cast<std::size_t>(b)] /= static_cast<double>(pixels);
  }
  std::vector<double> cov(static_cast<std::size_t>(bands) * bands, 0.0);
  for (int i = 0; i < bands; ++i) {
    for (int j = 0; j < bands; ++j) {
      double acc = 0.0;
      for (std::int64_t p = 0; p < pixels; ++p) {
        acc += (data[i * pixels + p] - out.mean[static_cast<std::size_t>(i)]) *
               (data[j * pixels + p] - out.mean[static_cast<std::size_t>(j)]);
      }
      cov[static_cast<std::size_t>(i) * bands + j] =
          acc / static_cast<double>(pixels);
    }
  }
  Rng rng(4242);
  for (int c = 0; c < n_components; ++c) {
    std::vector<double> v(static_cast<std::size_t>(bands));
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    for (int iter = 0; iter < 3000; ++iter) {
      std::vector<double> w(static_cast<std::size_t>(bands), 0.0);
      for (int i = 0; i < bands; ++i) {
        for (int j = 0; j < bands; ++j) {
          w[static_cast<std::size_t>(i)] +=
              cov[static_cast<std::size_t>(i) * bands + j] *
              v[static_cast<std::size_t>(j)];
        }
      }
      double norm = 0.0;
      for (double x : w) norm += x * x;
      norm = std::sqrt(norm);
      for (int i = 0; i < bands; ++i) {
        v[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)] / norm;
      }
    }
    // Rayleigh quotient, then deflate.
    std::vector<double> cv(static_cast<std::size_t>(bands), 0.0);
    for (int i = 0; i < bands; ++i) {
      for (int j = 0; j < bands; ++j) {
        cv[static_cast<std::size_t>(i)] +=
            cov[static_cast<std::size_t>(i) * bands + j] *
            v[static_cast<std::size_t>(j)];
      }
    }
    double lambda = 0.0;
    for (int i = 0; i < bands; ++i) {
      lambda += v[static_cast<std::size_t>(i)] * cv[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < bands; ++i) {
      for (int j = 0; j < bands; ++j) {
        cov[static_cast<std::size_t>(i) * bands + j] -=
            lambda * v[static_cast<std::size_t>(i)] *
            v[static_cast<std::size_t>(j)];
      }
    }
    out.components.push_back(std::move(v));
  }
  return out;
}

}  // namespace

TEST_CASE("resample_nn identity, fill, and block replication") {
  Rng rng(1);
  Tensor x = random_tensor(rng, {2, 3, 4});
  CHECK(resample_nn(x, 3, 4).data() == x.data());

  Tensor one = Tensor::from({1, 1, 1}, {0.42});
  Tensor filled = resample_nn(one, 3, 5);
  for (double v : filled.data()) CHECK(v == 0.42);

  Tensor four = Tensor::from({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  Tensor up = resample_nn(four, 4, 4);
  const std::vector<double> want = {1, 1, 2, 2, 1, 1, 2, 2,
                                    3, 3, 4, 4, 3, 3, 4, 4};
  CHECK(up.data() == want);

  // No blending: every output value occurs in the input.
  Tensor r = random_tensor(rng, {1, 3, 5});
  Tensor rs = resample_nn(r, 7, 11);
  std::set<double> allowed(r.data().begin(), r.data().end());
  for (double v : rs.data()) CHECK(allowed.count(v) == 1);
}

TEST_CASE("normalize_channels scaling rules") {
  Tensor x = Tensor::from({1, 1, 2}, {2.0, 4.0});
  CHECK(normalize_channels(x).data() == std::vector<double>{0.0, 1.0});

  Tensor c = Tensor::full({1, 2, 2}, 3.3);
  Tensor flat = normalize_channels(c);
  for (double v : flat.data()) CHECK(v == 0.0);

  // Per-channel affine invariance for a > 0.
  Rng rng(2);
  Tensor r = random_tensor(rng, {2, 4, 4});
  Tensor shifted = Tensor::zeros({2, 4, 4});
  for (std::size_t i = 0; i < r.data().size(); ++i) {
    shifted.mutable_data()[i] = 2.5 * r.data()[i] - 0.7;
  }
  CHECK(testutil::max_abs_diff(normalize_channels(r).data(),
                               normalize_channels(shifted).data()) < 1e-10);
}

TEST_CASE("pca recovers low-rank data exactly") {
  // Build a rank-2 spectral scene: every spectrum is a combination of two
  // fixed basis vectors.
  Rng rng(3);
  const int bands = 6, h = 8, w = 8;
  std::vector<double> b1(bands), b2(bands);
  for (int i = 0; i < bands; ++i) {
    b1[static_cast<std::size_t>(i)] = rng.uniform(-1.0, 1.0);
    b2[static_cast<std::size_t>(i)] = rng.uniform(-1.0, 1.0);
  }
  Tensor hsi = Tensor::zeros({bands, h, w});
  for (int p = 0; p < h * w; ++p) {
    const double a = rng.uniform(-2.0, 2.0);
    const double b = rng.uniform(-2.0, 2.0);
    for (int i = 0; i < bands; ++i) {
      hsi.mutable_data()[i * h * w + p] =
          a * b1[static_cast<std::size_t>(i)] + b * b2[static_cast<std::size_t>(i)];
    }
  }
  PcaModel m2 = pca_fit(hsi, 2);
  Tensor rec = pca_inverse(pca_apply(hsi, m2), m2);
  CHECK(testutil::max_abs_diff(rec.data(), hsi.data()) < 1e-8);

  // Full basis reconstructs any data exactly.
  Tensor noisy = random_tensor(rng, {bands, h, w});
  PcaModel mf = pca_fit(noisy, bands);
  Tensor rec2 = pca_inverse(pca_apply(noisy, mf), mf);
  CHECK(testutil::max_abs_diff(rec2.data(), noisy.data()) < 1e-8);

  CHECK_THROWS_AS(pca_fit(noisy, bands + 1), ConfigError);
}

TEST_CASE("pca matches the power-iteration oracle up to sign") {
  Rng rng(4);
  Tensor hsi = random_tensor(rng, {6, 8, 8});
  // Stretch band variances so the spectrum is well separated.
  for (int b = 0; b < 6; ++b) {
    for (int p = 0; p < 64; ++p) {
      hsi.mutable_data()[b * 64 + p] *= (b + 1.0);
    }
  }
  const int nc = 3;
  PcaModel model = pca_fit(hsi, nc);
  PowerPca oracle = power_pca(hsi, nc);
  for (int c = 0; c < nc; ++c) {
    // Align the oracle's sign with the implementation convention.
    double dot = 0.0;
    for (int b = 0; b < 6; ++b) {
      dot += model.components.data()[c * 6 + b] *
             oracle.components[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)];
    }
    const double sign = dot < 0.0 ? -1.0 : 1.0;
    for (int b = 0; b < 6; ++b) {
      CHECK(model.components.data()[c * 6 + b] ==
            doctest::Approx(sign * oracle.components[static_cast<std::size_t>(
                                       c)][static_cast<std::size_t>(b)])
                .epsilon(1e-6));
    }
  }
  // Eigenvalues descend and components are orthonormal.
  for (int c = 1; c < nc; ++c) {
    CHECK(model.eigenvalues[static_cast<std::size_t>(c - 1)] >=
          model.eigenvalues[static_cast<std::size_t>(c)]);
  }

  // Rank-nc reconstruction achieves the optimal Frobenius bound: the mean
  // squared residual equals the sum of the dropped eigenvalues.
  {
    PcaModel full = pca_fit(hsi, 6);
    Tensor rec = pca_inverse(pca_apply(hsi, model), model);
    double sq = 0.0;
    for (std::size_t i = 0; i < rec.data().size(); ++i) {
      const double d = rec.data()[i] - hsi.data()[i];
      sq += d * d;
    }
    double dropped = 0.0;
    for (int c = nc; c < 6; ++c) {
      dropped += full.eigenvalues[static_cast<std::size_t>(c)];
    }
    CHECK(sq / 64.0 == doctest::Approx(dropped).epsilon(1e-9));
  }
  for (int a = 0; a < nc; ++a) {
    for (int b = 0; b < nc; ++b) {
      double dot = 0.0;
      for (int i = 0; i < 6; ++i) {
        dot += model.components.data()[a * 6 + i] *
               model.components.data()[b * 6 + i];
      }
      CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("patch extraction counts, centers, and shuffling") {
  SynthConfig scfg;
  scfg.seed = 5;
  scfg.classes = 3;
  scfg.height = scfg.width = 32;
  scfg.bands = 8;
  scfg.aux_channels = 2;
  scfg.train_per_class = 20;
  scfg.test_per_class = 10;
  DatasetBundle bundle = synth_generate(scfg);
  PreparedBundle prep = prepare_features(bundle, 4);

  PatchStream stream = extract_patches(prep, Split::kTrain, 8, 16, 99);
  CHECK(stream.total() == 60);
  std::int64_t count = 0;
  while (auto batch = stream.next()) {
    CHECK(batch->x_h.shape() == Shape{static_cast<int>(batch->labels.size()),
                                      1, 4, 8, 8});
    CHECK(batch->x_aux.shape() ==
          Shape{static_cast<int>(batch->labels.size()), 2, 8, 8});
    for (std::size_t i = 0; i < batch->labels.size(); ++i) {
      const auto [y, x] = batch->centers[i];
      const int expected =
          bundle.labels_train[static_cast<std::size_t>(y) * bundle.width + x] -
          1;
      CHECK(batch->labels[i] == expected);
    }
    count += static_cast<std::int64_t>(batch->labels.size());
  }
  CHECK(count == 60);

  // Shuffles are permutations: same multiset of centers for any seed.
  auto collect = [&](std::optional<std::uint64_t> seed) {
    PatchStream s = extract_patches(prep, Split::kTrain, 8, 16, seed);
    std::vector<std::pair<int, int>> centers = s.centers();
    std::sort(centers.begin(), centers.end());
    return centers;
  };
  CHECK(collect(99) == collect(1234));
  CHECK(collect(std::nullopt) == collect(7));
  // And a seeded order differs from the raster order.
  PatchStream shuffled = extract_patches(prep, Split::kTrain, 8, 16, 99);
  PatchStream raster = extract_patches(prep, Split::kTrain, 8, 16, std::nullopt);
  CHECK(shuffled.centers() != raster.centers());

  CHECK_THROWS_AS(extract_patches(prep, Split::kTrain, 64, 16, std::nullopt),
                  ConfigError);
}

TEST_CASE("patches beyond the border are mirrored") {
  // Hand-built prepared raster so values are directly checkable.
  DatasetBundle bundle;
  bundle.height = 6;
  bundle.width = 6;
  bundle.hsi = Tensor::zeros({2, 6, 6});
  bundle.aux = Tensor::zeros({1, 6, 6});
  bundle.labels_train.assign(36, 0);
  bundle.labels_test.assign(36, 0);
  bundle.labels_train[0] = 1;  // corner pixel
  bundle.meta.classes = {"a"};
  bundle.meta.palette = {{1, 2, 3}};

  PreparedBundle prep;
  Rng rng(6);
  prep.hsi_feat = random_tensor(rng, {2, 6, 6});
  prep.aux_feat = random_tensor(rng, {1, 6, 6});
  prep.bundle = &bundle;

  PatchStream stream = extract_patches(prep, Split::kTrain, 4, 4, std::nullopt);
  auto batch = stream.next();
  REQUIRE(batch.has_value());
  CHECK(batch->labels.size() == 1);

  // Independent mirror-crop: reflect indices symmetrically at the edges.
  auto mirror = [](int i, int n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i - 1;
      if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
  };
  const int k = 4, off = 2;
  for (int c = 0; c < 2; ++c) {
    for (int dy = 0; dy < k; ++dy) {
      for (int dx = 0; dx < k; ++dx) {
        const int sy = mirror(0 - off + dy, 6);
        const int sx = mirror(0 - off + dx, 6);
        CHECK(batch->x_h.data()[(static_cast<std::size_t>(c) * k + dy) * k + dx] ==
              prep.hsi_feat.data()[(static_cast<std::size_t>(c) * 6 + sy) * 6 + sx]);
      }
    }
  }

  // Center pixel of the patch (k/2, k/2) carries the center value.
  const auto [cy, cx] = batch->centers[0];
  CHECK(batch->x_h.data()[(0 * k + k / 2) * k + k / 2] ==
        prep.hsi_feat.data()[static_cast<std::size_t>(cy) * 6 + cx]);
}

TEST_CASE("empty splits raise DataError") {
  DatasetBundle bundle;
  bundle.height = bundle.width = 6;
  bundle.hsi = Tensor::zeros({2, 6, 6});
  bundle.aux = Tensor::zeros({1, 6, 6});
  bundle.labels_train.assign(36, 0);
  bundle.labels_test.assign(36, 0);
  bundle.meta.classes = {"a"};
  bundle.meta.palette = {{0, 0, 0}};
  PreparedBundle prep;
  prep.hsi_feat = Tensor::zeros({2, 6, 6});
  prep.aux_feat = Tensor::zeros({1, 6, 6});
  prep.bundle = &bundle;
  CHECK_THROWS_AS(extract_patches(prep, Split::kTrain, 4, 8, std::nullopt),
                  DataError);
}

TEST_CASE("synth bundles are deterministic and class-balanced") {
  SynthConfig cfg;
  cfg.seed = 9;
  cfg.classes = 4;
  cfg.height = cfg.width = 48;
  cfg.bands = 10;
  cfg.aux_channels = 3;
  cfg.train_per_class = 25;
  cfg.test_per_class = 25;
  DatasetBundle a = synth_generate(cfg);
  DatasetBundle b = synth_generate(cfg);
  CHECK(a.hsi.data() == b.hsi.data());
  CHECK(a.aux.data() == b.aux.data());
  CHECK(a.labels_train == b.labels_train);
  CHECK(a.labels_test == b.labels_test);

  // Disjoint splits with the requested counts.
  std::vector<int> train_n(5, 0), test_n(5, 0);
  for (std::size_t p = 0; p < a.labels_train.size(); ++p) {
    CHECK(!(a.labels_train[p] != 0 && a.labels_test[p] != 0));
    train_n[static_cast<std::size_t>(a.labels_train[p])]++;
    test_n[static_cast<std::size_t>(a.labels_test[p])]++;
  }
  for (int c = 1; c <= 4; ++c) {
    CHECK(train_n[static_cast<std::size_t>(c)] == 25);
    CHECK(test_n[static_cast<std::size_t>(c)] == 25);
  }
}

namespace {

// Nearest-centroid classification oracle over raw per-pixel features.
double centroid_oa(const DatasetBundle& bundle, bool use_hsi, bool use_aux) {
  const int bands = bundle.bands(), caux = bundle.aux_channels();
  const std::int64_t pixels =
      static_cast<std::int64_t>(bundle.height) * bundle.width;
  const int dims = (use_hsi ? bands : 0) + (use_aux ? caux : 0);
  const int k = bundle.num_classes();
  auto feature = [&](std::int64_t p, int d) {
    if (use_hsi && d < bands) return bundle.hsi.data()[d * pixels + p];
    const int ad = d - (use_hsi ? bands : 0);
    return bundle.aux.data()[ad * pixels + p];
  };
  std::vector<std::vector<double>> centroid(
      static_cast<std::size_t>(k), std::vector<double>(static_cast<std::size_t>(dims), 0.0));
  std::vector<std::int64_t> count(static_cast<std::size_t>(k), 0);
  for (std::int64_t p = 0; p < pixels; ++p) {
    const int cls = bundle.labels_train[static_cast<std::size_t>(p)];
    if (cls == 0) continue;
    count[static_cast<std::size_t>(cls - 1)]++;
    for (int d = 0; d < dims; ++d) {
      centroid[static_cast<std::size_t>(cls - 1)][static_cast<std::size_t>(d)] +=
          feature(p, d);
    }
  }
  for (int c = 0; c < k; ++c) {
    for (int d = 0; d < dims; ++d) {
      centroid[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] /=
          static_cast<double>(count[static_cast<std::size_t>(c)]);
    }
  }
  std::int64_t hit = 0, total = 0;
  for (std::int64_t p = 0; p < pixels; ++p) {
    const int cls = bundle.labels_test[static_cast<std::size_t>(p)];
    if (cls == 0) continue;
    int best = 0;
    double best_d = 1e300;
    for (int c = 0; c < k; ++c) {
      double dist = 0.0;
      for (int d = 0; d < dims; ++d) {
        const double diff =
            feature(p, d) -
            centroid[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)];
        dist += diff * diff;
      }
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    total++;
    hit += (best + 1 == cls);
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("easy synth data is separable by a nearest-centroid classifier") {
  SynthConfig cfg;
  cfg.seed = 10;
  cfg.classes = 2;
  cfg.height = cfg.width = 48;
  cfg.bands = 8;
  cfg.aux_channels = 2;
  cfg.difficulty = SynthDifficulty::kEasy;
  cfg.train_per_class = 30;
  cfg.test_per_class = 30;
  DatasetBundle bundle = synth_generate(cfg);
  CHECK(centroid_oa(bundle, true, true) >= 0.95);
}

TEST_CASE("complementary synth data caps single-modality accuracy") {
  SynthConfig cfg;
  cfg.seed = 11;
  cfg.classes = 4;
  cfg.height = cfg.width = 64;
  cfg.bands = 12;
  cfg.aux_channels = 3;
  cfg.difficulty = SynthDifficulty::kComplementary;
  cfg.train_per_class = 40;
  cfg.test_per_class = 60;
  DatasetBundle bundle = synth_generate(cfg);
  // One class pair is invisible in each single modality: the ceiling is
  // (1 - 2/4 * 0.5) + 0.05 = 0.80.
  CHECK(centroid_oa(bundle, true, false) <= 0.80);
  CHECK(centroid_oa(bundle, false, true) <= 0.80);
  // Together the modalities resolve everything.
  CHECK(centroid_oa(bundle, true, true) >= 0.95);
}

TEST_CASE("bundle save/load round-trips byte-identically") {
  SynthConfig cfg;
  cfg.seed = 12;
  cfg.classes = 3;
  cfg.height = cfg.width = 24;
  cfg.bands = 6;
  cfg.aux_channels = 2;
  cfg.train_per_class = 8;
  cfg.test_per_class = 8;
  DatasetBundle bundle = synth_generate(cfg);

  const fs::path dir1 = temp_dir("roundtrip1");
  const fs::path dir2 = temp_dir("roundtrip2");
  save_bundle(bundle, dir1.string());
  DatasetBundle loaded = load_bundle(dir1.string());
  save_bundle(loaded, dir2.string());
  for (const char* name : {"meta.json", "hsi.bin", "aux.bin",
                           "labels_train.bin", "labels_test.bin"}) {
    CHECK(read_file(dir1 / name) == read_file(dir2 / name));
  }
}

TEST_CASE("bundle validation failures name the problem") {
  SynthConfig cfg;
  cfg.seed = 13;
  cfg.classes = 2;
  cfg.height = cfg.width = 24;
  cfg.bands = 4;
  cfg.aux_channels = 1;
  cfg.train_per_class = 5;
  cfg.test_per_class = 5;
  DatasetBundle bundle = synth_generate(cfg);
  const fs::path dir = temp_dir("badlabel");
  save_bundle(bundle, dir.string());

  // Corrupt one train label to K+1.
  {
    std::fstream f(dir / "labels_train.bin",
                   std::ios::binary | std::ios::in | std::ios::out);
    std::int32_t bad = 3;
    f.write(reinterpret_cast<const char*>(&bad), 4);
  }
  CHECK_THROWS_AS(load_bundle(dir.string()), DataError);

  CHECK_THROWS_AS(load_bundle("/nonexistent/path"), DataError);
}

TEST_CASE("aux rasters on a different grid are resampled at load") {
  SynthConfig cfg;
  cfg.seed = 14;
  cfg.classes = 2;
  cfg.height = cfg.width = 20;
  cfg.bands = 4;
  cfg.aux_channels = 2;
  cfg.train_per_class = 5;
  cfg.test_per_class = 5;
  DatasetBundle bundle = synth_generate(cfg);
  const fs::path dir = temp_dir("auxgrid");
  save_bundle(bundle, dir.string());

  // Replace the aux payload with a 43x43 raster and declare its grid.
  Rng rng(15);
  Tensor big = random_tensor(rng, {2, 43, 43});
  {
    std::vector<float> raw(big.data().size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      raw[i] = static_cast<float>(big.data()[i]);
    }
    std::ofstream f(dir / "aux.bin", std::ios::binary | std::ios::trunc);
    f.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * 4));
  }
  {
    std::string meta = read_file(dir / "meta.json");
    meta.insert(meta.find('{') + 1, "\n  \"aux_height\": 43,\n  \"aux_width\": 43,");
    std::ofstream f(dir / "meta.json", std::ios::binary | std::ios::trunc);
    f << meta;
  }
  DatasetBundle loaded = load_bundle(dir.string());
  CHECK(loaded.aux.shape() == Shape{2, 20, 20});
  // Spot-check the nearest-neighbour index rule on the f32-rounded data.
  Tensor big_f32 = Tensor::zeros({2, 43, 43});
  for (std::size_t i = 0; i < big.data().size(); ++i) {
    big_f32.mutable_data()[i] = static_cast<double>(static_cast<float>(big.data()[i]));
  }
  Tensor expect = resample_nn(big_f32, 20, 20);
  CHECK(loaded.aux.data() == expect.data());
}
