#include "picnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "picnet/errors.hpp"
#include "picnet/rng.hpp"

namespace picnet {

SynthDifficulty parse_difficulty(const std::string& name) {
  if (name == "easy") return SynthDifficulty::kEasy;
  if (name == "complementary") return SynthDifficulty::kComplementary;
  throw ConfigError("difficulty must be 'easy' or 'complementary', got '" +
                    name + "'");
}

std::string difficulty_name(SynthDifficulty d) {
  return d == SynthDifficulty::kEasy ? "easy" : "complementary";
}

namespace {

// Signature/level group ids. In complementary mode, 0-based classes
// 4i and 4i+1 share an HSI signature (aux tells them apart) while 4i+2
// and 4i+3 share an aux level (HSI tells them apart).
int hsi_group(int c0, SynthDifficulty d) {
  if (d == SynthDifficulty::kComplementary && c0 % 4 < 2) return c0 & ~1;
  return c0;
}

int aux_group(int c0, SynthDifficulty d) {
  if (d == SynthDifficulty::kComplementary && c0 % 4 >= 2) return c0 & ~1;
  return c0;
}

std::array<std::uint8_t, 3> wheel_color(int index, int count) {
  // Deterministic hue wheel.
  const double hue = std::fmod(index * 360.0 / count + 20.0, 360.0);
  const double s = 0.75, v = 0.9;
  const double c = v * s;
  const double hp = hue / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) {
    r = c; g = x;
  } else if (hp < 2) {
    r = x; g = c;
  } else if (hp < 3) {
    g = c; b = x;
  } else if (hp < 4) {
    g = x; b = c;
  } else if (hp < 5) {
    r = x; b = c;
  } else {
    r = c; b = x;
  }
  const double m = v - c;
  auto to8 = [&](double u) {
    return static_cast<std::uint8_t>(std::lround((u + m) * 255.0));
  };
  return {to8(r), to8(g), to8(b)};
}

}  // namespace

DatasetBundle synth_generate(const SynthConfig& cfg) {
  if (cfg.classes < 2) throw ConfigError("synth: classes must be >= 2");
  if (cfg.height < 8 || cfg.width < 8) {
    throw ConfigError("synth: raster must be at least 8x8");
  }
  if (cfg.bands < 2) throw ConfigError("synth: bands must be >= 2");
  if (cfg.aux_channels < 1) throw ConfigError("synth: aux_channels must be >= 1");
  if (cfg.train_per_class < 1 || cfg.test_per_class < 1) {
    throw ConfigError("synth: per-class sample counts must be >= 1");
  }

  Rng rng(cfg.seed);
  const int k = cfg.classes;
  const int h = cfg.height, w = cfg.width;
  const std::int64_t pixels = static_cast<std::int64_t>(h) * w;

  // Blob-structured class raster: nearest of several seeded sites.
  struct Site {
    int y, x, cls;  // cls is 1-based
  };
  std::vector<Site> sites;
  const int sites_per_class = 4;
  for (int i = 0; i < k * sites_per_class; ++i) {
    sites.push_back({static_cast<int>(rng.uniform_int(0, h - 1)),
                     static_cast<int>(rng.uniform_int(0, w - 1)),
                     i % k + 1});
  }
  std::vector<std::int32_t> full(static_cast<std::size_t>(pixels), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::int64_t best = -1;
      int cls = 1;
      for (const Site& s : sites) {
        const std::int64_t dy = y - s.y, dx = x - s.x;
        const std::int64_t d2 = dy * dy + dx * dx;
        if (best < 0 || d2 < best) {
          best = d2;
          cls = s.cls;
        }
      }
      full[static_cast<std::size_t>(y) * w + x] = cls;
    }
  }

  // HSI: Gaussian spectral bump per signature group plus noise.
  const double noise = cfg.noise;
  auto signature = [&](int group, int band) {
    const double center = (group + 0.5) * cfg.bands / static_cast<double>(k);
    const double sigma = std::max(1.0, cfg.bands / (1.5 * k));
    const double z = (band - center) / sigma;
    return std::exp(-0.5 * z * z);
  };
  DatasetBundle b;
  b.height = h;
  b.width = w;
  b.hsi = Tensor::zeros({cfg.bands, h, w});
  {
    double* data = b.hsi.mutable_data().data();
    for (int band = 0; band < cfg.bands; ++band) {
      double* plane = data + static_cast<std::int64_t>(band) * pixels;
      for (std::int64_t p = 0; p < pixels; ++p) {
        const int c0 = full[static_cast<std::size_t>(p)] - 1;
        plane[p] = signature(hsi_group(c0, cfg.difficulty), band) +
                   noise * rng.normal();
      }
    }
  }

  // Aux: per-group intensity level with a mild per-channel tilt.
  auto aux_level = [&](int group, int channel) {
    const double base = -1.0 + 2.0 * (group + 0.5) / k;
    return base * (1.0 + 0.25 * channel);
  };
  b.aux = Tensor::zeros({cfg.aux_channels, h, w});
  {
    double* data = b.aux.mutable_data().data();
    for (int ch = 0; ch < cfg.aux_channels; ++ch) {
      double* plane = data + static_cast<std::int64_t>(ch) * pixels;
      for (std::int64_t p = 0; p < pixels; ++p) {
        const int c0 = full[static_cast<std::size_t>(p)] - 1;
        plane[p] = aux_level(aux_group(c0, cfg.difficulty), ch) +
                   noise * rng.normal();
      }
    }
  }

  // Sample disjoint train/test pixels per class from blob interiors.
  b.labels_train.assign(static_cast<std::size_t>(pixels), 0);
  b.labels_test.assign(static_cast<std::size_t>(pixels), 0);
  auto interior = [&](int y, int x) {
    const std::int32_t cls = full[static_cast<std::size_t>(y) * w + x];
    for (int dy = -2; dy <= 2; ++dy) {
      for (int dx = -2; dx <= 2; ++dx) {
        const int yy = y + dy, xx = x + dx;
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) return false;
        if (full[static_cast<std::size_t>(yy) * w + xx] != cls) return false;
      }
    }
    return true;
  };
  for (int cls = 1; cls <= k; ++cls) {
    std::vector<std::int64_t> eligible;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (full[static_cast<std::size_t>(y) * w + x] == cls &&
            interior(y, x)) {
          eligible.push_back(static_cast<std::int64_t>(y) * w + x);
        }
      }
    }
    const int need = cfg.train_per_class + cfg.test_per_class;
    if (static_cast<int>(eligible.size()) < need) {
      throw ConfigError("synth: class " + std::to_string(cls) + " has only " +
                        std::to_string(eligible.size()) +
                        " interior pixels, need " + std::to_string(need) +
                        " (increase raster size or lower the counts)");
    }
    rng.shuffle(eligible);
    for (int i = 0; i < cfg.train_per_class; ++i) {
      b.labels_train[static_cast<std::size_t>(eligible[i])] = cls;
    }
    for (int i = 0; i < cfg.test_per_class; ++i) {
      b.labels_test[static_cast<std::size_t>(
          eligible[cfg.train_per_class + i])] = cls;
    }
  }

  for (int c = 1; c <= k; ++c) {
    b.meta.classes.push_back("class_" + std::to_string(c));
    b.meta.palette.push_back(wheel_color(c - 1, k));
  }
  b.validate();
  return b;
}

}  // namespace picnet
