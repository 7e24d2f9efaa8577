#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "picnet/adam.hpp"
#include "picnet/checkpoint.hpp"
#include "picnet/datapipe.hpp"
#include "picnet/metrics.hpp"
#include "picnet/model.hpp"

namespace picnet {

struct TrainConfig {
  double lr = 1e-3;
  int epochs = 100;
  int batch = 64;
  std::uint64_t seed = 1;
  void validate() const;  // throws ConfigError
};

struct EpochStats {
  int epoch = 0;
  double l_ce = 0.0;
  double l_cyc_x = 0.0;
  double l_cyc_h = 0.0;
  double total = 0.0;
};

struct TrainResult {
  PicnetModel model;
  AdamState adam;
  std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(
    const PicnetModel&, const AdamState&, const EpochStats&)>;

// Deterministic training loop: per-epoch shuffle order derives from
// (seed, epoch), so a fixed seed pins the whole loss trajectory and a
// resumed run replays the exact continuation. Aborts with NumericError
// naming the epoch/step if the loss goes non-finite.
//
// `resume` continues from a checkpoint (epochs already run come from its
// epoch counter); `on_epoch` fires after each epoch with the logged means.
TrainResult train(const DatasetBundle& bundle, ModelConfig model_cfg,
                  const TrainConfig& train_cfg,
                  const EpochCallback& on_epoch = {},
                  const Checkpoint* resume = nullptr);

struct EvalResult {
  ConfusionMatrix cm;
  ClassMetrics metrics;
};

// Confusion matrix and OA/AA/Kappa over the labeled pixels of a split.
EvalResult evaluate(const PicnetModel& model, const DatasetBundle& bundle,
                    Split split, int eval_batch = 256);

// Argmax class raster (1..K; 0 where skipped). Ties resolve to the lower
// class index. all_pixels=false restricts to train+test labeled pixels.
std::vector<std::int32_t> predict_map(const PicnetModel& model,
                                      const DatasetBundle& bundle,
                                      bool all_pixels, int eval_batch = 256);

// Binary PPM (P6, maxval 255); class 0 renders black, class c takes
// palette[c-1]. Throws ConfigError when the palette is too short.
std::string render_ppm(const std::vector<std::int32_t>& labels, int height,
                       int width,
                       const std::vector<std::array<std::uint8_t, 3>>& palette);

// Newline-delimited JSON records
// {"epoch":..,"l_ce":..,"l_cyc_x":..,"l_cyc_h":..,"total":..}.
void write_history(const std::string& path,
                   const std::vector<EpochStats>& history);
std::vector<EpochStats> read_history(const std::string& path);

}  // namespace picnet
