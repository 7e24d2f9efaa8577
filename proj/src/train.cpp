#include "picnet/train.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "picnet/errors.hpp"
#include "picnet/ops.hpp"
#include "picnet/rng.hpp"
#include "picnet/tape.hpp"

namespace picnet {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
}

TrainResult train(const DatasetBundle& bundle, ModelConfig model_cfg,
                  const TrainConfig& train_cfg, const EpochCallback& on_epoch,
                  const Checkpoint* resume) {
  train_cfg.validate();
  model_cfg.n_classes = bundle.num_classes();
  model_cfg.c_aux = bundle.aux_channels();
  model_cfg.validate();

  const PreparedBundle prep = prepare_features(bundle, model_cfg.n_pca);

  int start_epoch = 0;
  PicnetModel model = [&] {
    if (resume != nullptr) {
      start_epoch = static_cast<int>(resume->epoch);
      return model_from_checkpoint(*resume);
    }
    return PicnetModel(model_cfg, Rng::derive(train_cfg.seed, 0xA11CE));
  }();
  AdamState adam =
      resume != nullptr ? resume->adam : AdamState(train_cfg.lr);
  adam.lr = train_cfg.lr;
  const NamedParams params = model.named_params();
  adam.ensure_registered(params);

  const ModelConfig& cfg = model.config();
  TrainResult result{std::move(model), std::move(adam), {}};

  for (int epoch = start_epoch + 1; epoch <= train_cfg.epochs; ++epoch) {
    PatchStream stream =
        extract_patches(prep, Split::kTrain, cfg.patch, train_cfg.batch,
                        Rng::derive(train_cfg.seed, static_cast<std::uint64_t>(epoch)));
    double sum_ce = 0.0, sum_x = 0.0, sum_h = 0.0, sum_total = 0.0;
    std::int64_t seen = 0;
    int step = 0;
    while (auto batch = stream.next()) {
      ++step;
      LossParts parts;
      {
        GradTape tape;
        ForwardOut out = result.model.forward(batch->x_h, batch->x_aux);
        parts = picnet_loss(out, batch->labels, cfg.lambda1, cfg.lambda2);
        if (!parts.total.all_finite()) {
          throw NumericError("train: non-finite loss at epoch " +
                             std::to_string(epoch) + " step " +
                             std::to_string(step));
        }
        backward(parts.total);
      }
      adam_step(params, result.adam);
      const double n = static_cast<double>(batch->labels.size());
      sum_ce += parts.ce.item() * n;
      sum_x += parts.cyc_x.item() * n;
      sum_h += parts.cyc_h.item() * n;
      sum_total += parts.total.item() * n;
      seen += batch->labels.size();
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.l_ce = sum_ce / static_cast<double>(seen);
    stats.l_cyc_x = sum_x / static_cast<double>(seen);
    stats.l_cyc_h = sum_h / static_cast<double>(seen);
    stats.total = sum_total / static_cast<double>(seen);
    result.history.push_back(stats);
    if (on_epoch) on_epoch(result.model, result.adam, stats);
  }
  return result;
}

namespace {

int argmax_row(const double* row, int k) {
  int best = 0;
  for (int j = 1; j < k; ++j) {
    // Strict comparison: ties resolve to the lower class index.
    if (row[j] > row[best]) best = j;
  }
  return best;
}

}  // namespace

EvalResult evaluate(const PicnetModel& model, const DatasetBundle& bundle,
                    Split split, int eval_batch) {
  const ModelConfig& cfg = model.config();
  if (bundle.num_classes() != cfg.n_classes ||
      bundle.aux_channels() != cfg.c_aux) {
    throw ConfigError("evaluate: bundle (" +
                      std::to_string(bundle.num_classes()) + " classes, " +
                      std::to_string(bundle.aux_channels()) +
                      " aux channels) does not match model (" +
                      std::to_string(cfg.n_classes) + ", " +
                      std::to_string(cfg.c_aux) + ")");
  }
  const PreparedBundle prep = prepare_features(bundle, cfg.n_pca);
  PatchStream stream =
      extract_patches(prep, split, cfg.patch, eval_batch, std::nullopt);
  EvalResult result;
  result.cm = ConfusionMatrix(cfg.n_classes);
  while (auto batch = stream.next()) {
    const ForwardOut out = model.forward(batch->x_h, batch->x_aux);
    const double* logits = out.logits.data().data();
    for (std::size_t i = 0; i < batch->labels.size(); ++i) {
      const int pred = argmax_row(
          logits + static_cast<std::int64_t>(i) * cfg.n_classes,
          cfg.n_classes);
      result.cm.add(batch->labels[i], pred);
    }
  }
  result.metrics = compute_metrics(result.cm);
  return result;
}

std::vector<std::int32_t> predict_map(const PicnetModel& model,
                                      const DatasetBundle& bundle,
                                      bool all_pixels, int eval_batch) {
  const ModelConfig& cfg = model.config();
  const PreparedBundle prep = prepare_features(bundle, cfg.n_pca);
  std::vector<std::pair<int, int>> centers;
  if (all_pixels) {
    centers.reserve(static_cast<std::size_t>(bundle.height) * bundle.width);
    for (int y = 0; y < bundle.height; ++y) {
      for (int x = 0; x < bundle.width; ++x) centers.emplace_back(y, x);
    }
  } else {
    for (int y = 0; y < bundle.height; ++y) {
      for (int x = 0; x < bundle.width; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * bundle.width + x;
        if (bundle.labels_train[p] != 0 || bundle.labels_test[p] != 0) {
          centers.emplace_back(y, x);
        }
      }
    }
  }
  std::vector<std::int32_t> raster(
      static_cast<std::size_t>(bundle.height) * bundle.width, 0);
  PatchStream stream(prep, std::move(centers), {}, cfg.patch, eval_batch);
  while (auto batch = stream.next()) {
    const ForwardOut out = model.forward(batch->x_h, batch->x_aux);
    const double* logits = out.logits.data().data();
    for (std::size_t i = 0; i < batch->centers.size(); ++i) {
      const auto [y, x] = batch->centers[i];
      const int pred = argmax_row(
          logits + static_cast<std::int64_t>(i) * cfg.n_classes,
          cfg.n_classes);
      raster[static_cast<std::size_t>(y) * bundle.width + x] = pred + 1;
    }
  }
  return raster;
}

std::string render_ppm(const std::vector<std::int32_t>& labels, int height,
                       int width,
                       const std::vector<std::array<std::uint8_t, 3>>& palette) {
  if (static_cast<std::size_t>(height) * width != labels.size()) {
    throw ShapeError("render_ppm: raster size mismatch");
  }
  std::int32_t max_label = 0;
  for (std::int32_t v : labels) max_label = std::max(max_label, v);
  if (max_label > static_cast<std::int32_t>(palette.size())) {
    throw ConfigError("render_ppm: palette has " +
                      std::to_string(palette.size()) + " colors, raster needs " +
                      std::to_string(max_label));
  }
  std::string out = "P6\n" + std::to_string(width) + " " +
                    std::to_string(height) + "\n255\n";
  out.reserve(out.size() + labels.size() * 3);
  for (std::int32_t v : labels) {
    if (v == 0) {
      out.append(3, '\0');
    } else {
      const auto& rgb = palette[static_cast<std::size_t>(v) - 1];
      out.push_back(static_cast<char>(rgb[0]));
      out.push_back(static_cast<char>(rgb[1]));
      out.push_back(static_cast<char>(rgb[2]));
    }
  }
  return out;
}

void write_history(const std::string& path,
                   const std::vector<EpochStats>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  for (const EpochStats& e : history) {
    json j;
    j["epoch"] = e.epoch;
    j["l_ce"] = e.l_ce;
    j["l_cyc_x"] = e.l_cyc_x;
    j["l_cyc_h"] = e.l_cyc_h;
    j["total"] = e.total;
    out << j.dump() << "\n";
  }
  if (!out) throw IoError(path + ": write failed");
}

std::vector<EpochStats> read_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open");
  std::vector<EpochStats> history;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path + ": bad history line: " + e.what());
    }
    EpochStats s;
    s.epoch = j.at("epoch").get<int>();
    s.l_ce = j.at("l_ce").get<double>();
    s.l_cyc_x = j.at("l_cyc_x").get<double>();
    s.l_cyc_h = j.at("l_cyc_h").get<double>();
    s.total = j.at("total").get<double>();
    history.push_back(s);
  }
  return history;
}

}  // namespace picnet
