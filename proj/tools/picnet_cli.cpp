// Command-line front end for the full pipeline: synthetic data
// generation, training, evaluation, map prediction, gradient self-checks
// and bundle inspection.
//
// Exit codes: 0 success, 1 validation/configuration/data error, 2 numeric
// failure. Every subcommand echoes its fully resolved configuration
// (defaults made explicit) before doing any work.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "picnet/checkpoint.hpp"
#include "picnet/errors.hpp"
#include "picnet/gradcheck.hpp"
#include "picnet/kernels.hpp"
#include "picnet/metrics.hpp"
#include "picnet/parallel.hpp"
#include "picnet/synth.hpp"
#include "picnet/train.hpp"

namespace fs = std::filesystem;
using namespace picnet;

namespace {

struct EchoEntry {
  std::string key, value;
};

class ConfigEcho {
 public:
  void add(const std::string& key, const std::string& value) {
    entries_.push_back({key, value});
  }
  void add(const std::string& key, const char* value) {
    add(key, std::string(value));
  }
  void add(const std::string& key, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    add(key, std::string(buf));
  }
  template <typename T>
  void add(const std::string& key, T value) {
    add(key, std::to_string(value));
  }
  void print() const {
    for (const auto& e : entries_) {
      std::cout << "config " << e.key << " = " << e.value << "\n";
    }
    std::cout.flush();
  }

 private:
  std::vector<EchoEntry> entries_;
};

void echo_runtime(ConfigEcho& echo) {
  echo.add("simd", kernels::active_name());
  echo.add("threads", worker_threads());
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path + ": write failed");
}

void print_metrics(const DatasetBundle& bundle, const EvalResult& r) {
  std::printf("%-5s %-24s %10s %10s\n", "class", "name", "samples", "acc");
  for (int c = 0; c < r.cm.k; ++c) {
    std::int64_t row = 0;
    for (int j = 0; j < r.cm.k; ++j) row += r.cm.at(c, j);
    const double acc = r.metrics.per_class[static_cast<std::size_t>(c)];
    if (row > 0) {
      std::printf("%-5d %-24s %10" PRId64 " %10.4f\n", c + 1,
                  bundle.meta.classes[static_cast<std::size_t>(c)].c_str(),
                  row, acc);
    } else {
      std::printf("%-5d %-24s %10" PRId64 " %10s\n", c + 1,
                  bundle.meta.classes[static_cast<std::size_t>(c)].c_str(),
                  row, "n/a");
    }
  }
  std::printf("OA %.4f  AA %.4f  Kappa %.6f\n", r.metrics.oa, r.metrics.aa,
              r.metrics.kappa);
}

int run(int argc, char** argv) {
  CLI::App app{"Multi-source (HSI + SAR/LiDAR) patch classifier: frequency "
               "interaction encoder, prototype cross-attention compensation, "
               "composite loss"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a synthetic bundle");
  SynthConfig scfg;
  std::string synth_out;
  std::string difficulty = "easy";
  int synth_size = 64;
  synth->add_option("--seed", scfg.seed, "rng seed")->capture_default_str();
  synth->add_option("--classes", scfg.classes, "number of classes")
      ->capture_default_str();
  synth->add_option("--size", synth_size, "raster edge (size x size)")
      ->capture_default_str();
  synth->add_option("--bands", scfg.bands, "HSI band count")
      ->capture_default_str();
  synth->add_option("--aux-channels", scfg.aux_channels, "aux channel count")
      ->capture_default_str();
  synth->add_option("--difficulty", difficulty, "easy | complementary")
      ->capture_default_str();
  synth->add_option("--train-per-class", scfg.train_per_class,
                    "train pixels per class")
      ->capture_default_str();
  synth->add_option("--test-per-class", scfg.test_per_class,
                    "test pixels per class")
      ->capture_default_str();
  synth->add_option("--out", synth_out, "output bundle directory")
      ->required();

  // ---- train ----
  auto* tr = app.add_subcommand("train", "train on a bundle");
  std::string train_data, train_out, resume_path;
  ModelConfig mcfg;
  TrainConfig tcfg;
  int checkpoint_every = 0;
  tr->add_option("--data", train_data, "bundle directory")->required();
  tr->add_option("--out", train_out, "output directory for checkpoint/history")
      ->required();
  tr->add_option("--patch-size", mcfg.patch, "patch edge k (even)")
      ->capture_default_str();
  tr->add_option("--pca-components", mcfg.n_pca, "HSI principal components")
      ->capture_default_str();
  tr->add_option("--fim-blocks", mcfg.n_fim, "frequency interaction blocks")
      ->capture_default_str();
  tr->add_option("--lambda1", mcfg.lambda1, "X consistency weight")
      ->capture_default_str();
  tr->add_option("--lambda2", mcfg.lambda2, "H consistency weight")
      ->capture_default_str();
  tr->add_option("--lr", tcfg.lr, "Adam learning rate")->capture_default_str();
  tr->add_option("--epochs", tcfg.epochs, "training epochs")
      ->capture_default_str();
  tr->add_option("--batch", tcfg.batch, "batch size")->capture_default_str();
  tr->add_option("--seed", tcfg.seed, "rng seed")->capture_default_str();
  tr->add_option("--channels", mcfg.c_h, "encoder channels per branch")
      ->capture_default_str();
  tr->add_option("--d-model", mcfg.d_model, "token embedding width")
      ->capture_default_str();
  tr->add_option("--se-reduction", mcfg.se_reduction,
                 "channel-attention bottleneck ratio")
      ->capture_default_str();
  tr->add_option("--checkpoint-every", checkpoint_every,
                 "also save every N epochs (0 = final only)")
      ->capture_default_str();
  tr->add_option("--resume", resume_path, "checkpoint to continue from")
      ->capture_default_str();

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_data, eval_ckpt, eval_split = "test";
  ev->add_option("--data", eval_data, "bundle directory")->required();
  ev->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  ev->add_option("--split", eval_split, "train | test")
      ->capture_default_str();

  // ---- predict ----
  auto* pr = app.add_subcommand("predict", "write a classification map");
  std::string pred_data, pred_ckpt, pred_out;
  bool all_pixels = false;
  pr->add_option("--data", pred_data, "bundle directory")->required();
  pr->add_option("--checkpoint", pred_ckpt, "checkpoint file")->required();
  pr->add_option("--out-map", pred_out, "output PPM path")->required();
  pr->add_flag("--all-pixels", all_pixels,
               "classify every pixel, not just labeled ones");

  // ---- gradcheck ----
  auto* gc = app.add_subcommand("gradcheck",
                                "finite-difference self-check of every op");
  std::uint64_t gc_seed = 1;
  int gc_draws = 20;
  gc->add_option("--seed", gc_seed, "rng seed")->capture_default_str();
  gc->add_option("--seeds", gc_draws, "random draws per op")
      ->capture_default_str();

  // ---- inspect ----
  auto* in = app.add_subcommand("inspect", "print bundle statistics");
  std::string inspect_data;
  in->add_option("--data", inspect_data, "bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // help/version exit 0, parse errors exit 1
  }

  if (synth->parsed()) {
    scfg.difficulty = parse_difficulty(difficulty);
    scfg.height = scfg.width = synth_size;
    ConfigEcho echo;
    echo.add("subcommand", std::string("synth"));
    echo.add("seed", scfg.seed);
    echo.add("classes", scfg.classes);
    echo.add("size", synth_size);
    echo.add("bands", scfg.bands);
    echo.add("aux-channels", scfg.aux_channels);
    echo.add("difficulty", difficulty);
    echo.add("train-per-class", scfg.train_per_class);
    echo.add("test-per-class", scfg.test_per_class);
    echo.add("out", synth_out);
    echo_runtime(echo);
    echo.print();
    DatasetBundle bundle = synth_generate(scfg);
    save_bundle(bundle, synth_out);
    std::cout << "wrote bundle to " << synth_out << " ("
              << labeled_centers(bundle, Split::kTrain).size() << " train / "
              << labeled_centers(bundle, Split::kTest).size()
              << " test labeled pixels)\n";
    return 0;
  }

  if (tr->parsed()) {
    mcfg.c_x = mcfg.c_h;
    ConfigEcho echo;
    echo.add("subcommand", std::string("train"));
    echo.add("data", train_data);
    echo.add("out", train_out);
    echo.add("patch-size", mcfg.patch);
    echo.add("pca-components", mcfg.n_pca);
    echo.add("fim-blocks", mcfg.n_fim);
    echo.add("lambda1", mcfg.lambda1);
    echo.add("lambda2", mcfg.lambda2);
    echo.add("lr", tcfg.lr);
    echo.add("epochs", tcfg.epochs);
    echo.add("batch", tcfg.batch);
    echo.add("seed", tcfg.seed);
    echo.add("channels", mcfg.c_h);
    echo.add("d-model", mcfg.d_model);
    echo.add("se-reduction", mcfg.se_reduction);
    echo.add("checkpoint-every", checkpoint_every);
    echo.add("resume", resume_path.empty() ? "(none)" : resume_path);
    echo_runtime(echo);
    echo.print();

    DatasetBundle bundle = load_bundle(train_data);
    std::error_code ec;
    fs::create_directories(train_out, ec);
    if (ec) throw IoError(train_out + ": " + ec.message());
    const std::string ckpt_path =
        (fs::path(train_out) / "checkpoint.picnet").string();
    const std::string hist_path =
        (fs::path(train_out) / "history.ndjson").string();

    Checkpoint resume;
    const bool resuming = !resume_path.empty();
    if (resuming) resume = load_checkpoint(resume_path);

    bool reported_params = false;
    auto on_epoch = [&](const PicnetModel& model, const AdamState& adam,
                        const EpochStats& s) {
      if (!reported_params) {
        std::printf("parameters: %" PRId64 " (%.4f M)\n", model.param_count(),
                    model.param_count() / 1e6);
        reported_params = true;
      }
      std::printf("epoch %4d  l_ce %.6f  l_cyc_x %.6f  l_cyc_h %.6f  "
                  "total %.6f\n",
                  s.epoch, s.l_ce, s.l_cyc_x, s.l_cyc_h, s.total);
      if (checkpoint_every > 0 && s.epoch % checkpoint_every == 0) {
        save_checkpoint(ckpt_path, model, adam, s.epoch, tcfg.seed);
      }
    };
    TrainResult result = train(bundle, mcfg, tcfg, on_epoch,
                               resuming ? &resume : nullptr);
    save_checkpoint(ckpt_path, result.model, result.adam, tcfg.epochs,
                    tcfg.seed);
    write_history(hist_path, result.history);
    std::cout << "wrote " << ckpt_path << " and " << hist_path << "\n";
    return 0;
  }

  if (ev->parsed()) {
    ConfigEcho echo;
    echo.add("subcommand", std::string("eval"));
    echo.add("data", eval_data);
    echo.add("checkpoint", eval_ckpt);
    echo.add("split", eval_split);
    echo_runtime(echo);
    echo.print();
    if (eval_split != "train" && eval_split != "test") {
      throw ConfigError("--split must be train or test");
    }
    DatasetBundle bundle = load_bundle(eval_data);
    Checkpoint ckpt = load_checkpoint(eval_ckpt);
    PicnetModel model = model_from_checkpoint(ckpt);
    EvalResult r = evaluate(
        model, bundle,
        eval_split == "train" ? Split::kTrain : Split::kTest);
    print_metrics(bundle, r);
    return 0;
  }

  if (pr->parsed()) {
    ConfigEcho echo;
    echo.add("subcommand", std::string("predict"));
    echo.add("data", pred_data);
    echo.add("checkpoint", pred_ckpt);
    echo.add("out-map", pred_out);
    echo.add("all-pixels", all_pixels ? "true" : "false");
    echo_runtime(echo);
    echo.print();
    DatasetBundle bundle = load_bundle(pred_data);
    Checkpoint ckpt = load_checkpoint(pred_ckpt);
    PicnetModel model = model_from_checkpoint(ckpt);
    const auto raster = predict_map(model, bundle, all_pixels);
    write_file(pred_out, render_ppm(raster, bundle.height, bundle.width,
                                    bundle.meta.palette));
    std::cout << "wrote " << pred_out << "\n";
    return 0;
  }

  if (gc->parsed()) {
    ConfigEcho echo;
    echo.add("subcommand", std::string("gradcheck"));
    echo.add("seed", gc_seed);
    echo.add("seeds", gc_draws);
    echo_runtime(echo);
    echo.print();
    const auto cases = run_gradient_suite(gc_seed, gc_draws);
    for (const auto& c : cases) {
      std::printf("%-4s %-20s max_rel_err %.3e  (tol %.0e)\n",
                  c.pass ? "PASS" : "FAIL", c.name.c_str(), c.max_rel_err,
                  c.tolerance);
    }
    if (!all_pass(cases)) {
      throw NumericError("gradient suite failed");
    }
    return 0;
  }

  if (in->parsed()) {
    ConfigEcho echo;
    echo.add("subcommand", std::string("inspect"));
    echo.add("data", inspect_data);
    echo_runtime(echo);
    echo.print();
    DatasetBundle bundle = load_bundle(inspect_data);
    std::cout << "raster: " << bundle.height << "x" << bundle.width << ", "
              << bundle.bands() << " HSI bands, " << bundle.aux_channels()
              << " aux channels, " << bundle.num_classes() << " classes\n";
    std::vector<std::int64_t> train_n(bundle.num_classes() + 1, 0);
    std::vector<std::int64_t> test_n(bundle.num_classes() + 1, 0);
    for (std::int32_t v : bundle.labels_train) train_n[v] += v != 0;
    for (std::int32_t v : bundle.labels_test) test_n[v] += v != 0;
    std::printf("%-5s %-24s %10s %10s\n", "class", "name", "train", "test");
    std::int64_t train_total = 0, test_total = 0;
    for (int c = 1; c <= bundle.num_classes(); ++c) {
      std::printf("%-5d %-24s %10" PRId64 " %10" PRId64 "\n", c,
                  bundle.meta.classes[static_cast<std::size_t>(c) - 1].c_str(),
                  train_n[c], test_n[c]);
      train_total += train_n[c];
      test_total += test_n[c];
    }
    std::printf("%-5s %-24s %10" PRId64 " %10" PRId64 "\n", "-", "total",
                train_total, test_total);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
