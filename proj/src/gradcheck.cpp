#include "picnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "picnet/errors.hpp"
#include "picnet/model.hpp"
#include "picnet/ops.hpp"
#include "picnet/rng.hpp"
#include "picnet/tape.hpp"

namespace picnet {

double check_gradients(const std::vector<Tensor>& params,
                       const std::function<Tensor()>& loss_fn, double h) {
  for (Tensor p : params) p.drop_grad();  // stale gradients would double-count
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  {
    GradTape tape;
    Tensor loss = loss_fn();
    backward(loss);
    for (const Tensor& p : params) {
      analytic.push_back(p.has_grad()
                             ? p.grad()
                             : std::vector<double>(p.data().size(), 0.0));
    }
  }
  for (Tensor p : params) p.drop_grad();

  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    std::vector<double>& data = p.mutable_data();
    double a_max = 0.0, f_max = 0.0, d_max = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + h;
      const double up = loss_fn().item();
      data[i] = orig - h;
      const double down = loss_fn().item();
      data[i] = orig;
      const double fd = (up - down) / (2.0 * h);
      const double an = analytic[pi][i];
      a_max = std::max(a_max, std::fabs(an));
      f_max = std::max(f_max, std::fabs(fd));
      d_max = std::max(d_max, std::fabs(fd - an));
    }
    const double scale = std::max({a_max, f_max, 1e-8});
    worst = std::max(worst, d_max / scale);
  }
  return worst;
}

namespace {

Tensor rand_t(Rng& rng, Shape shape, bool rg = true, double lo = -1.0,
              double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape), rg);
  for (auto& v : t.mutable_data()) v = rng.uniform(lo, hi);
  return t;
}

// Uniform magnitudes in [min_abs, 1) with random sign; keeps relu test
// points away from the kink.
Tensor rand_signed(Rng& rng, Shape shape, double min_abs, bool rg = true) {
  Tensor t = Tensor::zeros(std::move(shape), rg);
  for (auto& v : t.mutable_data()) {
    const double mag = rng.uniform(min_abs, 1.0);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

// Scalar probe loss dot(y, r): exercises backward with a generic
// upstream gradient instead of all-ones.
Tensor probe(const Tensor& y, const Tensor& r) {
  return ops::sum(ops::mul(y, r));
}

// True when no relu input during one forward sits within `margin` of 0;
// central differences are only trusted at such points.
bool kink_free(const std::function<Tensor()>& forward, double margin) {
  double min_abs = 1e300;
  ops::set_relu_watch(&min_abs);
  forward();
  ops::set_relu_watch(nullptr);
  return min_abs > margin;
}

constexpr double kKinkMargin = 2e-4;

double case_add(Rng& rng) {
  Tensor a = rand_t(rng, {3, 4});
  Tensor b = rand_t(rng, {3, 4});
  Tensor r = rand_t(rng, {3, 4}, false);
  return check_gradients(
      {a, b}, [&] { return probe(ops::add(a, b), r); });
}

double case_matmul(Rng& rng) {
  Tensor a = rand_t(rng, {3, 4});
  Tensor b = rand_t(rng, {4, 2});
  Tensor r = rand_t(rng, {3, 2}, false);
  return check_gradients(
      {a, b}, [&] { return probe(ops::matmul(a, b), r); });
}

double case_conv2d(Rng& rng) {
  Tensor x = rand_t(rng, {2, 3, 5, 5});
  Tensor w = rand_t(rng, {4, 3, 3, 3});
  Tensor b = rand_t(rng, {4});
  Tensor r = rand_t(rng, {2, 4, 5, 5}, false);
  return check_gradients(
      {x, w, b}, [&] { return probe(ops::conv2d(x, w, b, 1, 1), r); });
}

double case_conv2d_strided(Rng& rng) {
  Tensor x = rand_t(rng, {1, 2, 7, 6});
  Tensor w = rand_t(rng, {3, 2, 3, 3});
  Tensor b = rand_t(rng, {3});
  Tensor r = rand_t(rng, {1, 3, 4, 3}, false);
  return check_gradients(
      {x, w, b}, [&] { return probe(ops::conv2d(x, w, b, 2, 1), r); });
}

double case_depthwise(Rng& rng) {
  Tensor x = rand_t(rng, {2, 3, 5, 5});
  Tensor w = rand_t(rng, {3, 1, 3, 3});
  Tensor r = rand_t(rng, {2, 3, 5, 5}, false);
  return check_gradients(
      {x, w}, [&] { return probe(ops::depthwise_conv2d(x, w, 1, 1), r); });
}

double case_conv3d(Rng& rng) {
  Tensor x = rand_t(rng, {1, 2, 4, 4, 4});
  Tensor w = rand_t(rng, {3, 2, 3, 3, 3});
  Tensor b = rand_t(rng, {3});
  Tensor r = rand_t(rng, {1, 3, 4, 4, 4}, false);
  return check_gradients(
      {x, w, b}, [&] { return probe(ops::conv3d(x, w, b, 1, 1), r); });
}

double case_avg_pool(Rng& rng) {
  Tensor x = rand_t(rng, {2, 3, 5, 5});
  Tensor r = rand_t(rng, {2, 3, 3, 3}, false);
  return check_gradients(
      {x}, [&] { return probe(ops::avg_pool2d(x, 2, 2), r); });
}

double case_bilinear(Rng& rng) {
  Tensor x = rand_t(rng, {1, 2, 3, 4});
  Tensor r = rand_t(rng, {1, 2, 7, 6}, false);
  return check_gradients(
      {x}, [&] { return probe(ops::bilinear_upsample(x, 7, 6), r); });
}

double case_softmax(Rng& rng) {
  Tensor x = rand_t(rng, {3, 5});
  Tensor r = rand_t(rng, {3, 5}, false);
  return check_gradients(
      {x}, [&] { return probe(ops::softmax_rows(x), r); });
}

double case_relu(Rng& rng) {
  Tensor x = rand_signed(rng, {4, 6}, 1e-2);
  Tensor r = rand_t(rng, {4, 6}, false);
  return check_gradients({x}, [&] { return probe(ops::relu(x), r); });
}

double case_sigmoid(Rng& rng) {
  Tensor x = rand_t(rng, {4});
  Tensor r = rand_t(rng, {4}, false);
  return check_gradients({x}, [&] { return probe(ops::sigmoid(x), r); });
}

double case_concat(Rng& rng) {
  Tensor a = rand_t(rng, {2, 3});
  Tensor b = rand_t(rng, {2, 5});
  Tensor r = rand_t(rng, {2, 8}, false);
  return check_gradients(
      {a, b}, [&] { return probe(ops::concat({a, b}, 1), r); });
}

double case_gap(Rng& rng) {
  Tensor x = rand_t(rng, {2, 3, 4, 5});
  Tensor r = rand_t(rng, {2, 3}, false);
  return check_gradients(
      {x}, [&] { return probe(ops::global_avg_pool(x), r); });
}

double norm2(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v * v;
  return acc;
}

double case_frobenius(Rng& rng) {
  Tensor x = rand_t(rng, {2, 3, 4});
  // The gradient is x/||x||; test only away from the undefined origin.
  while (std::sqrt(norm2(x)) <= 0.1) x = rand_t(rng, {2, 3, 4});
  return check_gradients({x}, [&] { return ops::frobenius_norm(x); });
}

double case_cross_entropy(Rng& rng) {
  Tensor x = rand_t(rng, {3, 5});
  std::vector<int> labels;
  for (int i = 0; i < 3; ++i) {
    labels.push_back(static_cast<int>(rng.uniform_int(0, 4)));
  }
  return check_gradients({x}, [&] { return ops::cross_entropy(x, labels); });
}

double case_refine_low(Rng& rng) {
  SeParams se;
  se.w1 = rand_t(rng, {8, 2});
  se.b1 = rand_t(rng, {2});
  se.w2 = rand_t(rng, {2, 8});
  se.b2 = rand_t(rng, {8});
  for (int attempt = 0; attempt < 100; ++attempt) {
    Tensor x = rand_t(rng, {2, 8, 4, 4});
    Tensor r = rand_t(rng, {2, 8, 4, 4}, false);
    auto fwd = [&] { return probe(refine_low(x, se), r); };
    if (!kink_free(fwd, kKinkMargin)) continue;
    return check_gradients({x, se.w1, se.b1, se.w2, se.b2}, fwd);
  }
  throw NumericError("case_refine_low: no kink-free sample found");
}

double case_enhance_high(Rng& rng) {
  Tensor x = rand_t(rng, {2, 4, 5, 5});
  Tensor w = rand_t(rng, {4, 1, 3, 3});
  Tensor r = rand_t(rng, {2, 4, 5, 5}, false);
  return check_gradients(
      {x, w}, [&] { return probe(enhance_high(x, w), r); });
}

FimBlockParams random_fim_block(Rng& rng, int c, int red, int c5) {
  FimBlockParams p;
  p.dw_h = rand_t(rng, {c, 1, 3, 3});
  p.dw_x = rand_t(rng, {c, 1, 3, 3});
  p.se_h = {rand_t(rng, {c, red}), rand_t(rng, {red}), rand_t(rng, {red, c}),
            rand_t(rng, {c})};
  p.se_x = {rand_t(rng, {c, red}), rand_t(rng, {red}), rand_t(rng, {red, c}),
            rand_t(rng, {c})};
  p.recomb_h3 = {rand_t(rng, {c5, 1, 3, 3, 3}), rand_t(rng, {c5})};
  p.recomb_h_proj = {rand_t(rng, {c, c5 * 2 * c, 1, 1}), rand_t(rng, {c})};
  p.recomb_x = {rand_t(rng, {c, 2 * c, 3, 3}), rand_t(rng, {c})};
  return p;
}

std::vector<Tensor> fim_block_tensors(const FimBlockParams& p) {
  return {p.dw_h,           p.dw_x,           p.se_h.w1, p.se_h.b1,
          p.se_h.w2,        p.se_h.b2,        p.se_x.w1, p.se_x.b1,
          p.se_x.w2,        p.se_x.b2,        p.recomb_h3.w,
          p.recomb_h3.b,    p.recomb_h_proj.w, p.recomb_h_proj.b,
          p.recomb_x.w,     p.recomb_x.b};
}

double case_fim_block(Rng& rng) {
  const int c = 4;
  FimBlockParams p = random_fim_block(rng, c, 2, 2);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Tensor f_h = rand_t(rng, {2, c, 4, 4});
    Tensor f_x = rand_t(rng, {2, c, 4, 4});
    Tensor r1 = rand_t(rng, {2, c, 4, 4}, false);
    Tensor r2 = rand_t(rng, {2, c, 4, 4}, false);
    auto fwd = [&] {
      auto [oh, ox] = fim_forward(f_h, f_x, p);
      return ops::add(probe(oh, r1), probe(ox, r2));
    };
    if (!kink_free(fwd, kKinkMargin)) continue;
    std::vector<Tensor> params = fim_block_tensors(p);
    params.push_back(f_h);
    params.push_back(f_x);
    return check_gradients(params, fwd);
  }
  throw NumericError("case_fim_block: no kink-free sample found");
}

double case_picm(Rng& rng) {
  const int t = 4, d = 8;
  PicmParams p;
  p.p_h = rand_t(rng, {t, d});
  p.p_x = rand_t(rng, {t, d});
  p.wq_x = rand_t(rng, {d, d});
  p.wk_h = rand_t(rng, {d, d});
  p.wv_h = rand_t(rng, {d, d});
  p.wq_h = rand_t(rng, {d, d});
  p.wk_x = rand_t(rng, {d, d});
  p.wv_x = rand_t(rng, {d, d});
  Tensor f_h = rand_t(rng, {2, t, d});
  Tensor f_x = rand_t(rng, {2, t, d});
  Tensor r1 = rand_t(rng, {2, t, d}, false);
  Tensor r2 = rand_t(rng, {2, t, d}, false);
  auto fwd = [&] {
    PicmOut out = picm_forward(f_h, f_x, p);
    return ops::add(probe(out.i_h, r1), probe(out.i_x, r2));
  };
  return check_gradients({f_h, f_x, p.p_h, p.p_x, p.wq_x, p.wk_h, p.wv_h,
                          p.wq_h, p.wk_x, p.wv_x},
                         fwd);
}

double case_refine_head(Rng& rng) {
  const int k = 4, d = 4, classes = 3;
  HeadParams hp;
  hp.dw1 = rand_t(rng, {2 * d, 1, 3, 3});
  hp.dw2 = rand_t(rng, {2 * d, 1, 3, 3});
  hp.fc_w = rand_t(rng, {2 * d, classes});
  hp.fc_b = rand_t(rng, {classes});
  for (int attempt = 0; attempt < 100; ++attempt) {
    Tensor i_h = rand_t(rng, {2, k * k, d});
    Tensor i_x = rand_t(rng, {2, k * k, d});
    Tensor r = rand_t(rng, {2, classes}, false);
    auto fwd = [&] { return probe(refine_head(i_h, i_x, hp, k), r); };
    if (!kink_free(fwd, kKinkMargin)) continue;
    return check_gradients({i_h, i_x, hp.dw1, hp.dw2, hp.fc_w, hp.fc_b}, fwd);
  }
  throw NumericError("case_refine_head: no kink-free sample found");
}

ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.n_pca = 6;
  cfg.patch = 4;
  cfg.n_fim = 1;
  cfg.c_h = cfg.c_x = 4;
  cfg.d_model = 8;
  cfg.n_classes = 3;
  cfg.c_aux = 2;
  cfg.stem3d_channels = 2;
  cfg.recomb3d_channels = 2;
  return cfg;
}

double case_end_to_end(Rng& rng, std::uint64_t seed, int draw) {
  const ModelConfig cfg = tiny_model_config();
  const int b = 2;
  for (int attempt = 0; attempt < 100; ++attempt) {
    PicnetModel model(cfg, Rng::derive(seed, 900 + draw * 101 + attempt));
    Tensor x_h = rand_t(rng, {b, 1, cfg.n_pca, cfg.patch, cfg.patch}, false);
    Tensor x_x = rand_t(rng, {b, cfg.c_aux, cfg.patch, cfg.patch}, false);
    std::vector<int> labels;
    for (int i = 0; i < b; ++i) {
      labels.push_back(static_cast<int>(rng.uniform_int(0, cfg.n_classes - 1)));
    }
    auto fwd = [&] {
      ForwardOut out = model.forward(x_h, x_x);
      return picnet_loss(out, labels, cfg.lambda1, cfg.lambda2).total;
    };
    if (!kink_free(fwd, kKinkMargin)) continue;
    std::vector<Tensor> params;
    for (auto& [name, t] : model.named_params()) params.push_back(t);
    return check_gradients(params, fwd);
  }
  throw NumericError("case_end_to_end: no kink-free sample found");
}

}  // namespace

std::vector<GradCheckCase> run_gradient_suite(std::uint64_t seed,
                                              int num_seeds) {
  struct Entry {
    const char* name;
    double tol;
    std::function<double(Rng&, std::uint64_t, int)> run;
  };
  auto wrap = [](double (*fn)(Rng&)) {
    return [fn](Rng& rng, std::uint64_t, int) { return fn(rng); };
  };
  const std::vector<Entry> entries = {
      {"add", 1e-6, wrap(case_add)},
      {"matmul", 1e-6, wrap(case_matmul)},
      {"conv2d", 1e-4, wrap(case_conv2d)},
      {"conv2d_stride2", 1e-4, wrap(case_conv2d_strided)},
      {"depthwise_conv2d", 1e-4, wrap(case_depthwise)},
      {"conv3d", 1e-4, wrap(case_conv3d)},
      {"avg_pool2d", 1e-6, wrap(case_avg_pool)},
      {"bilinear_upsample", 1e-6, wrap(case_bilinear)},
      {"softmax_rows", 1e-6, wrap(case_softmax)},
      {"relu", 1e-6, wrap(case_relu)},
      {"sigmoid", 1e-6, wrap(case_sigmoid)},
      {"concat", 1e-6, wrap(case_concat)},
      {"global_avg_pool", 1e-6, wrap(case_gap)},
      {"frobenius_norm", 1e-6, wrap(case_frobenius)},
      {"cross_entropy", 1e-6, wrap(case_cross_entropy)},
      {"refine_low", 1e-4, wrap(case_refine_low)},
      {"enhance_high", 1e-4, wrap(case_enhance_high)},
      {"fim_block", 1e-3, wrap(case_fim_block)},
      {"picm_attention", 1e-6, wrap(case_picm)},
      {"refine_head", 1e-4, wrap(case_refine_head)},
      {"end_to_end", 1e-3,
       [](Rng& rng, std::uint64_t s, int draw) {
         return case_end_to_end(rng, s, draw);
       }},
  };

  std::vector<GradCheckCase> results;
  results.reserve(entries.size());
  for (std::size_t ci = 0; ci < entries.size(); ++ci) {
    GradCheckCase out;
    out.name = entries[ci].name;
    out.tolerance = entries[ci].tol;
    for (int s = 0; s < num_seeds; ++s) {
      Rng rng(Rng::derive(seed, ci * 7919 + static_cast<std::uint64_t>(s)));
      out.max_rel_err =
          std::max(out.max_rel_err, entries[ci].run(rng, seed, s));
    }
    out.pass = out.max_rel_err < out.tolerance;
    results.push_back(std::move(out));
  }
  return results;
}

bool all_pass(const std::vector<GradCheckCase>& cases) {
  for (const auto& c : cases) {
    if (!c.pass) return false;
  }
  return true;
}

}  // namespace picnet
