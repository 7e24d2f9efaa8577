#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "picnet/errors.hpp"
#include "picnet/gradcheck.hpp"
#include "picnet/model.hpp"
#include "picnet/ops.hpp"
#include "picnet/rng.hpp"
#include "picnet/tape.hpp"
#include "testutil.hpp"

using namespace picnet;
using testutil::random_tensor;

namespace {

// Brute-force single-direction cross attention with its own softmax; the
// oracle for picm_forward. proto [T,d], feats [T,d], weights [d,d].
std::vector<double> attention_oracle(const std::vector<double>& proto,
                                     const std::vector<double>& feats,
                                     const std::vector<double>& wq,
                                     const std::vector<double>& wk,
                                     const std::vector<double>& wv, int t,
                                     int d) {
  auto matmul_td = [&](const std::vector<double>& a,
                       const std::vector<double>& w) {
    std::vector<double> out(static_cast<std::size_t>(t) * d, 0.0);
    for (int i = 0; i < t; ++i) {
      for (int j = 0; j < d; ++j) {
        double acc = 0.0;
        for (int m = 0; m < d; ++m) acc += a[i * d + m] * w[m * d + j];
        out[i * d + j] = acc;
      }
    }
    return out;
  };
  const auto q = matmul_td(proto, wq);
  const auto k = matmul_td(feats, wk);
  const auto v = matmul_td(feats, wv);
  std::vector<double> out(static_cast<std::size_t>(t) * d, 0.0);
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  for (int i = 0; i < t; ++i) {
    std::vector<double> scores(static_cast<std::size_t>(t));
    double mx = -1e300;
    for (int j = 0; j < t; ++j) {
      double acc = 0.0;
      for (int m = 0; m < d; ++m) acc += q[i * d + m] * k[j * d + m];
      scores[static_cast<std::size_t>(j)] = acc * inv;
      mx = std::max(mx, scores[static_cast<std::size_t>(j)]);
    }
    double z = 0.0;
    for (double& s : scores) {
      s = std::exp(s - mx);
      z += s;
    }
    for (int j = 0; j < t; ++j) {
      const double a = scores[static_cast<std::size_t>(j)] / z;
      for (int m = 0; m < d; ++m) out[i * d + m] += a * v[j * d + m];
    }
  }
  return out;
}

PicmParams random_picm(Rng& rng, int t, int d) {
  PicmParams p;
  p.p_h = random_tensor(rng, {t, d});
  p.p_x = random_tensor(rng, {t, d});
  p.wq_x = random_tensor(rng, {d, d});
  p.wk_h = random_tensor(rng, {d, d});
  p.wv_h = random_tensor(rng, {d, d});
  p.wq_h = random_tensor(rng, {d, d});
  p.wk_x = random_tensor(rng, {d, d});
  p.wv_x = random_tensor(rng, {d, d});
  return p;
}

FimBlockParams random_fim(Rng& rng, int c, int red, int c5) {
  FimBlockParams p;
  p.dw_h = random_tensor(rng, {c, 1, 3, 3});
  p.dw_x = random_tensor(rng, {c, 1, 3, 3});
  p.se_h = {random_tensor(rng, {c, red}), random_tensor(rng, {red}),
            random_tensor(rng, {red, c}), random_tensor(rng, {c})};
  p.se_x = {random_tensor(rng, {c, red}), random_tensor(rng, {red}),
            random_tensor(rng, {red, c}), random_tensor(rng, {c})};
  p.recomb_h3 = {random_tensor(rng, {c5, 1, 3, 3, 3}),
                 random_tensor(rng, {c5})};
  p.recomb_h_proj = {random_tensor(rng, {c, c5 * 2 * c, 1, 1}),
                     random_tensor(rng, {c})};
  p.recomb_x = {random_tensor(rng, {c, 2 * c, 3, 3}), random_tensor(rng, {c})};
  return p;
}

ModelConfig tiny_cfg() {
  ModelConfig cfg;
  cfg.n_pca = 6;
  cfg.patch = 4;
  cfg.n_fim = 1;
  cfg.c_h = cfg.c_x = 8;
  cfg.d_model = 8;
  cfg.n_classes = 3;
  cfg.c_aux = 2;
  cfg.stem3d_channels = 2;
  cfg.recomb3d_channels = 2;
  return cfg;
}

}  // namespace

TEST_CASE("freq_separate on constants: pure low frequency") {
  const double c = 0.625;  // exactly representable
  Tensor f = Tensor::full({2, 3, 6, 6}, c);
  auto [low, high] = freq_separate(f);
  CHECK(low.shape() == Shape{2, 3, 3, 3});
  for (double v : low.data()) CHECK(v == c);
  for (double v : high.data()) CHECK(v == 0.0);

  // Non-dyadic constants stay exact too.
  Tensor f2 = Tensor::full({1, 1, 5, 5}, 0.1);
  auto [low2, high2] = freq_separate(f2);
  for (double v : low2.data()) CHECK(v == 0.1);
  for (double v : high2.data()) CHECK(v == 0.0);
}

TEST_CASE("freq_separate on a checkerboard: pure high frequency") {
  const int h = 6, w = 6;
  Tensor f = Tensor::zeros({1, 1, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      f.mutable_data()[static_cast<std::size_t>(y) * w + x] =
          ((y + x) % 2 == 0) ? 1.0 : -1.0;
    }
  }
  auto [low, high] = freq_separate(f);
  for (double v : low.data()) CHECK(v == 0.0);
  CHECK(high.data() == f.data());
}

TEST_CASE("freq_separate reconstruction identity") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor f = random_tensor(rng, {2, 3, 8, 8});
    auto [low, high] = freq_separate(f);
    Tensor rec = ops::add(ops::bilinear_upsample(low, 8, 8), high);
    CHECK(testutil::max_abs_diff(rec.data(), f.data()) < 1e-12);
  }
  CHECK_THROWS_AS(freq_separate(Tensor::zeros({1, 1, 1, 1})), ShapeError);
}

TEST_CASE("enhance_high edge behaviors") {
  Rng rng(22);
  Tensor f = random_tensor(rng, {2, 3, 5, 5});
  Tensor zero_kernel = Tensor::zeros({3, 1, 3, 3});
  CHECK(enhance_high(f, zero_kernel).data() == f.data());

  Tensor kernel = random_tensor(rng, {3, 1, 3, 3});
  Tensor zf = Tensor::zeros({2, 3, 5, 5});
  Tensor enhanced_zero = enhance_high(zf, kernel);
  for (double v : enhanced_zero.data()) CHECK(v == 0.0);

  // Residual form recomposed from primitives.
  Tensor manual = ops::add(f, ops::depthwise_conv2d(f, kernel, 1, 1));
  CHECK(enhance_high(f, kernel).data() == manual.data());
}

TEST_CASE("refine_low saturated gate and zero input") {
  Rng rng(23);
  const int c = 8, red = 2;
  SeParams se;
  se.w1 = random_tensor(rng, {c, red});
  se.b1 = random_tensor(rng, {red});
  se.w2 = random_tensor(rng, {red, c});
  se.b2 = Tensor::full({c}, 100.0);  // saturates the sigmoid at 1
  Tensor f = random_tensor(rng, {2, c, 4, 4});
  Tensor out = refine_low(f, se);
  CHECK(testutil::max_abs_diff(out.data(), f.data()) < 1e-12);

  Tensor zf = Tensor::zeros({2, c, 4, 4});
  Tensor refined_zero = refine_low(zf, se);
  for (double v : refined_zero.data()) CHECK(v == 0.0);
}

TEST_CASE("fim_forward with a zero second modality reduces the sums") {
  Rng rng(24);
  const int c = 4;
  FimBlockParams p = random_fim(rng, c, 2, 2);
  Tensor f_h = random_tensor(rng, {2, c, 4, 4});
  Tensor f_x = Tensor::zeros({2, c, 4, 4});

  auto [out_h, out_x] = fim_forward(f_h, f_x, p);

  // Recompose independently from the public primitive ops. With f_x == 0
  // the separated aux parts vanish except through its SE bias paths, so
  // build the full composition and compare.
  auto [h_low, h_high] = freq_separate(f_h);
  auto [x_low, x_high] = freq_separate(f_x);
  Tensor eh = enhance_high(h_high, p.dw_h);
  Tensor ex = enhance_high(x_high, p.dw_x);
  Tensor rh = refine_low(h_low, p.se_h);
  Tensor rx = refine_low(x_low, p.se_x);
  // The zero modality contributes exactly zero to both fused parts.
  for (double v : ex.data()) CHECK(v == 0.0);
  for (double v : rx.data()) CHECK(v == 0.0);
  Tensor fused_low = ops::add(rh, rx);
  CHECK(fused_low.data() == rh.data());
  Tensor fused_high = ops::add(eh, ex);
  CHECK(fused_high.data() == eh.data());

  Tensor up = ops::bilinear_upsample(fused_low, 4, 4);
  Tensor cat_h = ops::concat({up, eh}, 1);
  Tensor vol = ops::reshape(cat_h, {2, 1, 2 * c, 4, 4});
  Tensor mixed =
      ops::relu(ops::conv3d(vol, p.recomb_h3.w, p.recomb_h3.b, 1, 1));
  Tensor folded = ops::reshape(mixed, {2, 2 * 2 * c, 4, 4});
  Tensor manual_h = ops::relu(
      ops::conv2d(folded, p.recomb_h_proj.w, p.recomb_h_proj.b, 1, 0));
  CHECK(manual_h.data() == out_h.data());

  Tensor up_x = ops::bilinear_upsample(rx, 4, 4);
  Tensor cat_x = ops::concat({up_x, fused_high}, 1);
  Tensor manual_x =
      ops::relu(ops::conv2d(cat_x, p.recomb_x.w, p.recomb_x.b, 1, 1));
  CHECK(manual_x.data() == out_x.data());
}

TEST_CASE("fim_forward constants have zero high-frequency sums") {
  Tensor ch = Tensor::full({1, 4, 4, 4}, 0.5);
  Tensor cx = Tensor::full({1, 4, 4, 4}, -0.25);
  auto [h_low, h_high] = freq_separate(ch);
  auto [x_low, x_high] = freq_separate(cx);
  Rng rng(25);
  Tensor dw = random_tensor(rng, {4, 1, 3, 3});
  // High parts are exactly zero pre-enhancement, and the bias-free
  // depthwise residual of zero stays zero.
  for (double v : h_high.data()) CHECK(v == 0.0);
  for (double v : x_high.data()) CHECK(v == 0.0);
  Tensor sum = ops::add(enhance_high(h_high, dw), enhance_high(x_high, dw));
  for (double v : sum.data()) CHECK(v == 0.0);
}

TEST_CASE("fim_forward rejects channel mismatches") {
  Rng rng(26);
  FimBlockParams p = random_fim(rng, 4, 2, 2);
  CHECK_THROWS_AS(
      fim_forward(Tensor::zeros({1, 4, 4, 4}), Tensor::zeros({1, 8, 4, 4}), p),
      ShapeError);
}

TEST_CASE("picm_forward single-token collapse returns V exactly") {
  Rng rng(27);
  const int d = 6;
  PicmParams p = random_picm(rng, 1, d);
  Tensor f_h = random_tensor(rng, {2, 1, d});
  Tensor f_x = random_tensor(rng, {2, 1, d});
  PicmOut out = picm_forward(f_h, f_x, p);
  for (int b = 0; b < 2; ++b) {
    Tensor v_h = ops::matmul(ops::select0(f_h, b), p.wv_h);
    for (int j = 0; j < d; ++j) {
      CHECK(out.f_hat_x.data()[b * d + j] == v_h.data()[static_cast<std::size_t>(j)]);
    }
  }
}

TEST_CASE("picm_forward with zero queries averages the values") {
  Rng rng(28);
  const int t = 5, d = 4;
  PicmParams p = random_picm(rng, t, d);
  p.wq_x = Tensor::zeros({d, d});
  Tensor f_h = random_tensor(rng, {1, t, d});
  Tensor f_x = random_tensor(rng, {1, t, d});
  PicmOut out = picm_forward(f_h, f_x, p);
  Tensor v_h = ops::matmul(ops::select0(f_h, 0), p.wv_h);
  for (int i = 0; i < t; ++i) {
    for (int j = 0; j < d; ++j) {
      double mean = 0.0;
      for (int r = 0; r < t; ++r) mean += v_h.data()[r * d + j];
      mean /= t;
      CHECK(out.f_hat_x.data()[i * d + j] ==
            doctest::Approx(mean).epsilon(1e-12));
    }
  }
}

TEST_CASE("picm_forward matches the brute-force attention oracle") {
  Rng rng(29);
  const int t = 4, d = 8, b = 2;
  PicmParams p = random_picm(rng, t, d);
  Tensor f_h = random_tensor(rng, {b, t, d});
  Tensor f_x = random_tensor(rng, {b, t, d});
  PicmOut out = picm_forward(f_h, f_x, p);
  for (int bi = 0; bi < b; ++bi) {
    std::vector<double> fh(f_h.data().begin() + bi * t * d,
                           f_h.data().begin() + (bi + 1) * t * d);
    std::vector<double> fx(f_x.data().begin() + bi * t * d,
                           f_x.data().begin() + (bi + 1) * t * d);
    const auto hat_x = attention_oracle(p.p_x.data(), fh, p.wq_x.data(),
                                        p.wk_h.data(), p.wv_h.data(), t, d);
    const auto hat_h = attention_oracle(p.p_h.data(), fx, p.wq_h.data(),
                                        p.wk_x.data(), p.wv_x.data(), t, d);
    for (int i = 0; i < t * d; ++i) {
      CHECK(out.f_hat_x.data()[bi * t * d + i] ==
            doctest::Approx(hat_x[static_cast<std::size_t>(i)]).epsilon(1e-12));
      CHECK(out.f_hat_h.data()[bi * t * d + i] ==
            doctest::Approx(hat_h[static_cast<std::size_t>(i)]).epsilon(1e-12));
    }
    // Residual merges.
    for (int i = 0; i < t * d; ++i) {
      CHECK(out.i_h.data()[bi * t * d + i] ==
            f_h.data()[bi * t * d + i] + out.f_hat_x.data()[bi * t * d + i]);
    }
  }
}

TEST_CASE("picm_forward rejects prototype/token count mismatches") {
  Rng rng(30);
  PicmParams p = random_picm(rng, 4, 8);
  CHECK_THROWS_AS(
      picm_forward(Tensor::zeros({1, 5, 8}), Tensor::zeros({1, 5, 8}), p),
      ShapeError);
}

TEST_CASE("refine_head shape contract and class-permutation equivariance") {
  Rng rng(31);
  const int k = 4, d = 4, classes = 5, b = 3;
  HeadParams hp;
  hp.dw1 = random_tensor(rng, {2 * d, 1, 3, 3});
  hp.dw2 = random_tensor(rng, {2 * d, 1, 3, 3});
  hp.fc_w = random_tensor(rng, {2 * d, classes});
  hp.fc_b = random_tensor(rng, {classes});
  Tensor i_h = random_tensor(rng, {b, k * k, d});
  Tensor i_x = random_tensor(rng, {b, k * k, d});
  Tensor logits = refine_head(i_h, i_x, hp, k);
  CHECK(logits.shape() == Shape{b, classes});

  // Permute class columns; logits permute identically.
  std::vector<int> perm = {2, 0, 4, 1, 3};
  HeadParams hp2 = hp;
  hp2.fc_w = Tensor::zeros({2 * d, classes});
  hp2.fc_b = Tensor::zeros({classes});
  for (int j = 0; j < classes; ++j) {
    hp2.fc_b.mutable_data()[static_cast<std::size_t>(j)] =
        hp.fc_b.data()[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])];
    for (int i = 0; i < 2 * d; ++i) {
      hp2.fc_w.mutable_data()[i * classes + j] =
          hp.fc_w.data()[i * classes + perm[static_cast<std::size_t>(j)]];
    }
  }
  Tensor logits2 = refine_head(i_h, i_x, hp2, k);
  for (int bi = 0; bi < b; ++bi) {
    for (int j = 0; j < classes; ++j) {
      CHECK(logits2.data()[bi * classes + j] ==
            logits.data()[bi * classes + perm[static_cast<std::size_t>(j)]]);
    }
  }
}

TEST_CASE("consistency_loss values") {
  Rng rng(32);
  Tensor f = random_tensor(rng, {3, 4, 5});
  CHECK(consistency_loss(f, f).item() == 0.0);

  // One sample whose difference holds a 3-4-5 triangle and zeros.
  Tensor a = Tensor::zeros({1, 3, 4});
  Tensor b = Tensor::zeros({1, 3, 4});
  a.mutable_data()[2] = 3.0;
  a.mutable_data()[7] = 4.0;
  CHECK(consistency_loss(a, b).item() == doctest::Approx(5.0).epsilon(1e-15));

  CHECK_THROWS_AS(consistency_loss(a, Tensor::zeros({1, 4, 3})), ShapeError);

  // Independent recomputation: mean over per-sample Frobenius norms.
  Tensor x = random_tensor(rng, {4, 3, 6});
  Tensor y = random_tensor(rng, {4, 3, 6});
  double manual = 0.0;
  for (int s = 0; s < 4; ++s) {
    double acc = 0.0;
    for (int i = 0; i < 18; ++i) {
      const double d = x.data()[s * 18 + i] - y.data()[s * 18 + i];
      acc += d * d;
    }
    manual += std::sqrt(acc);
  }
  manual /= 4.0;
  CHECK(consistency_loss(x, y).item() ==
        doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("total_loss composition") {
  Rng rng(33);
  Tensor logits = random_tensor(rng, {3, 4});
  std::vector<int> labels = {1, 0, 3};
  Tensor f_h = random_tensor(rng, {3, 2, 4});
  Tensor f_x = random_tensor(rng, {3, 2, 4});
  Tensor f_hat_h = random_tensor(rng, {3, 2, 4});
  Tensor f_hat_x = random_tensor(rng, {3, 2, 4});

  const double ce = ops::cross_entropy(logits, labels).item();
  CHECK(total_loss(logits, labels, f_h, f_x, f_hat_h, f_hat_x, 0.0, 0.0)
            .item() == ce);
  CHECK(total_loss(logits, labels, f_h, f_x, f_h, f_x, 0.7, 0.9).item() ==
        doctest::Approx(ce).epsilon(1e-15));

  const double lx = consistency_loss(f_x, f_hat_x).item();
  const double lh = consistency_loss(f_h, f_hat_h).item();
  const double manual = ce + 0.3 * lx + 0.5 * lh;
  CHECK(total_loss(logits, labels, f_h, f_x, f_hat_h, f_hat_x, 0.3, 0.5)
            .item() == doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("model config validation") {
  ModelConfig cfg = tiny_cfg();
  CHECK_NOTHROW(cfg.validate());

  ModelConfig bad = cfg;
  bad.n_fim = 0;
  CHECK_THROWS_AS(PicnetModel(bad, 1), ConfigError);

  bad = cfg;
  bad.patch = 7;
  CHECK_THROWS_WITH_AS(bad.validate(),
                       "patch size must be even and >= 4, got 7", ConfigError);

  bad = cfg;
  bad.c_h = 16;  // c_h != c_x
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = cfg;
  bad.d_model = 6;  // not divisible by se_reduction
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("encoder and forward shape contracts across valid configs") {
  for (int patch : {4, 6}) {
    for (int n_fim : {1, 2}) {
      ModelConfig cfg = tiny_cfg();
      cfg.patch = patch;
      cfg.n_fim = n_fim;
      PicnetModel model(cfg, 9);
      Rng rng(40);
      const int b = 2;
      Tensor x_h = random_tensor(rng, {b, 1, cfg.n_pca, patch, patch});
      Tensor x_x = random_tensor(rng, {b, cfg.c_aux, patch, patch});
      EncoderOut enc = model.encoder_forward(x_h, x_x);
      CHECK(enc.f_h.shape() == Shape{b, patch * patch, cfg.d_model});
      CHECK(enc.f_x.shape() == Shape{b, patch * patch, cfg.d_model});
      ForwardOut out = model.forward(x_h, x_x);
      CHECK(out.logits.shape() == Shape{b, cfg.n_classes});
    }
  }
}

TEST_CASE("encoder rejects mis-shaped inputs") {
  PicnetModel model(tiny_cfg(), 5);
  CHECK_THROWS_AS(model.forward(Tensor::zeros({1, 1, 5, 4, 4}),
                                Tensor::zeros({1, 2, 4, 4})),
                  ShapeError);
  CHECK_THROWS_AS(model.forward(Tensor::zeros({1, 1, 6, 4, 4}),
                                Tensor::zeros({2, 2, 4, 4})),
                  ShapeError);
}

TEST_CASE("prototypes start at ones and compensation rows start identical") {
  PicnetModel model(tiny_cfg(), 31);
  for (double v : model.picm.p_h.data()) CHECK(v == 1.0);
  for (double v : model.picm.p_x.data()) CHECK(v == 1.0);

  Rng rng(41);
  const ModelConfig& cfg = model.config();
  Tensor x_h = random_tensor(rng, {2, 1, cfg.n_pca, cfg.patch, cfg.patch});
  Tensor x_x = random_tensor(rng, {2, cfg.c_aux, cfg.patch, cfg.patch});
  ForwardOut out = model.forward(x_h, x_x);
  const int t = cfg.tokens(), d = cfg.d_model;
  for (int b = 0; b < 2; ++b) {
    for (int row = 1; row < t; ++row) {
      for (int j = 0; j < d; ++j) {
        CHECK(out.f_hat_x.data()[(b * t + row) * d + j] ==
              doctest::Approx(out.f_hat_x.data()[b * t * d + j])
                  .epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("named params are unique and complete") {
  PicnetModel model(tiny_cfg(), 3);
  NamedParams params = model.named_params();
  std::vector<std::string> names;
  for (auto& [n, t] : params) names.push_back(n);
  std::sort(names.begin(), names.end());
  CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());
  CHECK(model.param_count() > 0);

  // Ablation variants swap parameter sets.
  ModelConfig plain = tiny_cfg();
  plain.use_fim = false;
  plain.use_picm = false;
  PicnetModel ablated(plain, 3);
  for (auto& [n, t] : ablated.named_params()) {
    CHECK(n.find("picm") == std::string::npos);
    CHECK(n.find("recomb") == std::string::npos);
  }
}

TEST_CASE("same seed gives identical models and losses") {
  ModelConfig cfg = tiny_cfg();
  PicnetModel m1(cfg, 123), m2(cfg, 123);
  const NamedParams p1 = m1.named_params(), p2 = m2.named_params();
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].second.data() == p2[i].second.data());
  }
  Rng rng(50);
  Tensor x_h = random_tensor(rng, {2, 1, cfg.n_pca, cfg.patch, cfg.patch});
  Tensor x_x = random_tensor(rng, {2, cfg.c_aux, cfg.patch, cfg.patch});
  const LossParts l1 = picnet_loss(m1.forward(x_h, x_x), {0, 1}, 0.1, 0.1);
  const LossParts l2 = picnet_loss(m2.forward(x_h, x_x), {0, 1}, 0.1, 0.1);
  CHECK(l1.total.item() == l2.total.item());
}

TEST_CASE("end-to-end tiny-config gradients match finite differences") {
  ModelConfig cfg = tiny_cfg();
  cfg.c_h = cfg.c_x = 4;
  PicnetModel model(cfg, 77);
  Rng rng(51);
  Tensor x_h = random_tensor(rng, {2, 1, cfg.n_pca, cfg.patch, cfg.patch});
  Tensor x_x = random_tensor(rng, {2, cfg.c_aux, cfg.patch, cfg.patch});
  const std::vector<int> labels = {0, 2};
  std::vector<Tensor> params;
  for (auto& [n, t] : model.named_params()) params.push_back(t);
  const double err = check_gradients(params, [&] {
    return picnet_loss(model.forward(x_h, x_x), labels, cfg.lambda1,
                       cfg.lambda2)
        .total;
  });
  CHECK(err < 1e-3);
}
