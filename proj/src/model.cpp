#include "picnet/model.hpp"

#include <cmath>

#include "picnet/errors.hpp"
#include "picnet/ops.hpp"
#include "picnet/rng.hpp"

namespace picnet {

void ModelConfig::validate() const {
  if (n_classes < 2) throw ConfigError("n_classes must be >= 2");
  if (c_aux < 1) throw ConfigError("c_aux must be >= 1");
  if (n_pca < 1) throw ConfigError("n_pca must be >= 1");
  if (patch < 4 || patch % 2 != 0) {
    throw ConfigError("patch size must be even and >= 4, got " +
                      std::to_string(patch));
  }
  if (n_fim < 1) throw ConfigError("n_fim must be >= 1");
  if (c_h != c_x) {
    throw ConfigError("c_h and c_x must match for the parameter-free "
                      "frequency sums, got " +
                      std::to_string(c_h) + " vs " + std::to_string(c_x));
  }
  if (se_reduction < 1) throw ConfigError("se_reduction must be >= 1");
  if (c_h % se_reduction != 0 || c_x % se_reduction != 0 ||
      d_model % se_reduction != 0) {
    throw ConfigError("c_h, c_x and d_model must be divisible by "
                      "se_reduction=" +
                      std::to_string(se_reduction));
  }
  if (lambda1 < 0.0 || lambda2 < 0.0) {
    throw ConfigError("consistency weights must be non-negative");
  }
  if (stem3d_channels < 1 || recomb3d_channels < 1) {
    throw ConfigError("3-D conv widths must be >= 1");
  }
}

// ---- model ops -------------------------------------------------------------

std::pair<Tensor, Tensor> freq_separate(const Tensor& f) {
  if (f.ndim() != 4) {
    throw ShapeError("freq_separate: expected [B,C,H,W], got " +
                     shape_str(f.shape()));
  }
  const int h = f.dim(2), w = f.dim(3);
  if (h < 2 || w < 2) {
    throw ShapeError("freq_separate: spatial extent " + std::to_string(h) +
                     "x" + std::to_string(w) + " too small to separate");
  }
  Tensor f_l = ops::avg_pool2d(f, 2, 2);
  Tensor f_h = ops::sub(f, ops::bilinear_upsample(f_l, h, w));
  return {f_l, f_h};
}

Tensor enhance_high(const Tensor& f_h, const Tensor& dw_kernel) {
  return ops::add(f_h, ops::depthwise_conv2d(f_h, dw_kernel, 1, 1));
}

Tensor refine_low(const Tensor& f_l, const SeParams& se) {
  const int h = f_l.dim(2), w = f_l.dim(3);
  Tensor squeezed = ops::global_avg_pool(f_l);
  Tensor z = ops::relu(ops::add_rowvec(ops::matmul(squeezed, se.w1), se.b1));
  Tensor gate = ops::sigmoid(ops::add_rowvec(ops::matmul(z, se.w2), se.b2));
  return ops::mul(f_l, ops::expand_spatial(gate, h, w));
}

std::pair<Tensor, Tensor> fim_forward(const Tensor& f_h, const Tensor& f_x,
                                      const FimBlockParams& p) {
  if (f_h.dim(1) != f_x.dim(1)) {
    throw ShapeError("fim_forward: channel mismatch " +
                     shape_str(f_h.shape()) + " vs " + shape_str(f_x.shape()));
  }
  const int b = f_h.dim(0), c = f_h.dim(1), h = f_h.dim(2), w = f_h.dim(3);

  auto [h_low, h_high] = freq_separate(f_h);
  auto [x_low, x_high] = freq_separate(f_x);
  h_high = enhance_high(h_high, p.dw_h);
  x_high = enhance_high(x_high, p.dw_x);
  h_low = refine_low(h_low, p.se_h);
  x_low = refine_low(x_low, p.se_x);

  // Cross-modal exchange: low frequencies fuse into the H branch, high
  // frequencies into the X branch.
  Tensor fused_low = ops::add(h_low, x_low);
  Tensor fused_high = ops::add(h_high, x_high);

  // H branch: upsample the fused low part to full resolution, concat with
  // the modality's own high part, and recombine with a 3-D kernel running
  // over (channel-as-depth, H, W) before folding depth back into channels.
  Tensor up_fused = ops::bilinear_upsample(fused_low, h, w);
  Tensor cat_h = ops::concat({up_fused, h_high}, 1);  // [B, 2C, H, W]
  Tensor vol = ops::reshape(cat_h, {b, 1, 2 * c, h, w});
  Tensor mixed = ops::relu(ops::conv3d(vol, p.recomb_h3.w, p.recomb_h3.b, 1, 1));
  Tensor folded =
      ops::reshape(mixed, {b, mixed.dim(1) * mixed.dim(2), h, w});
  Tensor out_h = ops::relu(
      ops::conv2d(folded, p.recomb_h_proj.w, p.recomb_h_proj.b, 1, 0));

  // X branch: the modality's own low part upsampled, fused high part,
  // plain 2-D recombination.
  Tensor up_xlow = ops::bilinear_upsample(x_low, h, w);
  Tensor cat_x = ops::concat({up_xlow, fused_high}, 1);
  Tensor out_x =
      ops::relu(ops::conv2d(cat_x, p.recomb_x.w, p.recomb_x.b, 1, 1));
  return {out_h, out_x};
}

PicmOut picm_forward(const Tensor& f_h, const Tensor& f_x,
                     const PicmParams& p) {
  if (f_h.ndim() != 3 || f_x.ndim() != 3) {
    throw ShapeError("picm_forward: expected [B,T,d] token tensors");
  }
  const int b = f_h.dim(0), t = f_h.dim(1), d = f_h.dim(2);
  if (p.p_h.dim(0) != t || p.p_x.dim(0) != t) {
    throw ShapeError("picm_forward: prototype rows " +
                     std::to_string(p.p_h.dim(0)) + " do not match token count " +
                     std::to_string(t));
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  // Queries come from the prototypes alone, so they are shared by the
  // whole batch; keys and values are per sample.
  Tensor q_x = ops::matmul(p.p_x, p.wq_x);
  Tensor q_h = ops::matmul(p.p_h, p.wq_h);

  std::vector<Tensor> hat_x_rows, hat_h_rows;
  hat_x_rows.reserve(static_cast<std::size_t>(b));
  hat_h_rows.reserve(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    Tensor fh = ops::select0(f_h, i);
    Tensor fx = ops::select0(f_x, i);

    Tensor k_h = ops::matmul(fh, p.wk_h);
    Tensor v_h = ops::matmul(fh, p.wv_h);
    Tensor attn_x = ops::softmax_rows(
        ops::scale(ops::matmul(q_x, ops::transpose(k_h)), inv_sqrt_d));
    hat_x_rows.push_back(ops::matmul(attn_x, v_h));

    Tensor k_x = ops::matmul(fx, p.wk_x);
    Tensor v_x = ops::matmul(fx, p.wv_x);
    Tensor attn_h = ops::softmax_rows(
        ops::scale(ops::matmul(q_h, ops::transpose(k_x)), inv_sqrt_d));
    hat_h_rows.push_back(ops::matmul(attn_h, v_x));
  }
  PicmOut out;
  out.f_hat_x = ops::stack0(hat_x_rows);
  out.f_hat_h = ops::stack0(hat_h_rows);
  out.i_h = ops::add(f_h, out.f_hat_x);
  out.i_x = ops::add(f_x, out.f_hat_h);
  return out;
}

Tensor refine_head(const Tensor& i_h, const Tensor& i_x, const HeadParams& p,
                   int k) {
  if (i_h.dim(1) != k * k) {
    throw ShapeError("refine_head: token count " + std::to_string(i_h.dim(1)) +
                     " does not match patch " + std::to_string(k));
  }
  Tensor grid_h = ops::tokens_to_grid(i_h, k, k);
  Tensor grid_x = ops::tokens_to_grid(i_x, k, k);
  Tensor fused = ops::concat({grid_h, grid_x}, 1);  // [B, 2d, k, k]
  Tensor r = ops::depthwise_conv2d(fused, p.dw1, 1, 1);
  r = ops::relu(r);
  r = ops::depthwise_conv2d(r, p.dw2, 1, 1);
  Tensor pooled = ops::global_avg_pool(r);
  return ops::add_rowvec(ops::matmul(pooled, p.fc_w), p.fc_b);
}

Tensor consistency_loss(const Tensor& f, const Tensor& f_hat) {
  if (!same_shape(f.shape(), f_hat.shape())) {
    throw ShapeError("consistency_loss: shape mismatch " +
                     shape_str(f.shape()) + " vs " + shape_str(f_hat.shape()));
  }
  const int b = f.dim(0);
  Tensor diff = ops::sub(f, f_hat);
  Tensor acc;
  for (int i = 0; i < b; ++i) {
    Tensor norm = ops::frobenius_norm(ops::select0(diff, i));
    acc = acc.defined() ? ops::add(acc, norm) : norm;
  }
  return ops::scale(acc, 1.0 / static_cast<double>(b));
}

Tensor total_loss(const Tensor& logits, const std::vector<int>& labels,
                  const Tensor& f_h, const Tensor& f_x, const Tensor& f_hat_h,
                  const Tensor& f_hat_x, double lambda1, double lambda2) {
  Tensor loss = ops::cross_entropy(logits, labels);
  if (lambda1 != 0.0) {
    loss = ops::add(loss, ops::scale(consistency_loss(f_x, f_hat_x), lambda1));
  }
  if (lambda2 != 0.0) {
    loss = ops::add(loss, ops::scale(consistency_loss(f_h, f_hat_h), lambda2));
  }
  return loss;
}

LossParts picnet_loss(const ForwardOut& out, const std::vector<int>& labels,
                      double lambda1, double lambda2) {
  LossParts parts;
  parts.ce = ops::cross_entropy(out.logits, labels);
  parts.cyc_x = lambda1 != 0.0 ? consistency_loss(out.f_x, out.f_hat_x)
                               : Tensor::scalar(0.0);
  parts.cyc_h = lambda2 != 0.0 ? consistency_loss(out.f_h, out.f_hat_h)
                               : Tensor::scalar(0.0);
  parts.total = ops::add(
      parts.ce,
      ops::add(ops::scale(parts.cyc_x, lambda1), ops::scale(parts.cyc_h, lambda2)));
  return parts;
}

// ---- construction ----------------------------------------------------------

namespace {

Tensor init_conv(Rng& rng, Shape shape, int fan_in) {
  Tensor t = Tensor::zeros(shape, true);
  const double stddev = std::sqrt(2.0 / fan_in);
  for (auto& v : t.mutable_data()) v = rng.normal(0.0, stddev);
  return t;
}

Tensor init_linear(Rng& rng, Shape shape, int fan_in) {
  Tensor t = Tensor::zeros(shape, true);
  const double stddev = std::sqrt(1.0 / fan_in);
  for (auto& v : t.mutable_data()) v = rng.normal(0.0, stddev);
  return t;
}

Tensor zeros_param(Shape shape) { return Tensor::zeros(shape, true); }

Tensor init_small(Rng& rng, Shape shape) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (auto& v : t.mutable_data()) v = rng.normal(0.0, 0.02);
  return t;
}

// Near-identity init. Used for the attention value projections so the
// compensated features start close to a plain token average of the real
// features; a random value projection instead contracts the consistency
// fixed point toward zero and can stall training on small data.
Tensor init_near_identity(Rng& rng, int d, double noise) {
  Tensor t = Tensor::zeros({d, d}, true);
  double* p = t.mutable_data().data();
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      p[i * d + j] = (i == j ? 1.0 : 0.0) + rng.normal(0.0, noise);
    }
  }
  return t;
}

}  // namespace

PicnetModel::PicnetModel(ModelConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(seed);
  const int c = cfg_.c_h;
  const int d = cfg_.d_model;
  const int s3 = cfg_.stem3d_channels;
  const int c5 = cfg_.recomb3d_channels;

  stem_h3.w = init_conv(rng, {s3, 1, 3, 3, 3}, 27);
  stem_h3.b = zeros_param({s3});
  stem_h_proj.w = init_conv(rng, {c, s3 * cfg_.n_pca, 1, 1}, s3 * cfg_.n_pca);
  stem_h_proj.b = zeros_param({c});
  stem_x.w = init_conv(rng, {c, cfg_.c_aux, 3, 3}, cfg_.c_aux * 9);
  stem_x.b = zeros_param({c});

  fim_blocks.resize(static_cast<std::size_t>(cfg_.n_fim));
  for (auto& blk : fim_blocks) {
    if (cfg_.use_fim) {
      blk.dw_h = init_linear(rng, {c, 1, 3, 3}, 9);
      blk.dw_x = init_linear(rng, {c, 1, 3, 3}, 9);
      const int red = c / cfg_.se_reduction;
      blk.se_h.w1 = init_conv(rng, {c, red}, c);
      blk.se_h.b1 = zeros_param({red});
      blk.se_h.w2 = init_conv(rng, {red, c}, red);
      blk.se_h.b2 = zeros_param({c});
      blk.se_x.w1 = init_conv(rng, {c, red}, c);
      blk.se_x.b1 = zeros_param({red});
      blk.se_x.w2 = init_conv(rng, {red, c}, red);
      blk.se_x.b2 = zeros_param({c});
      blk.recomb_h3.w = init_conv(rng, {c5, 1, 3, 3, 3}, 27);
      blk.recomb_h3.b = zeros_param({c5});
      blk.recomb_h_proj.w = init_conv(rng, {c, c5 * 2 * c, 1, 1}, c5 * 2 * c);
      blk.recomb_h_proj.b = zeros_param({c});
      blk.recomb_x.w = init_conv(rng, {c, 2 * c, 3, 3}, 2 * c * 9);
      blk.recomb_x.b = zeros_param({c});
    } else {
      blk.plain_h.w = init_conv(rng, {c, c, 3, 3}, c * 9);
      blk.plain_h.b = zeros_param({c});
      blk.plain_x.w = init_conv(rng, {c, c, 3, 3}, c * 9);
      blk.plain_x.b = zeros_param({c});
    }
  }

  proj_h.w = init_conv(rng, {d, c, 3, 3}, c * 9);
  proj_h.b = zeros_param({d});
  proj_x.w = init_conv(rng, {d, c, 3, 3}, c * 9);
  proj_x.b = zeros_param({d});

  if (cfg_.use_picm) {
    const int t = cfg_.tokens();
    picm.p_h = Tensor::ones({t, d}, true);
    picm.p_x = Tensor::ones({t, d}, true);
    // Attention starts as near-uniform averaging with a near-identity
    // value path: the compensated features then open as token means of
    // the real features, which keeps the consistency pull from erasing
    // the features themselves while the prototypes differentiate.
    picm.wq_x = init_small(rng, {d, d});
    picm.wk_h = init_small(rng, {d, d});
    picm.wv_h = init_near_identity(rng, d, 0.02);
    picm.wq_h = init_small(rng, {d, d});
    picm.wk_x = init_small(rng, {d, d});
    picm.wv_x = init_near_identity(rng, d, 0.02);
  }

  head.dw1 = init_linear(rng, {2 * d, 1, 3, 3}, 9);
  head.dw2 = init_linear(rng, {2 * d, 1, 3, 3}, 9);
  // The classifier sits behind a global average pool that divides the
  // backward signal by T; a unit-scale init keeps the classification
  // gradient competitive with the consistency pull early in training.
  head.fc_w = init_conv(rng, {2 * d, cfg_.n_classes}, 2);
  head.fc_b = zeros_param({cfg_.n_classes});
}

EncoderOut PicnetModel::encoder_forward(const Tensor& x_h,
                                        const Tensor& x_aux) const {
  const int k = cfg_.patch;
  if (x_h.ndim() != 5 || x_h.dim(1) != 1 || x_h.dim(2) != cfg_.n_pca ||
      x_h.dim(3) != k || x_h.dim(4) != k) {
    throw ShapeError("encoder_forward: HSI input " + shape_str(x_h.shape()) +
                     " does not match [B,1," + std::to_string(cfg_.n_pca) +
                     "," + std::to_string(k) + "," + std::to_string(k) + "]");
  }
  if (x_aux.ndim() != 4 || x_aux.dim(1) != cfg_.c_aux || x_aux.dim(2) != k ||
      x_aux.dim(3) != k) {
    throw ShapeError("encoder_forward: aux input " + shape_str(x_aux.shape()) +
                     " does not match [B," + std::to_string(cfg_.c_aux) + "," +
                     std::to_string(k) + "," + std::to_string(k) + "]");
  }
  if (x_h.dim(0) != x_aux.dim(0)) {
    throw ShapeError("encoder_forward: batch mismatch");
  }
  const int b = x_h.dim(0);

  Tensor h3 = ops::relu(ops::conv3d(x_h, stem_h3.w, stem_h3.b, 1, 1));
  Tensor folded =
      ops::reshape(h3, {b, cfg_.stem3d_channels * cfg_.n_pca, k, k});
  Tensor f_h =
      ops::relu(ops::conv2d(folded, stem_h_proj.w, stem_h_proj.b, 1, 0));
  Tensor f_x = ops::relu(ops::conv2d(x_aux, stem_x.w, stem_x.b, 1, 1));

  for (const auto& blk : fim_blocks) {
    if (cfg_.use_fim) {
      auto [nh, nx] = fim_forward(f_h, f_x, blk);
      f_h = nh;
      f_x = nx;
    } else {
      f_h = ops::relu(ops::conv2d(f_h, blk.plain_h.w, blk.plain_h.b, 1, 1));
      f_x = ops::relu(ops::conv2d(f_x, blk.plain_x.w, blk.plain_x.b, 1, 1));
    }
  }

  f_h = ops::relu(ops::conv2d(f_h, proj_h.w, proj_h.b, 1, 1));
  f_x = ops::relu(ops::conv2d(f_x, proj_x.w, proj_x.b, 1, 1));
  return {ops::grid_to_tokens(f_h), ops::grid_to_tokens(f_x)};
}

ForwardOut PicnetModel::forward(const Tensor& x_h, const Tensor& x_aux) const {
  ForwardOut out;
  EncoderOut enc = encoder_forward(x_h, x_aux);
  out.f_h = enc.f_h;
  out.f_x = enc.f_x;
  if (cfg_.use_picm) {
    PicmOut pc = picm_forward(enc.f_h, enc.f_x, picm);
    out.i_h = pc.i_h;
    out.i_x = pc.i_x;
    out.f_hat_x = pc.f_hat_x;
    out.f_hat_h = pc.f_hat_h;
  } else {
    // Identity compensation: the head sees the raw tokens and the
    // consistency terms vanish.
    out.i_h = enc.f_h;
    out.i_x = enc.f_x;
    out.f_hat_x = enc.f_x;
    out.f_hat_h = enc.f_h;
  }
  out.logits = refine_head(out.i_h, out.i_x, head, cfg_.patch);
  return out;
}

NamedParams PicnetModel::named_params() const {
  NamedParams p;
  p.emplace_back("stem_h.conv3d.w", stem_h3.w);
  p.emplace_back("stem_h.conv3d.b", stem_h3.b);
  p.emplace_back("stem_h.proj.w", stem_h_proj.w);
  p.emplace_back("stem_h.proj.b", stem_h_proj.b);
  p.emplace_back("stem_x.w", stem_x.w);
  p.emplace_back("stem_x.b", stem_x.b);
  for (std::size_t i = 0; i < fim_blocks.size(); ++i) {
    const auto& blk = fim_blocks[i];
    const std::string base = "fim." + std::to_string(i) + ".";
    if (cfg_.use_fim) {
      p.emplace_back(base + "dw_h", blk.dw_h);
      p.emplace_back(base + "dw_x", blk.dw_x);
      p.emplace_back(base + "se_h.w1", blk.se_h.w1);
      p.emplace_back(base + "se_h.b1", blk.se_h.b1);
      p.emplace_back(base + "se_h.w2", blk.se_h.w2);
      p.emplace_back(base + "se_h.b2", blk.se_h.b2);
      p.emplace_back(base + "se_x.w1", blk.se_x.w1);
      p.emplace_back(base + "se_x.b1", blk.se_x.b1);
      p.emplace_back(base + "se_x.w2", blk.se_x.w2);
      p.emplace_back(base + "se_x.b2", blk.se_x.b2);
      p.emplace_back(base + "recomb_h.conv3d.w", blk.recomb_h3.w);
      p.emplace_back(base + "recomb_h.conv3d.b", blk.recomb_h3.b);
      p.emplace_back(base + "recomb_h.proj.w", blk.recomb_h_proj.w);
      p.emplace_back(base + "recomb_h.proj.b", blk.recomb_h_proj.b);
      p.emplace_back(base + "recomb_x.w", blk.recomb_x.w);
      p.emplace_back(base + "recomb_x.b", blk.recomb_x.b);
    } else {
      p.emplace_back(base + "plain_h.w", blk.plain_h.w);
      p.emplace_back(base + "plain_h.b", blk.plain_h.b);
      p.emplace_back(base + "plain_x.w", blk.plain_x.w);
      p.emplace_back(base + "plain_x.b", blk.plain_x.b);
    }
  }
  p.emplace_back("proj_h.w", proj_h.w);
  p.emplace_back("proj_h.b", proj_h.b);
  p.emplace_back("proj_x.w", proj_x.w);
  p.emplace_back("proj_x.b", proj_x.b);
  if (cfg_.use_picm) {
    p.emplace_back("picm.p_h", picm.p_h);
    p.emplace_back("picm.p_x", picm.p_x);
    p.emplace_back("picm.wq_x", picm.wq_x);
    p.emplace_back("picm.wk_h", picm.wk_h);
    p.emplace_back("picm.wv_h", picm.wv_h);
    p.emplace_back("picm.wq_h", picm.wq_h);
    p.emplace_back("picm.wk_x", picm.wk_x);
    p.emplace_back("picm.wv_x", picm.wv_x);
  }
  p.emplace_back("head.dw1", head.dw1);
  p.emplace_back("head.dw2", head.dw2);
  p.emplace_back("head.fc.w", head.fc_w);
  p.emplace_back("head.fc.b", head.fc_b);
  return p;
}

std::int64_t PicnetModel::param_count() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : named_params()) n += t.numel();
  return n;
}

}  // namespace picnet
