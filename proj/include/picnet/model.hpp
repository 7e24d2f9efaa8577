#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "picnet/adam.hpp"
#include "picnet/tensor.hpp"

namespace picnet {

// Architecture hyperparameters. Channel widths, patch size and block count
// drive every tensor shape, so validation happens here and the forward
// pass is shape-sound by construction.
struct ModelConfig {
  int n_pca = 30;       // HSI principal components fed to the 3-D stem
  int patch = 14;       // patch edge k; token count T = k*k
  int n_fim = 4;        // stacked frequency-interaction blocks
  int c_h = 32;         // HSI branch channels
  int c_x = 32;         // SAR/LiDAR branch channels
  int d_model = 64;     // token embedding width after the encoder
  int n_classes = 0;    // K, from the dataset
  int c_aux = 0;        // SAR/LiDAR input channels, from the dataset
  // Consistency-loss weights. The norm gradient keeps unit magnitude no
  // matter how small the gap is; weights much above 0.03 let the
  // alignment pull outrun the early classification signal on small data
  // and collapse the features.
  double lambda1 = 0.03;
  double lambda2 = 0.03;
  int se_reduction = 4; // channel-attention bottleneck ratio

  // Internal widths of the 3-D convolutions (stem and the per-block
  // high/low recombination).
  int stem3d_channels = 4;
  int recomb3d_channels = 4;

  // Ablation switches used by the evaluation harness.
  bool use_fim = true;
  bool use_picm = true;

  int tokens() const { return patch * patch; }
  void validate() const;  // throws ConfigError
};

struct Conv2dParams {
  Tensor w, b;
};
struct Conv3dParams {
  Tensor w, b;
};

// Squeeze-excitation gate for the low-frequency branch.
struct SeParams {
  Tensor w1, b1, w2, b2;
};

struct FimBlockParams {
  // Depthwise 3x3 kernels enhancing the high-frequency parts.
  Tensor dw_h, dw_x;
  SeParams se_h, se_x;
  // HSI recombination: 3-D kernel over (channel-as-depth, H, W), then a
  // 1x1 projection folding the depth axis back into c_h channels.
  Conv3dParams recomb_h3;
  Conv2dParams recomb_h_proj;
  // SAR/LiDAR recombination: plain 3x3 convolution 2C -> C.
  Conv2dParams recomb_x;
  // Replacement per-modality convolutions when the block runs without
  // frequency interaction.
  Conv2dParams plain_h, plain_x;
};

// Learnable modality prototypes and the per-direction attention
// projections. Prototypes are [T, d_model], initialized to all ones, and
// shared across every sample.
struct PicmParams {
  Tensor p_h, p_x;
  Tensor wq_x, wk_h, wv_h;  // X queries the HSI features
  Tensor wq_h, wk_x, wv_x;  // H queries the SAR/LiDAR features
};

struct HeadParams {
  Tensor dw1, dw2;  // depthwise 3x3 over the fused 2*d_model channels
  Tensor fc_w, fc_b;
};

struct EncoderOut {
  Tensor f_h, f_x;  // [B, T, d_model] token features per modality
};

struct PicmOut {
  Tensor i_h, i_x;          // compensated features entering the head
  Tensor f_hat_x, f_hat_h;  // cross-reconstructed features
};

struct ForwardOut {
  Tensor logits;            // [B, K]
  Tensor f_h, f_x;          // encoder tokens
  Tensor i_h, i_x;
  Tensor f_hat_h, f_hat_x;
};

struct LossParts {
  Tensor total, ce, cyc_x, cyc_h;
};

// ---- model ops -----------------------------------------------------------

// Splits a feature map into a half-resolution low-frequency part (average
// pooling) and a full-resolution high-frequency residual
// f - upsample(f_l). upsample(f_l) + f_h reconstructs f exactly up to
// binary64 rounding; constant inputs give f_h == 0 exactly.
std::pair<Tensor, Tensor> freq_separate(const Tensor& f);

// Residual depthwise enhancement: f + dwconv3x3(f), bias-free.
Tensor enhance_high(const Tensor& f_h, const Tensor& dw_kernel);

// Channel attention: f * sigmoid(W2 relu(W1 gap(f) + b1) + b2), the gate
// expanded explicitly over the spatial plane.
Tensor refine_low(const Tensor& f_l, const SeParams& se);

// One frequency-interaction block: separate both modalities, enhance the
// high parts, gate the low parts, exchange low into the H branch and high
// into the X branch, then recombine each modality at full resolution.
std::pair<Tensor, Tensor> fim_forward(const Tensor& f_h, const Tensor& f_x,
                                      const FimBlockParams& p);

// Prototype cross-attention compensation in both directions, followed by
// the residual merge i = f + f_hat.
PicmOut picm_forward(const Tensor& f_h, const Tensor& f_x,
                     const PicmParams& p);

// Fused-token refinement: concat channels, two depthwise 3x3 convs with a
// relu between, global average pool, linear map to K logits.
Tensor refine_head(const Tensor& i_h, const Tensor& i_x, const HeadParams& p,
                   int k);

// Mean over the batch of the per-sample Frobenius norm of f - f_hat.
Tensor consistency_loss(const Tensor& f, const Tensor& f_hat);

// ce + lambda1 * ||f_x - f_hat_x|| + lambda2 * ||f_h - f_hat_h|| terms.
Tensor total_loss(const Tensor& logits, const std::vector<int>& labels,
                  const Tensor& f_h, const Tensor& f_x, const Tensor& f_hat_h,
                  const Tensor& f_hat_x, double lambda1, double lambda2);

// Same composition but returning the individual terms for history logs.
// Consistency terms with a zero weight are skipped and recorded as zero.
LossParts picnet_loss(const ForwardOut& out, const std::vector<int>& labels,
                      double lambda1, double lambda2);

// ---- the assembled model --------------------------------------------------

class PicnetModel {
 public:
  PicnetModel(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  // x_h: [B, 1, n_pca, k, k], x_aux: [B, c_aux, k, k].
  ForwardOut forward(const Tensor& x_h, const Tensor& x_aux) const;
  EncoderOut encoder_forward(const Tensor& x_h, const Tensor& x_aux) const;

  // Every learnable tensor exactly once, in a fixed order.
  NamedParams named_params() const;
  std::int64_t param_count() const;

  Conv3dParams stem_h3;
  Conv2dParams stem_h_proj;
  Conv2dParams stem_x;
  std::vector<FimBlockParams> fim_blocks;
  Conv2dParams proj_h, proj_x;
  PicmParams picm;
  HeadParams head;

 private:
  ModelConfig cfg_;
};

}  // namespace picnet
