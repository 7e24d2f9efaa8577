#pragma once

#include <cstdint>
#include <string>

#include "picnet/datapipe.hpp"

namespace picnet {

enum class SynthDifficulty { kEasy, kComplementary };

SynthDifficulty parse_difficulty(const std::string& name);  // ConfigError
std::string difficulty_name(SynthDifficulty d);

// Synthetic desk-scale scene: a blob-structured class raster (nearest of
// several seeded sites), class-conditional Gaussian spectral signatures in
// the HSI cube and class-conditional intensity levels in the aux channels.
//
// difficulty == kComplementary makes modalities complementary by
// construction: 0-based class pairs (4i, 4i+1) share one HSI signature and
// are separable only in aux, pairs (4i+2, 4i+3) share one aux level and
// are separable only in HSI. A single-modality classifier therefore has a
// known accuracy ceiling.
struct SynthConfig {
  std::uint64_t seed = 1;
  int classes = 4;
  int height = 64;
  int width = 64;
  int bands = 16;
  int aux_channels = 4;
  SynthDifficulty difficulty = SynthDifficulty::kEasy;
  int train_per_class = 100;
  int test_per_class = 100;
  // Per-pixel Gaussian noise amplitude on both modalities.
  double noise = 0.08;
};

// Deterministic for a fixed config. Labeled pixels are sampled from blob
// interiors (a 5x5 same-class neighbourhood) with disjoint train/test
// sets; throws ConfigError when a class cannot supply enough pixels.
DatasetBundle synth_generate(const SynthConfig& cfg);

}  // namespace picnet
