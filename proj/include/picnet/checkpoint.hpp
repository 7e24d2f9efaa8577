#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "picnet/adam.hpp"
#include "picnet/model.hpp"

namespace picnet {

// Checkpoint file layout (little-endian):
//   bytes 0..7   magic "PICNET01"
//   bytes 8..11  uint32 header length
//   header       UTF-8 JSON: format, epoch, seed, model_config, adam
//                hyperparameters/step, and a tensor table naming every
//                payload tensor with shape and byte offset
//   payload      concatenated binary64 tensor data in table order
// Tensor names: "param.<name>" for model parameters, "adam.m.<name>" /
// "adam.v.<name>" for the optimizer moments. save -> load -> save is
// byte-identical.
struct Checkpoint {
  int format = 1;
  ModelConfig config;
  std::int64_t epoch = 0;
  std::uint64_t seed = 0;
  AdamState adam;
  std::map<std::string, Tensor> params;
};

void save_checkpoint(const std::string& path, const PicnetModel& model,
                     const AdamState& adam, std::int64_t epoch,
                     std::uint64_t seed);

Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the model from the stored config and overwrites every
// parameter with the stored values.
PicnetModel model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace picnet
