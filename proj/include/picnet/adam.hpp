#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "picnet/tensor.hpp"

namespace picnet {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

// Adam optimizer state: first/second moment per parameter plus the shared
// step counter and hyperparameters. Moments are zero-initialized and keyed
// by parameter name so checkpoints can restore them exactly.
class AdamState {
 public:
  AdamState() = default;
  AdamState(double lr, double beta1 = 0.9, double beta2 = 0.999,
            double epsilon = 1e-8);

  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  std::int64_t step_count() const { return step_; }
  void set_step_count(std::int64_t t) { step_ = t; }

  // Creates zero moments for any parameter not seen yet.
  void ensure_registered(const NamedParams& params);

  std::map<std::string, std::vector<double>>& moment1() { return m_; }
  std::map<std::string, std::vector<double>>& moment2() { return v_; }
  const std::map<std::string, std::vector<double>>& moment1() const {
    return m_;
  }
  const std::map<std::string, std::vector<double>>& moment2() const {
    return v_;
  }

 private:
  friend void adam_step(const NamedParams&, AdamState&);
  std::int64_t step_ = 0;
  std::map<std::string, std::vector<double>> m_;
  std::map<std::string, std::vector<double>> v_;
};

// One bias-corrected Adam update over every named parameter, consuming
// and then zeroing the accumulated gradients. Throws UsageError when a
// gradient is missing and NumericError when one is non-finite.
void adam_step(const NamedParams& params, AdamState& state);

}  // namespace picnet
