#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "picnet/tensor.hpp"

namespace picnet {

// Central finite differences, h = 1e-5 in binary64. The oracle evaluates
// only the forward value, so it is independent of every backward rule it
// checks.
inline constexpr double kFdStep = 1e-5;

// Runs loss_fn once under a tape, backpropagates, then finite-difference
// checks d(loss)/d(p) for every tensor in `params` (each must feed
// loss_fn through its handle). Returns the worst relative error,
// measured per parameter tensor as
//   max_i |fd_i - analytic_i| / max(||fd||_inf, ||analytic||_inf, 1e-8).
double check_gradients(const std::vector<Tensor>& params,
                       const std::function<Tensor()>& loss_fn,
                       double h = kFdStep);

struct GradCheckCase {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// The full finite-difference suite: every primitive op on randomized
// shapes plus the end-to-end tiny-config model, `num_seeds` random draws
// each. Backs both the gradcheck CLI subcommand and the acceptance gate.
std::vector<GradCheckCase> run_gradient_suite(std::uint64_t seed,
                                              int num_seeds);

bool all_pass(const std::vector<GradCheckCase>& cases);

}  // namespace picnet
