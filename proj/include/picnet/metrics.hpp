#pragma once

#include <cstdint>
#include <vector>

namespace picnet {

// K x K contingency counts, rows = true class, cols = predicted (0-based).
struct ConfusionMatrix {
  int k = 0;
  std::vector<std::int64_t> counts;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int classes)
      : k(classes),
        counts(static_cast<std::size_t>(classes) * classes, 0) {}

  void add(int true_class, int pred_class);
  std::int64_t at(int true_class, int pred_class) const {
    return counts[static_cast<std::size_t>(true_class) * k + pred_class];
  }
  std::int64_t total() const;
};

struct ClassMetrics {
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
  // Per-class recall; NaN for classes absent from the truth (they are
  // excluded from AA).
  std::vector<double> per_class;
};

// oa = trace/total; aa = mean recall over classes present in the truth;
// kappa = (p_o - p_e)/(1 - p_e) with p_e = sum_i row_i*col_i / total^2.
// A diagonal matrix with nonzero trace has kappa exactly 1, which also
// covers the single-class case where 1 - p_e vanishes.
ClassMetrics compute_metrics(const ConfusionMatrix& cm);

}  // namespace picnet
