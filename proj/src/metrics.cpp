#include "picnet/metrics.hpp"

#include <limits>
#include <string>

#include "picnet/errors.hpp"

namespace picnet {

void ConfusionMatrix::add(int true_class, int pred_class) {
  if (true_class < 0 || true_class >= k || pred_class < 0 || pred_class >= k) {
    throw UsageError("ConfusionMatrix::add: class (" +
                     std::to_string(true_class) + "," +
                     std::to_string(pred_class) + ") outside [0," +
                     std::to_string(k) + ")");
  }
  counts[static_cast<std::size_t>(true_class) * k + pred_class] += 1;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t n = 0;
  for (std::int64_t c : counts) n += c;
  return n;
}

ClassMetrics compute_metrics(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (cm.k < 1 || total == 0) {
    throw DataError("compute_metrics: empty confusion matrix");
  }
  ClassMetrics m;
  m.per_class.assign(static_cast<std::size_t>(cm.k),
                     std::numeric_limits<double>::quiet_NaN());

  std::int64_t trace = 0;
  double aa_sum = 0.0;
  int present = 0;
  std::vector<std::int64_t> row(static_cast<std::size_t>(cm.k), 0);
  std::vector<std::int64_t> col(static_cast<std::size_t>(cm.k), 0);
  for (int i = 0; i < cm.k; ++i) {
    for (int j = 0; j < cm.k; ++j) {
      row[static_cast<std::size_t>(i)] += cm.at(i, j);
      col[static_cast<std::size_t>(j)] += cm.at(i, j);
    }
    trace += cm.at(i, i);
  }
  for (int i = 0; i < cm.k; ++i) {
    if (row[static_cast<std::size_t>(i)] > 0) {
      const double acc =
          static_cast<double>(cm.at(i, i)) /
          static_cast<double>(row[static_cast<std::size_t>(i)]);
      m.per_class[static_cast<std::size_t>(i)] = acc;
      aa_sum += acc;
      ++present;
    }
  }
  m.oa = static_cast<double>(trace) / static_cast<double>(total);
  m.aa = aa_sum / present;

  if (trace == total) {
    // Diagonal matrix: perfect agreement, including the degenerate
    // single-class case where p_e == 1.
    m.kappa = 1.0;
  } else {
    double pe = 0.0;
    for (int i = 0; i < cm.k; ++i) {
      pe += static_cast<double>(row[static_cast<std::size_t>(i)]) *
            static_cast<double>(col[static_cast<std::size_t>(i)]);
    }
    pe /= static_cast<double>(total) * static_cast<double>(total);
    m.kappa = (m.oa - pe) / (1.0 - pe);
  }
  return m;
}

}  // namespace picnet
