#ifndef CROWDFAIR_METRICS_H_
#define CROWDFAIR_METRICS_H_

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "crowdfair/dataset.h"

namespace crowdfair {

struct FairnessReport {
  double dp_gap = 0.0;
  /// rate[a] = mean prediction over tasks with A = a.
  std::array<double, 2> rate{0.0, 0.0};
  std::optional<double> f1;
  std::optional<double> accuracy;

  /// rate[1] - rate[0].
  double signed_gap() const { return rate[1] - rate[0]; }
};

/// Demographic parity gap of per-task probabilities of predicting 1. The
/// rates are exact averages, so a randomized classifier needs no sampling.
/// When `tasks` is non-empty only those tasks are counted.
FairnessReport dp_gap(std::span<const double> prob, const GroupAssignment& g,
                      std::span<const std::size_t> tasks = {});
FairnessReport dp_gap(std::span<const Label> labels, const GroupAssignment& g,
                      std::span<const std::size_t> tasks = {});

struct Classification {
  double f1 = 0.0;
  double accuracy = 0.0;
};

/// Binary F1 with positive class 1 (0 when there are no true positives).
Classification f1_accuracy(std::span<const Label> pred, std::span<const Label> truth,
                           std::span<const std::size_t> tasks = {});

/// dp_gap of `prob` plus F1/accuracy of `labels` against the truth carried
/// by `g`, if any.
FairnessReport evaluate(std::span<const double> prob, std::span<const Label> labels,
                        const GroupAssignment& g, std::span<const std::size_t> tasks = {});

/// Per-annotator, per-group rate of 1-votes; absent when the annotator did
/// not vote in that group.
std::vector<std::array<std::optional<double>, 2>> annotator_rates(const LabelMatrix& m,
                                                                  const GroupAssignment& g);

/// |rate_r(1) - rate_r(0)| per annotator; absent unless r voted in both groups.
std::vector<std::optional<double>> annotator_dp_gaps(const LabelMatrix& m,
                                                     const GroupAssignment& g);

}  // namespace crowdfair

#endif  // CROWDFAIR_METRICS_H_
