#include "crowdfair/metrics.h"

#include <cmath>

#include "crowdfair/error.h"

namespace crowdfair {

namespace {

template <typename T>
FairnessReport group_rates(std::span<const T> pred, const GroupAssignment& g,
                           std::span<const std::size_t> tasks) {
  if (pred.size() != g.size()) throw Error("dp_gap: prediction/group size mismatch");
  std::array<double, 2> sum{0.0, 0.0}, n{0.0, 0.0};
  auto add = [&](std::size_t t) {
    const Label a = g.group(t);
    sum[a] += double(pred[t]);
    n[a] += 1.0;
  };
  if (tasks.empty()) {
    for (std::size_t t = 0; t < pred.size(); ++t) add(t);
  } else {
    for (std::size_t t : tasks) add(t);
  }
  if (n[0] == 0 || n[1] == 0) throw Error("dp_gap: both groups must be non-empty");
  FairnessReport report;
  report.rate = {sum[0] / n[0], sum[1] / n[1]};
  report.dp_gap = std::abs(report.rate[1] - report.rate[0]);
  return report;
}

}  // namespace

FairnessReport dp_gap(std::span<const double> prob, const GroupAssignment& g,
                      std::span<const std::size_t> tasks) {
  return group_rates(prob, g, tasks);
}

FairnessReport dp_gap(std::span<const Label> labels, const GroupAssignment& g,
                      std::span<const std::size_t> tasks) {
  return group_rates(labels, g, tasks);
}

Classification f1_accuracy(std::span<const Label> pred, std::span<const Label> truth,
                           std::span<const std::size_t> tasks) {
  if (pred.size() != truth.size()) throw Error("f1_accuracy: size mismatch");
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0, n = 0;
  auto add = [&](std::size_t t) {
    const bool p = pred[t], y = truth[t];
    tp += p && y;
    fp += p && !y;
    fn += !p && y;
    correct += p == y;
    ++n;
  };
  if (tasks.empty()) {
    for (std::size_t t = 0; t < pred.size(); ++t) add(t);
  } else {
    for (std::size_t t : tasks) add(t);
  }
  Classification c;
  if (n > 0) c.accuracy = double(correct) / double(n);
  if (tp > 0) c.f1 = 2.0 * double(tp) / double(2 * tp + fp + fn);
  return c;
}

FairnessReport evaluate(std::span<const double> prob, std::span<const Label> labels,
                        const GroupAssignment& g, std::span<const std::size_t> tasks) {
  FairnessReport report = dp_gap(prob, g, tasks);
  if (g.has_truth()) {
    const Classification c = f1_accuracy(labels, g.truths(), tasks);
    report.f1 = c.f1;
    report.accuracy = c.accuracy;
  }
  return report;
}

std::vector<std::array<std::optional<double>, 2>> annotator_rates(const LabelMatrix& m,
                                                                  const GroupAssignment& g) {
  std::vector<std::array<double, 2>> ones(m.num_annotators()), seen(m.num_annotators());
  for (const Vote& v : m.votes()) {
    const Label a = g.group(v.task);
    ones[v.annotator][a] += v.label;
    seen[v.annotator][a] += 1.0;
  }
  std::vector<std::array<std::optional<double>, 2>> out(m.num_annotators());
  for (std::size_t r = 0; r < out.size(); ++r) {
    for (int a = 0; a < 2; ++a) {
      if (seen[r][a] > 0) out[r][a] = ones[r][a] / seen[r][a];
    }
  }
  return out;
}

std::vector<std::optional<double>> annotator_dp_gaps(const LabelMatrix& m,
                                                     const GroupAssignment& g) {
  const auto rates = annotator_rates(m, g);
  std::vector<std::optional<double>> out(rates.size());
  for (std::size_t r = 0; r < rates.size(); ++r) {
    if (rates[r][0] && rates[r][1]) out[r] = std::abs(*rates[r][1] - *rates[r][0]);
  }
  return out;
}

}  // namespace crowdfair
