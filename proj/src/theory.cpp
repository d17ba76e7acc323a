#include "crowdfair/theory.h"

#include <algorithm>
#include <cmath>

#include "crowdfair/aggregate.h"
#include "crowdfair/error.h"
#include "crowdfair/metrics.h"

namespace crowdfair {

namespace {

template <typename F>
double golden_min(F&& f, double lo, double hi, double width) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > width) {
    if (f1 <= f2) {
      hi = x2, x2 = x1, f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1, x1 = x2, f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    }
  }
  return f1 <= f2 ? x1 : x2;
}

void check_probabilities(std::span<const double> l, const char* context) {
  for (double v : l) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(std::string(context) + ": entries must lie in [0, 1]");
  }
}

double upper_tail(std::span<const double> pmf, std::size_t from) {
  double s = 0.0;
  for (std::size_t k = from; k < pmf.size(); ++k) s += pmf[k];
  return s;
}

}  // namespace

double bayes_exponent(std::span<const double> skills) {
  check_probabilities(skills, "bayes_exponent");
  if (skills.empty()) return 0.0;
  double sum = 0.0;
  for (double p : skills) {
    if (p == 0.0 || p == 1.0) return kInfinity;
    sum += std::log(2.0 * std::sqrt(p * (1.0 - p)));
  }
  return -sum / double(skills.size());
}

double mv_exponent(std::span<const double> skills) {
  check_probabilities(skills, "mv_exponent");
  if (skills.empty()) return 0.0;
  const auto perfect = std::size_t(std::count(skills.begin(), skills.end(), 1.0));
  if (perfect > skills.size() - perfect) return kInfinity;

  const double R = double(skills.size());
  // Convex in s = ln t.
  auto f = [&](double s) {
    const double t = std::exp(s);
    double sum = 0.0;
    for (double p : skills) sum += std::log(p * t + (1.0 - p) / t);
    return sum / R;
  };
  constexpr int kScan = 200;
  const double s_lo = std::log(1e-6);
  std::size_t best = 0;
  double best_value = kInfinity;
  std::vector<double> s(kScan);
  for (int j = 0; j < kScan; ++j) {
    s[j] = s_lo * (1.0 - double(j) / (kScan - 1));
    const double v = f(s[j]);
    if (v < best_value) best_value = v, best = j;
  }
  const double lo = s[best == 0 ? 0 : best - 1];
  const double hi = s[std::min<std::size_t>(best + 1, kScan - 1)];
  const double refined = golden_min(f, lo, hi, 1e-12);
  const double value = std::min(best_value, f(refined));
  // f(1) = 0, so the minimum is never positive.
  return -std::min(value, 0.0);
}

double baillon_h(double lambda) {
  if (!(lambda >= 0.0)) throw Error("baillon_h: lambda must be non-negative");
  if (lambda == 0.0) return 0.0;
  // sum_k (e^{-lambda} lambda^k / k!)^2, each term from the previous by a
  // log-space ratio.
  double log_term = -lambda;
  double sum = 0.0;
  for (std::size_t k = 0;; ++k) {
    if (k > 0) log_term += std::log(lambda) - std::log(double(k));
    const double sq = std::exp(2.0 * log_term);
    sum += sq;
    if (double(k) > lambda && sq < 1e-14 * sum) break;
  }
  return std::sqrt(2.0 * lambda) * sum;
}

double baillon_eta() {
  constexpr double lo = 1e-6, hi = 10.0;
  constexpr int kScan = 200;
  int best = 0;
  double best_value = -1.0;
  for (int j = 0; j < kScan; ++j) {
    const double v = baillon_h(lo + (hi - lo) * j / (kScan - 1));
    if (v > best_value) best_value = v, best = j;
  }
  const double step = (hi - lo) / (kScan - 1);
  const double a = std::max(lo, lo + step * (best - 1));
  const double b = std::min(hi, lo + step * (best + 1));
  const double lambda = golden_min([](double x) { return -baillon_h(x); }, a, b, 1e-10);
  return std::max(best_value, baillon_h(lambda));
}

std::vector<double> poisson_binomial_pmf(std::span<const double> l) {
  check_probabilities(l, "poisson_binomial_pmf");
  std::vector<double> pmf(l.size() + 1, 0.0);
  pmf[0] = 1.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    for (std::size_t k = i + 1; k > 0; --k) pmf[k] = pmf[k] * (1.0 - l[i]) + pmf[k - 1] * l[i];
    pmf[0] *= 1.0 - l[i];
  }
  return pmf;
}

double mv_strict_tail(std::span<const double> l) {
  const auto pmf = poisson_binomial_pmf(l);
  return upper_tail(pmf, l.size() / 2 + 1);
}

double mv_positive_rate(std::span<const double> l) {
  const auto pmf = poisson_binomial_pmf(l);
  return upper_tail(pmf, (l.size() + 1) / 2);
}

double mv_tail_derivative(std::span<const double> l, std::size_t r) {
  if (r >= l.size()) throw Error("mv_tail_derivative: index out of range");
  std::vector<double> rest(l.begin(), l.end());
  rest.erase(rest.begin() + std::ptrdiff_t(r));
  const auto pmf = poisson_binomial_pmf(rest);
  return pmf[l.size() / 2];
}

namespace {

double min_leave_one_out_variance(std::span<const double> l) {
  double total = 0.0, largest = 0.0;
  for (double v : l) {
    const double var = v * (1.0 - v);
    total += var;
    largest = std::max(largest, var);
  }
  return std::max(0.0, total - largest);
}

SmallCrowdBound finish_bound(std::span<const double> l0, std::span<const double> l1,
                             double observed_gap) {
  SmallCrowdBound out;
  out.variance = {min_leave_one_out_variance(l0), min_leave_one_out_variance(l1)};
  for (std::size_t r = 0; r < l0.size(); ++r) out.sum_annotator_gaps += std::abs(l1[r] - l0[r]);
  const double v = std::min(out.variance[0], out.variance[1]);
  if (out.sum_annotator_gaps == 0.0) {
    out.bound = 0.0;
  } else if (v == 0.0) {
    out.bound = kInfinity;
  } else {
    out.bound = baillon_eta() / std::sqrt(v) * out.sum_annotator_gaps;
  }
  out.observed_gap = observed_gap;
  out.holds = out.observed_gap <= out.bound + 1e-12;
  return out;
}

}  // namespace

SmallCrowdBound small_crowd_bound(std::span<const double> l0, std::span<const double> l1) {
  if (l0.size() != l1.size() || l0.empty()) {
    throw Error("small_crowd_bound: need the same non-zero number of annotators in both groups");
  }
  const double gap = std::abs(mv_positive_rate(l1) - mv_positive_rate(l0));
  return finish_bound(l0, l1, gap);
}

SmallCrowdBound small_crowd_bound(const LabelMatrix& m, const GroupAssignment& g) {
  const auto rates = annotator_rates(m, g);
  std::vector<double> l0, l1;
  for (std::size_t r = 0; r < rates.size(); ++r) {
    if (!rates[r][0] || !rates[r][1]) {
      throw Error("small_crowd_bound: annotator " + std::to_string(r) +
                  " did not vote in both groups");
    }
    l0.push_back(*rates[r][0]);
    l1.push_back(*rates[r][1]);
  }
  if (l0.empty()) throw Error("small_crowd_bound: no annotators");
  const auto labels = harden(majority_vote(m));
  return finish_bound(l0, l1, dp_gap(std::span<const Label>(labels), g).dp_gap);
}

double divergence_condition_value(std::size_t g1, std::size_t g2, std::size_t R, double margin,
                                  double C) {
  return double(g1) / double(R) * (1.0 + 2.0 * margin) + 2.0 * C * double(g2) / double(R);
}

bool divergence_condition_check(std::size_t g1, std::size_t g2, std::size_t R, double margin,
                                double margin_bad, double C) {
  if (R == 0 || g1 + g2 > R) throw Error("divergence_condition_check: need g1 + g2 <= R, R > 0");
  if (!(margin > 0.0 && margin < 0.5) || !(margin_bad > 0.0 && margin_bad < 0.5)) {
    throw Error("divergence_condition_check: margins must lie in (0, 1/2)");
  }
  if (!(C >= 0.0 && C < 0.5)) throw Error("divergence_condition_check: C must lie in [0, 1/2)");
  return divergence_condition_value(g1, g2, R, margin, C) > 1.0;
}

BoundReport dp_bound_check(const BoundScenario& scenario, std::size_t R, Aggregator aggregator,
                           std::size_t num_tasks, std::uint64_t seed) {
  if (R == 0 || num_tasks == 0) throw Error("dp_bound_check: need R > 0 and tasks > 0");
  SyntheticConfig cfg;
  cfg.num_tasks = num_tasks;
  cfg.pool_size = R;
  cfg.votes_per_task = R;
  cfg.p_group1 = scenario.p_group1;
  cfg.p_positive_given_group = scenario.p_positive_given_group;
  cfg.skill_law = scenario.skill_law;
  cfg.seed = seed;
  const SyntheticCrowd crowd = generate_synthetic(cfg);
  const auto& g = crowd.data.groups;
  g.require_both_groups("dp_bound_check");

  std::vector<Label> pred;
  if (aggregator == Aggregator::kMajorityVote) {
    pred = harden(majority_vote(crowd.data.votes));
  } else {
    // Skills of exactly 0 or 1 are nudged inside (0, 1) so that log-odds stay
    // finite; the decisions they force are unchanged.
    auto skills = crowd.skills.skills;
    for (auto& s : skills) {
      for (double& p : s) p = std::clamp(p, 1e-12, 1.0 - 1e-12);
    }
    const auto cm = ConfusionModel::from_skills(skills, scenario.p_positive_given_group);
    pred = harden(bayes_posterior(crowd.data.votes, g, cm));
  }

  BoundReport report;
  const double gap_pred = dp_gap(std::span<const Label>(pred), g).dp_gap;
  const double gap_truth = dp_gap(g.truths(), g).dp_gap;
  report.lhs = std::abs(gap_pred - gap_truth);

  std::array<double, 2> errors{0, 0};
  for (std::size_t t = 0; t < num_tasks; ++t) errors[g.group(t)] += pred[t] != g.truth(t);
  double variance = 0.0;
  for (int a = 0; a < 2; ++a) {
    const double n = double(g.count(a));
    const double e = errors[a] / n;
    variance += e * (1.0 - e) / n;

    std::vector<double> skills;
    for (const auto& s : crowd.skills.skills) skills.push_back(s[a]);
    const double K = aggregator == Aggregator::kMajorityVote ? mv_exponent(skills)
                                                             : bayes_exponent(skills);
    report.rhs += K == kInfinity ? 0.0 : std::exp(-double(R) * K);
  }
  report.sigma = std::sqrt(variance);
  report.holds = report.lhs <= report.rhs + 3.0 * report.sigma;
  return report;
}

}  // namespace crowdfair
