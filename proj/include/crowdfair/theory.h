#ifndef CROWDFAIR_THEORY_H_
#define CROWDFAIR_THEORY_H_

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "crowdfair/dataset.h"

namespace crowdfair {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// -(1/R) sum ln(2 sqrt(p (1 - p))). Any p in {0, 1} makes it +infinity.
double bayes_exponent(std::span<const double> skills);

/// -min_{t in (0, 1]} (1/R) sum ln(p t + (1 - p) / t). +infinity when more
/// than half of the crowd is perfect.
double mv_exponent(std::span<const double> skills);

/// sqrt(2 lambda) e^{-2 lambda} sum_k (lambda^k / k!)^2.
double baillon_h(double lambda);
/// max over lambda of baillon_h, about 0.4688.
double baillon_eta();

/// Distribution of a sum of independent Bernoulli(l_i), over {0..R}.
std::vector<double> poisson_binomial_pmf(std::span<const double> l);

/// P(sum > R/2) for independent Bernoulli(l_i).
double mv_strict_tail(std::span<const double> l);
/// P(sum >= R/2): the probability that majority vote (ties to 1) outputs 1.
double mv_positive_rate(std::span<const double> l);

/// d/dl_r P(sum > R/2) = P(sum over s != r equals floor(R/2)). `r` is
/// 0-based.
double mv_tail_derivative(std::span<const double> l, std::size_t r);

struct SmallCrowdBound {
  double bound = 0.0;
  double observed_gap = 0.0;
  /// min over omitted annotator of sum_{s != r} l_s(a) (1 - l_s(a)).
  std::array<double, 2> variance{0.0, 0.0};
  double sum_annotator_gaps = 0.0;
  bool holds = true;
};

/// Population version: annotators are independent Bernoulli(l[a][r]) given
/// A = a, and the observed gap is the exact majority-vote gap.
SmallCrowdBound small_crowd_bound(std::span<const double> l0, std::span<const double> l1);

/// Same bound with l_r(a) estimated from the votes; every annotator must
/// have voted in both groups. The observed gap is that of hardened majority
/// vote on the data.
SmallCrowdBound small_crowd_bound(const LabelMatrix& m, const GroupAssignment& g);

/// (g1 / R)(1 + 2 margin) + 2 C g2 / R.
double divergence_condition_value(std::size_t g1, std::size_t g2, std::size_t R,
                                  double margin, double C);
/// divergence_condition_value(...) > 1, after checking the preconditions.
bool divergence_condition_check(std::size_t g1, std::size_t g2, std::size_t R,
                                double margin, double margin_bad, double C);

enum class Aggregator { kMajorityVote, kBayes };

/// A crowd without task features: each of the R annotators has a per-group
/// skill drawn from skill_law[a], labels every task, and reports the truth
/// with that probability.
struct BoundScenario {
  std::array<Interval, 2> skill_law{Interval{0.5, 1.0}, Interval{0.6, 1.0}};
  double p_group1 = 0.5;
  std::array<double, 2> p_positive_given_group{0.5, 0.5};
};

struct BoundReport {
  double lhs = 0.0;
  double rhs = 0.0;
  /// Standard error of the sampled lhs.
  double sigma = 0.0;
  bool holds = true;
};

/// Compares the sampled |DP(aggregate) - DP(truth)| with
/// sum_a exp(-R K(a)), where K is the error exponent of the aggregator for
/// the drawn skills. The Bayes aggregator uses the true skills and priors.
/// holds = lhs <= rhs + 3 sigma.
BoundReport dp_bound_check(const BoundScenario& scenario, std::size_t R, Aggregator aggregator,
                           std::size_t num_tasks, std::uint64_t seed);

}  // namespace crowdfair

#endif  // CROWDFAIR_THEORY_H_
