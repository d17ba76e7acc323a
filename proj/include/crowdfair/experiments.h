#ifndef CROWDFAIR_EXPERIMENTS_H_
#define CROWDFAIR_EXPERIMENTS_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "crowdfair/aggregate.h"
#include "crowdfair/dataset.h"
#include "crowdfair/faircrowd.h"

namespace crowdfair {

enum class Scenario { kCompetent, kAdversarial, kUninformative };

std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view name);
/// Per-group skill laws of the three convergence regimes.
std::array<Interval, 2> scenario_skill_law(Scenario s);

struct ConvergenceConfig {
  std::vector<Scenario> scenarios{Scenario::kCompetent};
  std::vector<std::size_t> crowd_sizes{3, 5, 8, 10, 15, 20, 40};
  std::size_t num_tasks = 10000;
  std::size_t reps = 20;
  std::uint64_t seed = 0;
};

struct ConvergenceRow {
  Scenario scenario;
  std::size_t R;
  PosteriorSource method;
  /// Mean and standard deviation over reps of DP(aggregate) - DP(truth).
  double mean_diff;
  double sd_diff;
};

/// Every task is labeled by all R annotators; P(A=1) = P(Y=1|A) = 1/2. Bayes
/// uses confusion counts against the truth (smoothing 1), DS uses the
/// default EM settings.
std::vector<ConvergenceRow> run_convergence(const ConvergenceConfig& cfg);
void write_convergence(const std::filesystem::path& path, const std::vector<ConvergenceRow>& rows);

enum class Fairifier { kFairCrowd, kPostTd };

std::string_view to_string(Fairifier f);
Fairifier parse_fairifier(std::string_view name);

struct TradeoffConfig {
  std::vector<double> epsilons{0.01, 0.05, 0.1, 0.2};
  std::vector<PosteriorSource> methods{PosteriorSource::kMajorityVote, PosteriorSource::kBayes,
                                       PosteriorSource::kDawidSkene};
  std::vector<Fairifier> fairifiers{Fairifier::kFairCrowd, Fairifier::kPostTd};
  std::size_t resamples = 10;
  double test_fraction = 0.6;
  std::uint64_t seed = 0;
  /// epsilon is overwritten per run.
  FairCrowdConfig faircrowd;
  DawidSkeneOptions dawid_skene;
  double smoothing = 1.0;
};

struct TradeoffRow {
  PosteriorSource method;
  Fairifier fairifier;
  double epsilon;
  std::size_t resample;
  /// Expected gap on the test split (exact for FairCrowd's randomized rule).
  double dp_gap;
  /// Of sampled labels on the test split.
  double f1;
  double accuracy;
};

struct TradeoffSummaryRow {
  PosteriorSource method;
  Fairifier fairifier;
  double epsilon;
  double dp_mean, dp_sd;
  double f1_mean, f1_sd;
  double accuracy_mean, accuracy_sd;
  std::size_t resamples;
};

struct TradeoffResult {
  std::vector<TradeoffRow> rows;
  std::vector<TradeoffSummaryRow> summary;
};

/// Aggregates on the full vote set, fairifies on the full set and evaluates
/// on a fresh random test split per resample. Bayes confusion counts use the
/// truth of the training split only.
TradeoffResult run_tradeoff(const Dataset& data, const TradeoffConfig& cfg);
void write_tradeoff_summary(const std::filesystem::path& path,
                            const std::vector<TradeoffSummaryRow>& rows);
void write_tradeoff_rows(const std::filesystem::path& path, const std::vector<TradeoffRow>& rows);

/// P(A=1) = 0.6, P(Y=1|A=a) = 0.4 / 0.6, competent skills, 2000 tasks with
/// 5 of 100 annotators each.
SyntheticConfig tradeoff_synthetic_config(std::uint64_t seed);

/// Rates of a two-group population where X=1 has probability 3/4 in group 1
/// and 1/4 in group 0, and P(label=1 | X) is 0.8 / 0.2, encoded as four
/// equally weighted tasks per group. The gap is 0.3 although the labeler
/// does not look at A.
std::array<double, 2> feature_shift_rates();

struct TheoryCheck {
  std::string name;
  double lhs;
  double rhs;
  bool holds;
};

std::vector<TheoryCheck> run_verify_theory(std::uint64_t seed);
void write_theory_checks(const std::filesystem::path& path, const std::vector<TheoryCheck>& rows);

}  // namespace crowdfair

#endif  // CROWDFAIR_EXPERIMENTS_H_
