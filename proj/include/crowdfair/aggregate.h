#ifndef CROWDFAIR_AGGREGATE_H_
#define CROWDFAIR_AGGREGATE_H_

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crowdfair/dataset.h"

namespace crowdfair {

enum class PosteriorSource { kMajorityVote, kBayes, kDawidSkene, kExternal };

std::string_view to_string(PosteriorSource source);
PosteriorSource parse_posterior_source(std::string_view name);

/// Per-task estimate of P(Y = 1 | votes, A). The probability of class 0 is
/// always 1 - phi1.
struct PosteriorTable {
  std::vector<double> phi1;
  PosteriorSource source = PosteriorSource::kExternal;

  std::size_t size() const { return phi1.size(); }
};

/// Annotator confusion probabilities conditioned on the sensitive attribute.
struct ConfusionModel {
  /// pi[r][a][k][y] = P(annotator r reports k | Y = y, A = a).
  using Table = std::array<std::array<std::array<double, 2>, 2>, 2>;

  std::vector<Table> pi;
  /// prior[a] = P(Y = 1 | A = a).
  std::array<double, 2> prior{0.5, 0.5};
  bool one_coin = false;

  std::size_t num_annotators() const { return pi.size(); }

  /// Symmetric model: annotator r is right with probability skills[r][a].
  static ConfusionModel from_skills(std::span<const std::array<double, 2>> skills,
                                    std::array<double, 2> prior);
};

/// phi1 = fraction of 1-votes on each task.
PosteriorTable majority_vote(const LabelMatrix& m);

/// Counts confusion cells against ground truth with additive smoothing.
/// When `tasks` is non-empty only those tasks are used, which is how the
/// model is fit on a training split.
ConfusionModel estimate_confusion(const LabelMatrix& m, const GroupAssignment& g,
                                  double smoothing = 1.0,
                                  std::span<const std::size_t> tasks = {});

/// Exact posterior under `cm`, using only the annotators who voted on each
/// task. Computed as a log-odds sum.
PosteriorTable bayes_posterior(const LabelMatrix& m, const GroupAssignment& g,
                               const ConfusionModel& cm);

/// log P(observed votes) under `cm`, summed over tasks.
double log_likelihood(const LabelMatrix& m, const GroupAssignment& g, const ConfusionModel& cm);

struct DawidSkeneOptions {
  std::size_t iterations = 20;
  double init_skill = 0.7;
  double init_prior = 0.5;
  bool update_prior = true;
  double clamp = 1e-6;
};

struct DawidSkeneResult {
  PosteriorTable posterior;
  ConfusionModel model;
  /// Observed-data log-likelihood of the initial parameters and of the
  /// parameters after each M-step (iterations + 1 entries).
  std::vector<double> log_likelihood;
};

/// One-coin, group-conditioned EM with a fixed number of rounds.
DawidSkeneResult dawid_skene(const LabelMatrix& m, const GroupAssignment& g,
                             const DawidSkeneOptions& options = {});

/// 1{phi1 >= 1/2}.
std::vector<Label> harden(const PosteriorTable& p);

/// Writes `task_id,phi1,label,source`.
void write_posteriors(const std::filesystem::path& path, const PosteriorTable& p,
                      std::span<const std::string> task_ids);

struct PosteriorFile {
  std::vector<std::string> task_ids;
  PosteriorTable table;
};

PosteriorFile read_posteriors(const std::filesystem::path& path);

}  // namespace crowdfair

#endif  // CROWDFAIR_AGGREGATE_H_
