#ifndef CROWDFAIR_DATASET_H_
#define CROWDFAIR_DATASET_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace crowdfair {

using Label = std::uint8_t;

struct Vote {
  std::size_t task;
  std::size_t annotator;
  Label label;

  friend bool operator==(const Vote&, const Vote&) = default;
};

/// Sparse task x annotator matrix of binary votes.
///
/// Votes are stored grouped by task (stable with respect to the input order),
/// so `task_votes(t)` is a contiguous view. Construction validates that every
/// index is in range, that no (task, annotator) pair is repeated, that labels
/// are 0/1 and that every task received at least one vote.
class LabelMatrix {
 public:
  LabelMatrix() = default;
  LabelMatrix(std::size_t num_tasks, std::size_t num_annotators,
              std::vector<Vote> votes);

  std::size_t num_tasks() const { return num_tasks_; }
  std::size_t num_annotators() const { return num_annotators_; }
  std::size_t num_votes() const { return votes_.size(); }

  std::span<const Vote> votes() const { return votes_; }
  std::span<const Vote> task_votes(std::size_t task) const {
    return std::span<const Vote>(votes_).subspan(
        offsets_[task], offsets_[task + 1] - offsets_[task]);
  }

  friend bool operator==(const LabelMatrix&, const LabelMatrix&) = default;

 private:
  std::size_t num_tasks_ = 0;
  std::size_t num_annotators_ = 0;
  std::vector<Vote> votes_;
  std::vector<std::size_t> offsets_{0};
};

/// Per-task sensitive attribute and optional ground truth.
class GroupAssignment {
 public:
  GroupAssignment() = default;
  explicit GroupAssignment(std::vector<Label> group,
                           std::optional<std::vector<Label>> truth = std::nullopt);

  std::size_t size() const { return group_.size(); }
  Label group(std::size_t task) const { return group_[task]; }
  std::span<const Label> groups() const { return group_; }

  bool has_truth() const { return truth_.has_value(); }
  Label truth(std::size_t task) const { return (*truth_)[task]; }
  std::span<const Label> truths() const;

  /// Number of tasks with A = a.
  std::size_t count(Label a) const { return counts_[a]; }

  /// Throws unless both groups have at least one task.
  void require_both_groups(const char* context) const;
  /// Throws unless ground truth is present.
  void require_truth(const char* context) const;

  friend bool operator==(const GroupAssignment&, const GroupAssignment&) = default;

 private:
  std::vector<Label> group_;
  std::optional<std::vector<Label>> truth_;
  std::array<std::size_t, 2> counts_{0, 0};
};

/// Per-annotator, per-group one-coin skill p_r(a).
struct SkillProfile {
  std::vector<std::array<double, 2>> skills;
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

struct SyntheticConfig {
  std::size_t num_tasks = 1000;
  std::size_t pool_size = 100;
  std::size_t votes_per_task = 5;
  double p_group1 = 0.5;
  std::array<double, 2> p_positive_given_group{0.5, 0.5};
  std::array<Interval, 2> skill_law{Interval{0.5, 1.0}, Interval{0.6, 1.0}};
  std::uint64_t seed = 0;

  void validate() const;
};

/// A crowd dataset with the external string ids kept for export.
struct Dataset {
  LabelMatrix votes;
  GroupAssignment groups;
  std::vector<std::string> task_ids;
  std::vector<std::string> annotator_ids;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Reads `task_id,annotator_id,label`, `task_id,a` and optionally
/// `task_id,y` files. Ids are re-indexed densely in order of first appearance
/// in the votes file. Rows of the groups/truth files for tasks that never
/// appear in the votes file are ignored.
Dataset load_csv(const std::filesystem::path& votes_path,
                 const std::filesystem::path& groups_path,
                 const std::optional<std::filesystem::path>& truth_path = std::nullopt);

/// Reads group (and optionally truth) files for a known list of task ids, e.g.
/// the ids of a posterior table. Every listed task must be present.
GroupAssignment load_groups(std::span<const std::string> task_ids,
                            const std::filesystem::path& groups_path,
                            const std::optional<std::filesystem::path>& truth_path = std::nullopt);

/// Writes the three files read by `load_csv`. The truth file is only written
/// when the dataset carries ground truth.
void save_csv(const Dataset& data, const std::filesystem::path& votes_path,
              const std::filesystem::path& groups_path,
              const std::optional<std::filesystem::path>& truth_path = std::nullopt);

struct SyntheticCrowd {
  Dataset data;
  SkillProfile skills;
};

/// Samples a synthetic crowd: skills come from substream 0, task t from
/// substream t + 1, so a fixed seed reproduces the output bit for bit.
SyntheticCrowd generate_synthetic(const SyntheticConfig& cfg);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Uniform random split of [0, num_tasks) with round(test_fraction * n)
/// test tasks. Both index lists are sorted.
Split train_test_split(std::size_t num_tasks, double test_fraction, std::uint64_t seed);

}  // namespace crowdfair

#endif  // CROWDFAIR_DATASET_H_
