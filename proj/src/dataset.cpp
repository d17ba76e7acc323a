#include "crowdfair/dataset.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "crowdfair/csv.h"
#include "crowdfair/error.h"
#include "crowdfair/rng.h"

namespace crowdfair {

LabelMatrix::LabelMatrix(std::size_t num_tasks, std::size_t num_annotators,
                         std::vector<Vote> votes)
    : num_tasks_(num_tasks), num_annotators_(num_annotators) {
  std::vector<std::size_t> per_task(num_tasks, 0);
  for (const Vote& v : votes) {
    if (v.task >= num_tasks || v.annotator >= num_annotators) {
      throw Error("vote (" + std::to_string(v.task) + ", " + std::to_string(v.annotator) +
                  ") out of range");
    }
    if (v.label > 1) throw Error("vote label must be 0 or 1");
    ++per_task[v.task];
  }
  offsets_.assign(num_tasks + 1, 0);
  for (std::size_t t = 0; t < num_tasks; ++t) {
    if (per_task[t] == 0) throw Error("task " + std::to_string(t) + " has no votes");
    offsets_[t + 1] = offsets_[t] + per_task[t];
  }
  votes_.resize(votes.size());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const Vote& v : votes) votes_[cursor[v.task]++] = v;

  for (std::size_t t = 0; t < num_tasks; ++t) {
    std::vector<std::size_t> seen;
    for (const Vote& v : task_votes(t)) seen.push_back(v.annotator);
    std::sort(seen.begin(), seen.end());
    const auto dup = std::adjacent_find(seen.begin(), seen.end());
    if (dup != seen.end()) {
      throw Error("duplicate vote for task " + std::to_string(t) + ", annotator " +
                  std::to_string(*dup));
    }
  }
}

GroupAssignment::GroupAssignment(std::vector<Label> group,
                                 std::optional<std::vector<Label>> truth)
    : group_(std::move(group)), truth_(std::move(truth)) {
  for (Label a : group_) {
    if (a > 1) throw Error("group value must be 0 or 1");
    ++counts_[a];
  }
  if (truth_) {
    if (truth_->size() != group_.size()) throw Error("truth length differs from group length");
    for (Label y : *truth_) {
      if (y > 1) throw Error("truth value must be 0 or 1");
    }
  }
}

std::span<const Label> GroupAssignment::truths() const {
  if (!truth_) return {};
  return *truth_;
}

void GroupAssignment::require_both_groups(const char* context) const {
  if (counts_[0] == 0 || counts_[1] == 0) {
    throw Error(std::string(context) + ": both groups must be non-empty");
  }
}

void GroupAssignment::require_truth(const char* context) const {
  if (!truth_) throw Error(std::string(context) + ": ground truth required");
}

void SyntheticConfig::validate() const {
  auto is_prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!is_prob(p_group1) || !is_prob(p_positive_given_group[0]) ||
      !is_prob(p_positive_given_group[1])) {
    throw Error("synthetic config: probabilities must lie in [0, 1]");
  }
  for (const Interval& law : skill_law) {
    if (!is_prob(law.lo) || !is_prob(law.hi) || law.lo > law.hi) {
      throw Error("synthetic config: skill interval must satisfy 0 <= lo <= hi <= 1");
    }
  }
  if (pool_size == 0) throw Error("synthetic config: empty annotator pool");
  if (votes_per_task < 1 || votes_per_task > pool_size) {
    throw Error("synthetic config: need 1 <= votes_per_task <= pool_size");
  }
}

namespace {

class IdIndex {
 public:
  std::size_t intern(const std::string& id) {
    auto [it, inserted] = index_.try_emplace(id, ids_.size());
    if (inserted) ids_.push_back(id);
    return it->second;
  }
  const std::size_t* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &it->second;
  }
  std::vector<std::string> release() { return std::move(ids_); }
  std::size_t size() const { return ids_.size(); }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> ids_;
};

// Reads a `task_id,<column>` file into a per-task vector aligned with `tasks`.
std::vector<Label> read_task_column(const std::filesystem::path& path, const char* column,
                                    const IdIndex& tasks) {
  csv::Reader reader(path, {"task_id", column});
  std::vector<int> values(tasks.size(), -1);
  std::vector<std::string> row;
  while (reader.next(row)) {
    const int value = csv::parse_binary(row[1], reader, column);
    const std::size_t* t = tasks.find(row[0]);
    if (t == nullptr) continue;
    if (values[*t] != -1) throw Error(reader.where("duplicate task_id '" + row[0] + "'"));
    values[*t] = value;
  }
  std::vector<Label> out(values.size());
  for (std::size_t t = 0; t < values.size(); ++t) {
    if (values[t] == -1) {
      // Reverse lookup is only needed on the error path.
      throw Error(path.string() + ": no '" + column + "' value for a task that has votes");
    }
    out[t] = static_cast<Label>(values[t]);
  }
  return out;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& votes_path,
                 const std::filesystem::path& groups_path,
                 const std::optional<std::filesystem::path>& truth_path) {
  IdIndex tasks, annotators;
  std::vector<Vote> votes;
  {
    csv::Reader reader(votes_path, {"task_id", "annotator_id", "label"});
    std::unordered_map<std::string, std::size_t> seen;  // "task\x1fannotator" -> line
    std::vector<std::string> row;
    while (reader.next(row)) {
      const int label = csv::parse_binary(row[2], reader, "label");
      auto [it, inserted] = seen.try_emplace(row[0] + '\x1f' + row[1], reader.line());
      if (!inserted) {
        throw Error(reader.where("duplicate vote for task '" + row[0] + "' by annotator '" +
                                 row[1] + "' (first seen on line " +
                                 std::to_string(it->second) + ")"));
      }
      votes.push_back(Vote{tasks.intern(row[0]), annotators.intern(row[1]),
                           static_cast<Label>(label)});
    }
  }

  std::vector<Label> group;
  try {
    group = read_task_column(groups_path, "a", tasks);
  } catch (const Error& e) {
    throw Error(std::string(e.what()) + " (every task in the votes file needs a group)");
  }
  std::optional<std::vector<Label>> truth;
  if (truth_path) truth = read_task_column(*truth_path, "y", tasks);

  Dataset data;
  data.votes = LabelMatrix(tasks.size(), annotators.size(), std::move(votes));
  data.groups = GroupAssignment(std::move(group), std::move(truth));
  data.task_ids = tasks.release();
  data.annotator_ids = annotators.release();
  return data;
}

GroupAssignment load_groups(std::span<const std::string> task_ids,
                            const std::filesystem::path& groups_path,
                            const std::optional<std::filesystem::path>& truth_path) {
  IdIndex tasks;
  for (const std::string& id : task_ids) {
    if (tasks.intern(id) + 1 != tasks.size()) throw Error("duplicate task id '" + id + "'");
  }
  std::vector<Label> group = read_task_column(groups_path, "a", tasks);
  std::optional<std::vector<Label>> truth;
  if (truth_path) truth = read_task_column(*truth_path, "y", tasks);
  return GroupAssignment(std::move(group), std::move(truth));
}

void save_csv(const Dataset& data, const std::filesystem::path& votes_path,
              const std::filesystem::path& groups_path,
              const std::optional<std::filesystem::path>& truth_path) {
  // Task-major order: reloading reproduces the task indices. Annotator
  // indices round-trip only if annotator ids are in first-use order.
  {
    auto out = csv::open_output(votes_path);
    out << "task_id,annotator_id,label\n";
    for (const Vote& v : data.votes.votes()) {
      out << data.task_ids[v.task] << ',' << data.annotator_ids[v.annotator] << ','
          << int(v.label) << '\n';
    }
  }
  {
    auto out = csv::open_output(groups_path);
    out << "task_id,a\n";
    for (std::size_t t = 0; t < data.groups.size(); ++t) {
      out << data.task_ids[t] << ',' << int(data.groups.group(t)) << '\n';
    }
  }
  if (truth_path && data.groups.has_truth()) {
    auto out = csv::open_output(*truth_path);
    out << "task_id,y\n";
    for (std::size_t t = 0; t < data.groups.size(); ++t) {
      out << data.task_ids[t] << ',' << int(data.groups.truth(t)) << '\n';
    }
  }
}

SyntheticCrowd generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  const std::size_t pool = cfg.pool_size;

  SkillProfile profile;
  profile.skills.resize(pool);
  Rng skill_rng(cfg.seed, 0);
  for (auto& s : profile.skills) {
    s[0] = skill_rng.uniform(cfg.skill_law[0].lo, cfg.skill_law[0].hi);
    s[1] = skill_rng.uniform(cfg.skill_law[1].lo, cfg.skill_law[1].hi);
  }

  std::vector<Label> group(cfg.num_tasks), truth(cfg.num_tasks);
  std::vector<Vote> votes;
  votes.reserve(cfg.num_tasks * cfg.votes_per_task);
  std::vector<std::size_t> order(pool);
  for (std::size_t t = 0; t < cfg.num_tasks; ++t) {
    Rng rng(cfg.seed, t + 1);
    const Label a = rng.bernoulli(cfg.p_group1) ? 1 : 0;
    const Label y = rng.bernoulli(cfg.p_positive_given_group[a]) ? 1 : 0;
    group[t] = a;
    truth[t] = y;
    // Partial Fisher-Yates: the first votes_per_task slots are a uniform
    // sample without replacement.
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < cfg.votes_per_task; ++i) {
      const std::size_t j = i + rng.below(pool - i);
      std::swap(order[i], order[j]);
    }
    std::sort(order.begin(), order.begin() + cfg.votes_per_task);
    for (std::size_t i = 0; i < cfg.votes_per_task; ++i) {
      const std::size_t r = order[i];
      const bool correct = rng.bernoulli(profile.skills[r][a]);
      votes.push_back(Vote{t, r, static_cast<Label>(correct ? y : 1 - y)});
    }
  }

  SyntheticCrowd out;
  out.data.votes = LabelMatrix(cfg.num_tasks, pool, std::move(votes));
  out.data.groups = GroupAssignment(std::move(group), std::move(truth));
  out.data.task_ids.reserve(cfg.num_tasks);
  for (std::size_t t = 0; t < cfg.num_tasks; ++t) out.data.task_ids.push_back("t" + std::to_string(t));
  for (std::size_t r = 0; r < pool; ++r) out.data.annotator_ids.push_back("r" + std::to_string(r));
  out.skills = std::move(profile);
  return out;
}

Split train_test_split(std::size_t num_tasks, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error("train_test_split: test_fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> perm(num_tasks);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed, 0x5b117ULL);
  for (std::size_t i = num_tasks; i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.below(i)]);
  }
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * double(num_tasks)));
  Split split;
  split.test.assign(perm.begin(), perm.begin() + n_test);
  split.train.assign(perm.begin() + n_test, perm.end());
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

}  // namespace crowdfair
