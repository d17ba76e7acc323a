#include "crowdfair/aggregate.h"

#include <algorithm>
#include <cmath>

#include "crowdfair/csv.h"
#include "crowdfair/error.h"

namespace crowdfair {

std::string_view to_string(PosteriorSource source) {
  switch (source) {
    case PosteriorSource::kMajorityVote: return "mv";
    case PosteriorSource::kBayes: return "bayes";
    case PosteriorSource::kDawidSkene: return "ds";
    case PosteriorSource::kExternal: return "external";
  }
  return "external";
}

PosteriorSource parse_posterior_source(std::string_view name) {
  if (name == "mv") return PosteriorSource::kMajorityVote;
  if (name == "bayes") return PosteriorSource::kBayes;
  if (name == "ds") return PosteriorSource::kDawidSkene;
  if (name == "external") return PosteriorSource::kExternal;
  throw Error("unknown posterior source '" + std::string(name) + "'");
}

ConfusionModel ConfusionModel::from_skills(std::span<const std::array<double, 2>> skills,
                                           std::array<double, 2> prior) {
  ConfusionModel cm;
  cm.one_coin = true;
  cm.prior = prior;
  cm.pi.resize(skills.size());
  for (std::size_t r = 0; r < skills.size(); ++r) {
    for (int a = 0; a < 2; ++a) {
      const double p = skills[r][a];
      cm.pi[r][a][1][1] = p;
      cm.pi[r][a][0][0] = p;
      cm.pi[r][a][1][0] = 1.0 - p;
      cm.pi[r][a][0][1] = 1.0 - p;
    }
  }
  return cm;
}

PosteriorTable majority_vote(const LabelMatrix& m) {
  PosteriorTable out;
  out.source = PosteriorSource::kMajorityVote;
  out.phi1.resize(m.num_tasks());
  for (std::size_t t = 0; t < m.num_tasks(); ++t) {
    const auto votes = m.task_votes(t);
    std::size_t ones = 0;
    for (const Vote& v : votes) ones += v.label;
    out.phi1[t] = double(ones) / double(votes.size());
  }
  return out;
}

ConfusionModel estimate_confusion(const LabelMatrix& m, const GroupAssignment& g,
                                  double smoothing, std::span<const std::size_t> tasks) {
  g.require_truth("estimate_confusion");
  if (g.size() != m.num_tasks()) throw Error("estimate_confusion: group/vote size mismatch");
  if (!(smoothing >= 0.0)) throw Error("estimate_confusion: smoothing must be non-negative");

  std::vector<std::size_t> all;
  if (tasks.empty()) {
    all.resize(m.num_tasks());
    for (std::size_t t = 0; t < all.size(); ++t) all[t] = t;
    tasks = all;
  }

  // count[r][a][k][y]
  std::vector<std::array<std::array<std::array<double, 2>, 2>, 2>> count(m.num_annotators());
  std::array<double, 2> n_group{0, 0}, n_pos{0, 0};
  for (std::size_t t : tasks) {
    const Label a = g.group(t), y = g.truth(t);
    n_group[a] += 1;
    n_pos[a] += y;
    for (const Vote& v : m.task_votes(t)) count[v.annotator][a][v.label][y] += 1;
  }
  if (n_group[0] == 0 || n_group[1] == 0) {
    throw Error("estimate_confusion: both groups must be non-empty");
  }

  ConfusionModel cm;
  cm.pi.resize(m.num_annotators());
  for (int a = 0; a < 2; ++a) cm.prior[a] = n_pos[a] / n_group[a];
  for (std::size_t r = 0; r < m.num_annotators(); ++r) {
    for (int a = 0; a < 2; ++a) {
      for (int y = 0; y < 2; ++y) {
        const double n = count[r][a][0][y] + count[r][a][1][y];
        const double denom = n + 2.0 * smoothing;
        if (denom == 0.0) {
          throw Error("estimate_confusion: annotator " + std::to_string(r) +
                      " has no votes with y=" + std::to_string(y) + ", a=" + std::to_string(a) +
                      " and smoothing is 0");
        }
        cm.pi[r][a][1][y] = (count[r][a][1][y] + smoothing) / denom;
        cm.pi[r][a][0][y] = 1.0 - cm.pi[r][a][1][y];
      }
    }
  }
  return cm;
}

namespace {

struct LogRatios {
  // Log-odds contribution of a 1-vote and of a 0-vote, per annotator and group.
  std::vector<std::array<std::array<double, 2>, 2>> vote;  // [r][a][label]
  std::array<double, 2> prior;
};

void check_model(const LabelMatrix& m, const GroupAssignment& g, const ConfusionModel& cm,
                 const char* context) {
  if (g.size() != m.num_tasks()) throw Error(std::string(context) + ": group/vote size mismatch");
  if (cm.num_annotators() < m.num_annotators()) {
    throw Error(std::string(context) + ": confusion model covers too few annotators");
  }
  for (int a = 0; a < 2; ++a) {
    if (!(cm.prior[a] > 0.0 && cm.prior[a] < 1.0)) {
      throw Error(std::string(context) + ": prior for group " + std::to_string(a) +
                  " must lie strictly inside (0, 1)");
    }
  }
}

LogRatios log_ratios(const ConfusionModel& cm, std::size_t num_annotators) {
  LogRatios out;
  out.vote.resize(num_annotators);
  for (std::size_t r = 0; r < num_annotators; ++r) {
    for (int a = 0; a < 2; ++a) {
      const auto& pi = cm.pi[r][a];
      for (int k = 0; k < 2; ++k) {
        for (int y = 0; y < 2; ++y) {
          if (!(pi[k][y] > 0.0 && pi[k][y] < 1.0)) {
            throw Error("bayes_posterior: confusion entries must lie strictly inside (0, 1)");
          }
        }
        out.vote[r][a][k] = std::log(pi[k][1]) - std::log(pi[k][0]);
      }
    }
  }
  for (int a = 0; a < 2; ++a) out.prior[a] = std::log(cm.prior[a]) - std::log1p(-cm.prior[a]);
  return out;
}

double logistic(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

PosteriorTable bayes_posterior(const LabelMatrix& m, const GroupAssignment& g,
                               const ConfusionModel& cm) {
  check_model(m, g, cm, "bayes_posterior");
  const LogRatios lr = log_ratios(cm, m.num_annotators());
  PosteriorTable out;
  out.source = PosteriorSource::kBayes;
  out.phi1.resize(m.num_tasks());
  for (std::size_t t = 0; t < m.num_tasks(); ++t) {
    const Label a = g.group(t);
    double logit = lr.prior[a];
    for (const Vote& v : m.task_votes(t)) logit += lr.vote[v.annotator][a][v.label];
    out.phi1[t] = logistic(logit);
  }
  return out;
}

double log_likelihood(const LabelMatrix& m, const GroupAssignment& g, const ConfusionModel& cm) {
  check_model(m, g, cm, "log_likelihood");
  double total = 0.0;
  for (std::size_t t = 0; t < m.num_tasks(); ++t) {
    const Label a = g.group(t);
    double l1 = std::log(cm.prior[a]);
    double l0 = std::log1p(-cm.prior[a]);
    for (const Vote& v : m.task_votes(t)) {
      l1 += std::log(cm.pi[v.annotator][a][v.label][1]);
      l0 += std::log(cm.pi[v.annotator][a][v.label][0]);
    }
    const double hi = std::max(l0, l1);
    total += hi + std::log(std::exp(l0 - hi) + std::exp(l1 - hi));
  }
  return total;
}

DawidSkeneResult dawid_skene(const LabelMatrix& m, const GroupAssignment& g,
                             const DawidSkeneOptions& options) {
  g.require_both_groups("dawid_skene");
  if (g.size() != m.num_tasks()) throw Error("dawid_skene: group/vote size mismatch");
  const double kappa = options.clamp;
  if (!(kappa > 0.0 && kappa < 0.5)) throw Error("dawid_skene: clamp must lie in (0, 1/2)");
  auto clamp = [kappa](double x) { return std::clamp(x, kappa, 1.0 - kappa); };

  std::vector<std::array<double, 2>> skills(m.num_annotators(),
                                            {clamp(options.init_skill), clamp(options.init_skill)});
  std::array<double, 2> prior{clamp(options.init_prior), clamp(options.init_prior)};

  DawidSkeneResult result;
  result.model = ConfusionModel::from_skills(skills, prior);
  result.log_likelihood.push_back(log_likelihood(m, g, result.model));
  result.posterior = bayes_posterior(m, g, result.model);

  std::vector<std::array<double, 2>> hit(m.num_annotators()), seen(m.num_annotators());
  for (std::size_t it = 0; it < options.iterations; ++it) {
    for (auto& h : hit) h = {0.0, 0.0};
    for (auto& s : seen) s = {0.0, 0.0};
    std::array<double, 2> q_sum{0.0, 0.0};
    for (std::size_t t = 0; t < m.num_tasks(); ++t) {
      const Label a = g.group(t);
      const double q = result.posterior.phi1[t];
      q_sum[a] += q;
      for (const Vote& v : m.task_votes(t)) {
        hit[v.annotator][a] += v.label ? q : 1.0 - q;
        seen[v.annotator][a] += 1.0;
      }
    }
    for (std::size_t r = 0; r < skills.size(); ++r) {
      for (int a = 0; a < 2; ++a) {
        if (seen[r][a] > 0) skills[r][a] = clamp(hit[r][a] / seen[r][a]);
      }
    }
    if (options.update_prior) {
      for (int a = 0; a < 2; ++a) prior[a] = clamp(q_sum[a] / double(g.count(a)));
    }
    result.model = ConfusionModel::from_skills(skills, prior);
    result.log_likelihood.push_back(log_likelihood(m, g, result.model));
    result.posterior = bayes_posterior(m, g, result.model);
  }
  result.posterior.source = PosteriorSource::kDawidSkene;
  return result;
}

std::vector<Label> harden(const PosteriorTable& p) {
  std::vector<Label> out(p.size());
  for (std::size_t t = 0; t < p.size(); ++t) out[t] = p.phi1[t] >= 0.5 ? 1 : 0;
  return out;
}

void write_posteriors(const std::filesystem::path& path, const PosteriorTable& p,
                      std::span<const std::string> task_ids) {
  if (task_ids.size() != p.size()) throw Error("write_posteriors: task id count mismatch");
  auto out = csv::open_output(path);
  out << "task_id,phi1,label,source\n";
  const std::string_view source = to_string(p.source);
  for (std::size_t t = 0; t < p.size(); ++t) {
    out << task_ids[t] << ',' << csv::format_double(p.phi1[t]) << ','
        << (p.phi1[t] >= 0.5 ? 1 : 0) << ',' << source << '\n';
  }
}

PosteriorFile read_posteriors(const std::filesystem::path& path) {
  csv::Reader reader(path, {"task_id", "phi1", "label", "source"});
  PosteriorFile file;
  std::vector<std::string> row;
  bool first = true;
  while (reader.next(row)) {
    const double phi = csv::parse_double(row[1], reader, "phi1");
    if (phi < 0.0 || phi > 1.0) throw Error(reader.where("phi1 outside [0, 1]"));
    const PosteriorSource source = parse_posterior_source(row[3]);
    if (first) {
      file.table.source = source;
      first = false;
    }
    file.task_ids.push_back(row[0]);
    file.table.phi1.push_back(phi);
  }
  return file;
}

}  // namespace crowdfair
