#include "crowdfair/experiments.h"

#include <algorithm>
#include <bit>
#include <cmath>

#include "crowdfair/baseline.h"
#include "crowdfair/csv.h"
#include "crowdfair/error.h"
#include "crowdfair/metrics.h"
#include "crowdfair/rng.h"
#include "crowdfair/theory.h"

namespace crowdfair {

namespace {

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

// Sample standard deviation (n - 1), 0 for a single value.
MeanSd mean_sd(const std::vector<double>& v) {
  MeanSd out;
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= double(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / double(v.size() - 1));
  }
  return out;
}

PosteriorTable aggregate(PosteriorSource method, const Dataset& data,
                         std::span<const std::size_t> fit_tasks, double smoothing,
                         const DawidSkeneOptions& ds) {
  switch (method) {
    case PosteriorSource::kMajorityVote:
      return majority_vote(data.votes);
    case PosteriorSource::kBayes:
      return bayes_posterior(data.votes, data.groups,
                             estimate_confusion(data.votes, data.groups, smoothing, fit_tasks));
    case PosteriorSource::kDawidSkene:
      return dawid_skene(data.votes, data.groups, ds).posterior;
    case PosteriorSource::kExternal:
      break;
  }
  throw Error("aggregate: unsupported method");
}

}  // namespace

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::kCompetent: return "competent";
    case Scenario::kAdversarial: return "adversarial";
    case Scenario::kUninformative: return "uninformative";
  }
  return "competent";
}

Scenario parse_scenario(std::string_view name) {
  if (name == "competent") return Scenario::kCompetent;
  if (name == "adversarial") return Scenario::kAdversarial;
  if (name == "uninformative") return Scenario::kUninformative;
  throw Error("unknown scenario '" + std::string(name) + "'");
}

std::array<Interval, 2> scenario_skill_law(Scenario s) {
  switch (s) {
    case Scenario::kCompetent: return {Interval{0.5, 1.0}, Interval{0.6, 1.0}};
    case Scenario::kAdversarial: return {Interval{0.2, 0.6}, Interval{0.1, 0.6}};
    case Scenario::kUninformative: return {Interval{0.49, 0.51}, Interval{0.49, 0.51}};
  }
  return {};
}

std::vector<ConvergenceRow> run_convergence(const ConvergenceConfig& cfg) {
  if (cfg.reps == 0 || cfg.num_tasks == 0) throw Error("convergence: need reps > 0 and tasks > 0");
  constexpr std::array<PosteriorSource, 3> kMethods{
      PosteriorSource::kMajorityVote, PosteriorSource::kBayes, PosteriorSource::kDawidSkene};
  std::vector<ConvergenceRow> rows;
  for (Scenario scenario : cfg.scenarios) {
    for (std::size_t R : cfg.crowd_sizes) {
      if (R == 0) throw Error("convergence: crowd size must be positive");
      std::array<std::vector<double>, 3> diffs;
      for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
        SyntheticConfig sc;
        sc.num_tasks = cfg.num_tasks;
        sc.pool_size = R;
        sc.votes_per_task = R;
        sc.skill_law = scenario_skill_law(scenario);
        sc.seed = derive_seed(cfg.seed, std::uint64_t(scenario) << 32 | R, rep);
        const SyntheticCrowd crowd = generate_synthetic(sc);
        const auto& g = crowd.data.groups;
        const double truth_gap = dp_gap(g.truths(), g).dp_gap;
        for (std::size_t k = 0; k < kMethods.size(); ++k) {
          const auto labels = harden(aggregate(kMethods[k], crowd.data, {}, 1.0, {}));
          diffs[k].push_back(dp_gap(std::span<const Label>(labels), g).dp_gap - truth_gap);
        }
      }
      for (std::size_t k = 0; k < kMethods.size(); ++k) {
        const MeanSd s = mean_sd(diffs[k]);
        rows.push_back(ConvergenceRow{scenario, R, kMethods[k], s.mean, s.sd});
      }
    }
  }
  return rows;
}

void write_convergence(const std::filesystem::path& path, const std::vector<ConvergenceRow>& rows) {
  auto out = csv::open_output(path);
  out << "scenario,R,method,mean_diff,sd_diff\n";
  for (const auto& r : rows) {
    out << to_string(r.scenario) << ',' << r.R << ',' << to_string(r.method) << ','
        << csv::format_double(r.mean_diff) << ',' << csv::format_double(r.sd_diff) << '\n';
  }
}

std::string_view to_string(Fairifier f) {
  return f == Fairifier::kFairCrowd ? "fc" : "post_td";
}

Fairifier parse_fairifier(std::string_view name) {
  if (name == "fc") return Fairifier::kFairCrowd;
  if (name == "post_td" || name == "post-td") return Fairifier::kPostTd;
  throw Error("unknown fairifier '" + std::string(name) + "'");
}

TradeoffResult run_tradeoff(const Dataset& data, const TradeoffConfig& cfg) {
  const auto& g = data.groups;
  g.require_truth("tradeoff");
  g.require_both_groups("tradeoff");
  if (cfg.resamples == 0) throw Error("tradeoff: need at least one resample");

  TradeoffResult result;
  // Posteriors that do not depend on the split are computed once.
  std::vector<std::pair<PosteriorSource, PosteriorTable>> fixed;
  for (PosteriorSource m : cfg.methods) {
    if (m != PosteriorSource::kBayes) {
      fixed.emplace_back(m, aggregate(m, data, {}, cfg.smoothing, cfg.dawid_skene));
    }
  }

  for (std::size_t rep = 0; rep < cfg.resamples; ++rep) {
    const Split split =
        train_test_split(g.size(), cfg.test_fraction, derive_seed(cfg.seed, 0x5b117, rep));
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      const PosteriorSource method = cfg.methods[mi];
      PosteriorTable posterior;
      if (method == PosteriorSource::kBayes) {
        posterior = aggregate(method, data, split.train, cfg.smoothing, cfg.dawid_skene);
      } else {
        posterior = std::find_if(fixed.begin(), fixed.end(),
                                 [&](const auto& f) { return f.first == method; })->second;
      }
      const auto hard = harden(posterior);
      for (std::size_t ei = 0; ei < cfg.epsilons.size(); ++ei) {
        const double eps = cfg.epsilons[ei];
        const std::uint64_t run_seed = derive_seed(cfg.seed, rep, mi << 16 | ei);
        for (Fairifier fairifier : cfg.fairifiers) {
          std::vector<double> q;
          std::vector<Label> labels;
          if (fairifier == Fairifier::kFairCrowd) {
            FairCrowdConfig fc = cfg.faircrowd;
            fc.epsilon = eps;
            const FairifyResult fr = fairify(posterior, g, fc);
            Prediction pred = apply(fr.classifier, fr.preprocessed, g, run_seed);
            q = std::move(pred.q);
            labels = std::move(pred.labels);
          } else {
            labels = post_td(hard, g, eps, run_seed);
            q.assign(labels.begin(), labels.end());
          }
          const FairnessReport rep_metrics = evaluate(q, labels, g, split.test);
          result.rows.push_back(TradeoffRow{method, fairifier, eps, rep, rep_metrics.dp_gap,
                                            *rep_metrics.f1, *rep_metrics.accuracy});
        }
      }
    }
  }

  for (PosteriorSource method : cfg.methods) {
    for (Fairifier fairifier : cfg.fairifiers) {
      for (double eps : cfg.epsilons) {
        std::vector<double> dp, f1, acc;
        for (const auto& r : result.rows) {
          if (r.method == method && r.fairifier == fairifier && r.epsilon == eps) {
            dp.push_back(r.dp_gap);
            f1.push_back(r.f1);
            acc.push_back(r.accuracy);
          }
        }
        const MeanSd d = mean_sd(dp), f = mean_sd(f1), a = mean_sd(acc);
        result.summary.push_back(TradeoffSummaryRow{method, fairifier, eps, d.mean, d.sd, f.mean,
                                                    f.sd, a.mean, a.sd, dp.size()});
      }
    }
  }
  return result;
}

void write_tradeoff_summary(const std::filesystem::path& path,
                            const std::vector<TradeoffSummaryRow>& rows) {
  auto out = csv::open_output(path);
  out << "method,fairifier,epsilon,dp_mean,dp_sd,f1_mean,f1_sd,accuracy_mean,accuracy_sd,"
         "resamples\n";
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << to_string(r.fairifier) << ','
        << csv::format_double(r.epsilon) << ',' << csv::format_double(r.dp_mean) << ','
        << csv::format_double(r.dp_sd) << ',' << csv::format_double(r.f1_mean) << ','
        << csv::format_double(r.f1_sd) << ',' << csv::format_double(r.accuracy_mean) << ','
        << csv::format_double(r.accuracy_sd) << ',' << r.resamples << '\n';
  }
}

void write_tradeoff_rows(const std::filesystem::path& path, const std::vector<TradeoffRow>& rows) {
  auto out = csv::open_output(path);
  out << "method,fairifier,epsilon,resample,dp_gap,f1,accuracy\n";
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << to_string(r.fairifier) << ','
        << csv::format_double(r.epsilon) << ',' << r.resample << ','
        << csv::format_double(r.dp_gap) << ',' << csv::format_double(r.f1) << ','
        << csv::format_double(r.accuracy) << '\n';
  }
}

SyntheticConfig tradeoff_synthetic_config(std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.num_tasks = 2000;
  cfg.pool_size = 100;
  cfg.votes_per_task = 5;
  cfg.p_group1 = 0.6;
  cfg.p_positive_given_group = {0.4, 0.6};
  cfg.skill_law = {Interval{0.5, 1.0}, Interval{0.6, 1.0}};
  cfg.seed = seed;
  return cfg;
}

std::array<double, 2> feature_shift_rates() {
  // Group 1: three tasks with X=1, one with X=0. Group 0: the reverse.
  const std::vector<Label> group{1, 1, 1, 1, 0, 0, 0, 0};
  const std::vector<double> prob{0.8, 0.8, 0.8, 0.2, 0.8, 0.2, 0.2, 0.2};
  return dp_gap(prob, GroupAssignment(group)).rate;
}

namespace {

// Exhaustive 2^R distribution of the number of successes.
std::vector<double> enumerate_pmf(const std::vector<double>& l) {
  const std::size_t R = l.size();
  std::vector<double> pmf(R + 1, 0.0);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << R); ++mask) {
    double p = 1.0;
    for (std::size_t i = 0; i < R; ++i) p *= (mask >> i & 1) ? l[i] : 1.0 - l[i];
    pmf[std::size_t(std::popcount(mask))] += p;
  }
  return pmf;
}

std::vector<double> random_probs(Rng& rng, std::size_t n, double lo = 0.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

std::vector<TheoryCheck> run_verify_theory(std::uint64_t seed) {
  std::vector<TheoryCheck> rows;

  const double eta = baillon_eta();
  rows.push_back({"baillon_eta", eta, 0.4688, std::abs(eta - 0.4688) <= 1e-4});

  const auto rates = feature_shift_rates();
  const double gap = std::abs(rates[1] - rates[0]);
  rows.push_back({"feature_shift_dp_gap", gap, 0.3, std::abs(gap - 0.3) <= 1e-12});

  {
    Rng rng(seed, 1);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      const auto l = random_probs(rng, 1 + rng.below(12));
      const auto dp = poisson_binomial_pmf(l);
      const auto ex = enumerate_pmf(l);
      for (std::size_t k = 0; k < dp.size(); ++k) worst = std::max(worst, std::abs(dp[k] - ex[k]));
    }
    rows.push_back({"poisson_binomial_vs_enumeration", worst, 1e-12, worst <= 1e-12});
  }
  {
    Rng rng(seed, 2);
    double worst = 0.0;
    const double h = 1e-6;
    for (int i = 0; i < 100; ++i) {
      auto l = random_probs(rng, 1 + rng.below(15), 0.01, 0.99);
      const std::size_t r = rng.below(l.size());
      const double base = l[r];
      l[r] = base + h;
      const double up = mv_strict_tail(l);
      l[r] = base - h;
      const double down = mv_strict_tail(l);
      l[r] = base;
      worst = std::max(worst, std::abs((up - down) / (2 * h) - mv_tail_derivative(l, r)));
    }
    rows.push_back({"mv_tail_derivative_vs_finite_difference", worst, 1e-6, worst <= 1e-6});
  }
  {
    Rng rng(seed, 3);
    std::size_t violations = 0;
    double worst_ratio = 0.0;
    for (int i = 0; i < 500; ++i) {
      const std::size_t R = 3 + rng.below(13);
      const auto l0 = random_probs(rng, R), l1 = random_probs(rng, R);
      const SmallCrowdBound b = small_crowd_bound(l0, l1);
      violations += !b.holds;
      if (b.bound > 0 && b.bound != kInfinity) worst_ratio = std::max(worst_ratio, b.observed_gap / b.bound);
    }
    rows.push_back({"small_crowd_bound_ratio", worst_ratio, 1.0, violations == 0});
  }
  {
    Rng rng(seed, 4);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const auto l = random_probs(rng, 1 + rng.below(30));
      const auto pmf = poisson_binomial_pmf(l);
      double var = 0.0;
      for (double x : l) var += x * (1.0 - x);
      worst = std::max(worst, *std::max_element(pmf.begin(), pmf.end()) * std::sqrt(var) / eta);
    }
    rows.push_back({"baillon_uniform_bound_ratio", worst, 1.0, worst <= 1.0 + 1e-12});
  }
  {
    Rng rng(seed, 5);
    double worst = -kInfinity;
    for (int i = 0; i < 1000; ++i) {
      const auto p = random_probs(rng, 1 + rng.below(20), 0.001, 0.999);
      worst = std::max(worst, mv_exponent(p) - bayes_exponent(p));
    }
    rows.push_back({"mv_exponent_minus_bayes_exponent", worst, 1e-9, worst <= 1e-9});
    double homogeneous = 0.0;
    for (int i = 0; i < 100; ++i) {
      const std::vector<double> p(1 + rng.below(20), rng.uniform(0.5, 0.999));
      homogeneous = std::max(homogeneous, std::abs(mv_exponent(p) - bayes_exponent(p)));
    }
    rows.push_back({"homogeneous_exponent_gap", homogeneous, 1e-8, homogeneous <= 1e-8});
  }

  rows.push_back({"divergence_condition_competent_majority",
                  divergence_condition_value(95, 0, 100, 0.1, 0.0), 1.0,
                  divergence_condition_check(95, 0, 100, 0.1, 0.1, 0.0)});
  rows.push_back({"divergence_condition_half_experts_fails",
                  divergence_condition_value(50, 0, 100, 0.1, 0.0), 1.0,
                  !divergence_condition_check(50, 0, 100, 0.1, 0.1, 0.0)});

  for (Scenario s : {Scenario::kCompetent, Scenario::kAdversarial, Scenario::kUninformative}) {
    BoundScenario scenario;
    scenario.skill_law = scenario_skill_law(s);
    for (std::size_t R : {3, 10, 40}) {
      for (Aggregator agg : {Aggregator::kMajorityVote, Aggregator::kBayes}) {
        const BoundReport b = dp_bound_check(
            scenario, R, agg, 10000, derive_seed(seed, std::uint64_t(s) << 8 | R, std::uint64_t(agg)));
        rows.push_back({std::string("dp_bound_") + std::string(to_string(s)) + "_" +
                            (agg == Aggregator::kMajorityVote ? "mv" : "bayes") + "_R" +
                            std::to_string(R),
                        b.lhs, b.rhs + 3.0 * b.sigma, b.holds});
      }
    }
  }
  return rows;
}

void write_theory_checks(const std::filesystem::path& path, const std::vector<TheoryCheck>& rows) {
  auto out = csv::open_output(path);
  out << "check_name,lhs,rhs,holds\n";
  for (const auto& r : rows) {
    out << r.name << ',' << csv::format_double(r.lhs) << ',' << csv::format_double(r.rhs) << ','
        << (r.holds ? "true" : "false") << '\n';
  }
}

}  // namespace crowdfair
