// crowdfair: aggregate crowd labels, post-process them for demographic
// parity, and run the bundled experiments.
//
// Exit codes: 0 success, 1 data/runtime error or violated theory check,
// 2 usage error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crowdfair/aggregate.h"
#include "crowdfair/baseline.h"
#include "crowdfair/csv.h"
#include "crowdfair/dataset.h"
#include "crowdfair/error.h"
#include "crowdfair/experiments.h"
#include "crowdfair/faircrowd.h"
#include "crowdfair/metrics.h"

namespace {

using namespace crowdfair;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<std::filesystem::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

// `method,epsilon,dp_gap,f1,accuracy,seed`; empty cells for absent values.
void print_report(const std::string& method, std::optional<double> epsilon,
                  const FairnessReport& r, std::uint64_t seed) {
  auto cell = [](std::optional<double> v) { return v ? csv::format_double(*v) : std::string(); };
  std::cout << "method,epsilon,dp_gap,f1,accuracy,seed\n"
            << method << ',' << cell(epsilon) << ',' << csv::format_double(r.dp_gap) << ','
            << cell(r.f1) << ',' << cell(r.accuracy) << ',' << seed << '\n';
}

struct FairCrowdFlags {
  double softmax_c = 1e-4;
  double delta = 1e-5;
  double alpha = 0.04;
  double beta_bound = 2.0;
  std::size_t omega_grid = 101;
  std::string omega_solver = "exact";
  bool no_polish = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--softmax-c", softmax_c, "Softmax smoothing of the dual objective")
        ->capture_default_str();
    cmd->add_option("--delta", delta, "Half-width of the randomized threshold band")
        ->capture_default_str();
    cmd->add_option("--alpha", alpha, "Width of the remapped upper posterior tail")
        ->capture_default_str();
    cmd->add_option("--beta-bound", beta_bound, "Search half-width for beta")->capture_default_str();
    cmd->add_option("--omega-grid", omega_grid, "Lattice points per axis for --omega-solver grid")
        ->capture_default_str();
    cmd->add_option("--omega-solver", omega_solver, "exact or grid")
        ->check(CLI::IsMember({"exact", "grid"}))
        ->capture_default_str();
    cmd->add_flag("--no-polish", no_polish, "Keep the smoothed minimizer of the dual objective");
  }

  FairCrowdConfig config(double epsilon) const {
    FairCrowdConfig cfg;
    cfg.epsilon = epsilon;
    cfg.softmax_c = softmax_c;
    cfg.delta = delta;
    cfg.alpha = alpha;
    cfg.beta_bound = beta_bound;
    cfg.omega_grid = omega_grid;
    cfg.omega_solver = omega_solver == "grid" ? OmegaSolver::kGrid : OmegaSolver::kExact;
    cfg.exact_polish = !no_polish;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair aggregation of crowdsourced binary labels"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string out;

  // aggregate
  std::string votes, groups, truth, method = "mv";
  std::size_t iters = 20;
  double init_skill = 0.7, smoothing = 1.0;
  bool freeze_prior = false;
  auto* agg = app.add_subcommand("aggregate", "Estimate per-task posteriors from votes");
  agg->add_option("--votes", votes, "task_id,annotator_id,label")->required();
  agg->add_option("--groups", groups, "task_id,a")->required();
  agg->add_option("--truth", truth, "task_id,y");
  agg->add_option("--method", method, "mv, bayes or ds")
      ->check(CLI::IsMember({"mv", "bayes", "ds"}))
      ->capture_default_str();
  agg->add_option("--iters", iters, "EM rounds for ds")->capture_default_str();
  agg->add_option("--init-skill", init_skill, "Initial one-coin skill for ds")->capture_default_str();
  agg->add_flag("--freeze-prior", freeze_prior, "Keep the ds class prior at 1/2");
  agg->add_option("--smoothing", smoothing, "Pseudo-count for bayes confusion estimates")
      ->capture_default_str();
  agg->add_option("--seed", seed, "Unused; accepted for uniformity");
  agg->add_option("--out", out, "Posterior CSV")->required();

  // fairify / post-td
  std::string posteriors, classifier_out;
  double epsilon = 0.0;
  FairCrowdFlags fc_flags;
  auto* fair = app.add_subcommand("fairify", "Post-process posteriors into an epsilon-fair classifier");
  fair->add_option("--posteriors", posteriors, "task_id,phi1,label,source")->required();
  fair->add_option("--groups", groups, "task_id,a")->required();
  fair->add_option("--truth", truth, "task_id,y (only for the report)");
  fair->add_option("--epsilon", epsilon, "Demographic parity budget")
      ->required()
      ->check(CLI::NonNegativeNumber);
  fair->add_option("--classifier", classifier_out, "Write thresholds and weights here");
  fair->add_option("--seed", seed, "Seed for the sampled labels")->capture_default_str();
  fair->add_option("--out", out, "Prediction CSV task_id,q,label")->required();
  fc_flags.add_to(fair);

  auto* td = app.add_subcommand("post-td", "Label-flipping baseline on hardened posteriors");
  td->add_option("--posteriors", posteriors, "task_id,phi1,label,source")->required();
  td->add_option("--groups", groups, "task_id,a")->required();
  td->add_option("--truth", truth, "task_id,y (only for the report)");
  td->add_option("--epsilon", epsilon, "Demographic parity budget")
      ->required()
      ->check(CLI::NonNegativeNumber);
  td->add_option("--seed", seed, "Seed for the flip order")->capture_default_str();
  td->add_option("--out", out, "Prediction CSV task_id,q,label")->required();

  // convergence
  std::string scenario = "all";
  std::vector<std::size_t> crowd_sizes{3, 5, 8, 10, 15, 20, 40};
  std::size_t num_tasks = 10000, reps = 20;
  auto* conv = app.add_subcommand("convergence", "DP gap of aggregates versus the truth as R grows");
  conv->add_option("--scenario", scenario, "competent, adversarial, uninformative or all")
      ->check(CLI::IsMember({"competent", "adversarial", "uninformative", "all"}))
      ->capture_default_str();
  conv->add_option("--R", crowd_sizes, "Comma-separated crowd sizes")->delimiter(',');
  conv->add_option("--tasks", num_tasks, "Tasks per run")->capture_default_str();
  conv->add_option("--reps", reps, "Monte-Carlo repetitions")->capture_default_str();
  conv->add_option("--seed", seed)->capture_default_str();
  conv->add_option("--out", out, "Result CSV")->required();

  // tradeoff
  std::vector<double> epsilons{0.01, 0.05, 0.1, 0.2};
  std::vector<std::string> methods{"mv", "bayes", "ds"}, fairifiers{"fc", "post_td"};
  std::size_t resamples = 10;
  double test_fraction = 0.6;
  bool synthetic = false;
  std::string raw_out;
  auto* trade = app.add_subcommand("tradeoff", "F1 versus DP gap for each fairifier and budget");
  trade->add_option("--votes", votes, "task_id,annotator_id,label");
  trade->add_option("--groups", groups, "task_id,a");
  trade->add_option("--truth", truth, "task_id,y");
  trade->add_flag("--synthetic", synthetic, "Use the built-in synthetic tradeoff dataset");
  trade->add_option("--epsilons", epsilons, "Comma-separated budgets")
      ->delimiter(',')
      ->check(CLI::NonNegativeNumber);
  trade->add_option("--methods", methods, "Comma-separated subset of mv,bayes,ds")
      ->delimiter(',')
      ->check(CLI::IsMember({"mv", "bayes", "ds"}));
  trade->add_option("--fairifiers", fairifiers, "Comma-separated subset of fc,post_td")
      ->delimiter(',')
      ->check(CLI::IsMember({"fc", "post_td"}));
  trade->add_option("--resamples", resamples)->capture_default_str();
  trade->add_option("--test-fraction", test_fraction)->capture_default_str();
  trade->add_option("--seed", seed)->capture_default_str();
  trade->add_option("--out", out, "Summary CSV")->required();
  trade->add_option("--raw", raw_out, "Per-resample CSV");
  fc_flags.add_to(trade);

  auto* theory = app.add_subcommand("verify-theory", "Numerical checks of the fairness bounds");
  theory->add_option("--seed", seed)->capture_default_str();
  theory->add_option("--out", out, "Check CSV")->required();

  // generate
  SyntheticConfig gen;
  std::vector<double> p_pos{0.5, 0.5}, skill0{0.5, 1.0}, skill1{0.6, 1.0};
  auto* generate = app.add_subcommand("generate", "Write a synthetic crowd as CSV files");
  generate->add_option("--tasks", gen.num_tasks)->capture_default_str();
  generate->add_option("--pool", gen.pool_size)->capture_default_str();
  generate->add_option("--votes-per-task", gen.votes_per_task)->capture_default_str();
  generate->add_option("--p-group1", gen.p_group1)->capture_default_str();
  generate->add_option("--p-positive", p_pos, "P(Y=1|A=0),P(Y=1|A=1)")->delimiter(',')->expected(2);
  generate->add_option("--skill0", skill0, "lo,hi of group-0 skills")->delimiter(',')->expected(2);
  generate->add_option("--skill1", skill1, "lo,hi of group-1 skills")->delimiter(',')->expected(2);
  generate->add_option("--seed", seed)->capture_default_str();
  generate->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*agg) {
      if (method == "bayes" && truth.empty()) throw UsageError("--method bayes needs --truth");
      const Dataset data = load_csv(votes, groups, optional_path(truth));
      PosteriorTable p;
      if (method == "mv") {
        p = majority_vote(data.votes);
      } else if (method == "bayes") {
        p = bayes_posterior(data.votes, data.groups,
                            estimate_confusion(data.votes, data.groups, smoothing));
      } else {
        DawidSkeneOptions opt;
        opt.iterations = iters;
        opt.init_skill = init_skill;
        opt.update_prior = !freeze_prior;
        p = dawid_skene(data.votes, data.groups, opt).posterior;
      }
      write_posteriors(out, p, data.task_ids);
      const auto labels = harden(p);
      if (data.groups.count(0) == 0 || data.groups.count(1) == 0) {
        std::cerr << "warning: one group has no tasks; no report\n";
      } else {
        print_report(method, std::nullopt, evaluate(p.phi1, labels, data.groups), seed);
      }
    } else if (*fair || *td) {
      const PosteriorFile pf = read_posteriors(posteriors);
      const GroupAssignment g = load_groups(pf.task_ids, groups, optional_path(truth));
      const std::string source(to_string(pf.table.source));
      if (*fair) {
        const FairifyResult fr = fairify(pf.table, g, fc_flags.config(epsilon));
        if (fr.beta_at_bound) {
          std::cerr << "warning: beta* reached the search bound; consider a larger --beta-bound\n";
        }
        if (fr.classifier.residual > 1e-9) {
          std::cerr << "warning: target gap missed by " << fr.classifier.residual << '\n';
        }
        const Prediction pred = apply(fr.classifier, fr.preprocessed, g, seed);
        write_predictions(out, pred.q, pred.labels, pf.task_ids);
        if (!classifier_out.empty()) write_classifier(classifier_out, fr.classifier);
        print_report("fc_" + source, epsilon, evaluate(pred.q, pred.labels, g), seed);
      } else {
        const auto labels = post_td(harden(pf.table), g, epsilon, seed);
        const std::vector<double> q(labels.begin(), labels.end());
        write_predictions(out, q, labels, pf.task_ids);
        print_report("post_td_" + source, epsilon, evaluate(q, labels, g), seed);
      }
    } else if (*conv) {
      ConvergenceConfig cfg;
      cfg.scenarios.clear();
      for (Scenario s : {Scenario::kCompetent, Scenario::kAdversarial, Scenario::kUninformative}) {
        if (scenario == "all" || scenario == to_string(s)) cfg.scenarios.push_back(s);
      }
      cfg.crowd_sizes = crowd_sizes;
      cfg.num_tasks = num_tasks;
      cfg.reps = reps;
      cfg.seed = seed;
      write_convergence(out, run_convergence(cfg));
    } else if (*trade) {
      Dataset data;
      if (synthetic) {
        if (!votes.empty() || !groups.empty() || !truth.empty()) {
          throw UsageError("--synthetic cannot be combined with input files");
        }
        data = generate_synthetic(tradeoff_synthetic_config(seed)).data;
      } else {
        if (votes.empty() || groups.empty() || truth.empty()) {
          throw UsageError("tradeoff needs --votes, --groups and --truth (or --synthetic)");
        }
        data = load_csv(votes, groups, std::filesystem::path(truth));
      }
      TradeoffConfig cfg;
      cfg.epsilons = epsilons;
      cfg.methods.clear();
      for (const auto& m : methods) cfg.methods.push_back(parse_posterior_source(m));
      cfg.fairifiers.clear();
      for (const auto& f : fairifiers) cfg.fairifiers.push_back(parse_fairifier(f));
      cfg.resamples = resamples;
      cfg.test_fraction = test_fraction;
      cfg.seed = seed;
      cfg.faircrowd = fc_flags.config(0.0);
      const TradeoffResult result = run_tradeoff(data, cfg);
      write_tradeoff_summary(out, result.summary);
      if (!raw_out.empty()) write_tradeoff_rows(raw_out, result.rows);
    } else if (*theory) {
      const auto rows = run_verify_theory(seed);
      write_theory_checks(out, rows);
      bool ok = true;
      for (const auto& r : rows) {
        if (!r.holds) {
          std::cerr << "violated: " << r.name << " (lhs " << r.lhs << ", rhs " << r.rhs << ")\n";
          ok = false;
        }
      }
      return ok ? 0 : 1;
    } else if (*generate) {
      gen.p_positive_given_group = {p_pos[0], p_pos[1]};
      gen.skill_law = {Interval{skill0[0], skill0[1]}, Interval{skill1[0], skill1[1]}};
      gen.seed = seed;
      const SyntheticCrowd crowd = generate_synthetic(gen);
      const std::filesystem::path dir(out);
      save_csv(crowd.data, dir / "votes.csv", dir / "groups.csv", dir / "truth.csv");
      auto skills = csv::open_output(dir / "skills.csv");
      skills << "annotator_id,skill0,skill1\n";
      for (std::size_t r = 0; r < crowd.skills.skills.size(); ++r) {
        skills << crowd.data.annotator_ids[r] << ','
               << csv::format_double(crowd.skills.skills[r][0]) << ','
               << csv::format_double(crowd.skills.skills[r][1]) << '\n';
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
