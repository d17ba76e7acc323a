#include "crowdfair/faircrowd.h"

#include <gtest/gtest.h>

#include <cmath>

#include "crowdfair/error.h"
#include "crowdfair/metrics.h"
#include "crowdfair/rng.h"
#include "test_util.h"

namespace crowdfair {
namespace {

PosteriorTable table(std::vector<double> phi) { return PosteriorTable{std::move(phi), PosteriorSource::kExternal}; }

double objective(double beta, const PosteriorTable& p, const GroupAssignment& g,
                 std::array<double, 2> pi, const FairCrowdConfig& cfg) {
  return L_hat(beta, p, g, pi, cfg.softmax_c) + cfg.epsilon * std::abs(beta);
}

// A random instance with posteriors spread over [0, 1] and uneven groups.
struct Instance {
  PosteriorTable p;
  GroupAssignment g;
};

Instance random_instance(std::uint64_t seed, std::size_t n) {
  Rng rng(seed, 0);
  std::vector<double> phi(n);
  std::vector<Label> a(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = Label(i < 2 ? i : rng.bernoulli(0.6));
    phi[i] = a[i] ? rng.uniform(0.2, 1.0) : rng.uniform(0.0, 0.8);
  }
  return {table(phi), GroupAssignment(a)};
}

TEST(Preprocess, Examples) {
  EXPECT_EQ(preprocess_posteriors(table({0.1, 0.5, 0.95}), 0.04).phi1,
            (std::vector<double>{0.1, 0.5, 0.95}));
  const auto tail = preprocess_posteriors(table({0.97, 0.98, 0.99}), 0.04).phi1;
  EXPECT_DOUBLE_EQ(tail[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(tail[1], 2.0 / 3.0);
  EXPECT_EQ(tail[2], 1.0);
  EXPECT_EQ(preprocess_posteriors(table({0.2, 0.99}), 0.04).phi1, (std::vector<double>{0.2, 1.0}));
}

TEST(Preprocess, EqualValuesShareARankAndOrderIsKept) {
  const auto out = preprocess_posteriors(table({0.99, 0.97, 0.99, 1.0, 0.5}), 0.04).phi1;
  EXPECT_DOUBLE_EQ(out[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(out[1], 1.0 / 3.0);
  EXPECT_EQ(out[2], out[0]);
  EXPECT_EQ(out[3], 1.0);
  EXPECT_EQ(out[4], 0.5);

  Rng rng(5, 0);
  std::vector<double> phi(200);
  for (double& v : phi) v = rng.uniform(0.9, 1.0);
  const auto mapped = preprocess_posteriors(table(phi), 0.04).phi1;
  // Order is kept inside the tail only; the tail lands below values under it.
  for (std::size_t i = 0; i < phi.size(); ++i) {
    for (std::size_t j = 0; j < phi.size(); ++j) {
      if (phi[i] >= 0.96 && phi[i] < phi[j]) EXPECT_LT(mapped[i], mapped[j]);
    }
  }
}

TEST(Thresholds, Formula) {
  const auto tau = thresholds(0.1, {0.4, 0.6});
  EXPECT_DOUBLE_EQ(tau[0], (0.4 - 0.1) / 0.8);
  EXPECT_DOUBLE_EQ(tau[1], (0.6 + 0.1) / 1.2);
  EXPECT_EQ(thresholds(0.0, {0.3, 0.7}), (std::array<double, 2>{0.5, 0.5}));
}

TEST(LHat, HandEvaluatedSingleItemPerGroup) {
  const auto p = table({1.0, 1.0});
  const GroupAssignment g({0, 1});
  const double c = 1e-9;
  for (double beta : {-1.5, -0.3, 0.0, 0.2, 0.7, 1.9}) {
    double want = 0;
    for (int a = 0; a < 2; ++a) {
      const double s = a ? 1 : -1;
      want += std::max(0.5 - s * beta / 2, s * beta / 2);
    }
    EXPECT_NEAR(L_hat(beta, p, g, {0.5, 0.5}, c), want, 1e-8);
    EXPECT_DOUBLE_EQ(L_exact(beta, p, g, {0.5, 0.5}), want);
  }
  EXPECT_NEAR(L_hat(0.0, p, g, {0.5, 0.5}, c), 1.0, 1e-8);
}

TEST(LHat, SmoothingErrorAtZeroIsBoundedByCLog2) {
  const auto inst = random_instance(1, 300);
  const auto pi = group_shares(inst.g);
  for (double c : {1e-4, 1e-2, 0.1}) {
    const double diff = L_hat(0.0, inst.p, inst.g, pi, c) - L_exact(0.0, inst.p, inst.g, pi);
    EXPECT_GE(diff, 0.0);
    EXPECT_LE(diff, 2 * c * std::log(2.0) + 1e-15);
  }
}

TEST(LHat, MidpointConvexity) {
  Rng rng(77, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = random_instance(100 + trial, 40);
    const auto pi = group_shares(inst.g);
    const double b1 = rng.uniform(-2, 2), b2 = rng.uniform(-2, 2);
    const double mid = 0.5 * (b1 + b2);
    const double c = 1e-4;
    EXPECT_LE(L_hat(mid, inst.p, inst.g, pi, c),
              0.5 * L_hat(b1, inst.p, inst.g, pi, c) + 0.5 * L_hat(b2, inst.p, inst.g, pi, c) + 2 * c);
    EXPECT_LE(L_exact(mid, inst.p, inst.g, pi),
              0.5 * L_exact(b1, inst.p, inst.g, pi) + 0.5 * L_exact(b2, inst.p, inst.g, pi) + 1e-12);
  }
}

TEST(MinimizeM, InactiveConstraintGivesZero) {
  const auto inst = random_instance(3, 500);
  const auto plug_in = dp_gap(std::span<const Label>(harden(inst.p)), inst.g).dp_gap;
  FairCrowdConfig cfg;
  cfg.epsilon = plug_in + 0.01;
  const auto pi = group_shares(inst.g);
  EXPECT_EQ(minimize_M(inst.p, inst.g, pi, cfg).beta, 0.0);
  EXPECT_EQ(polish_beta(inst.p, inst.g, pi, cfg).beta, 0.0);
}

TEST(MinimizeM, ZeroBudgetMovesBeta) {
  SyntheticConfig sc;
  sc.num_tasks = 2000;
  sc.seed = 12;
  const Dataset d = generate_synthetic(sc).data;
  const auto p = majority_vote(d.votes);
  FairCrowdConfig cfg;
  const auto pi = group_shares(d.groups);
  const auto r = minimize_M(p, d.groups, pi, cfg);
  EXPECT_GT(std::abs(r.beta), 1e-4);
  EXPECT_FALSE(r.at_bound);
}

TEST(MinimizeM, FirstOrderOptimalityAndCoercivity) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = random_instance(seed, 150);
    const auto pi = group_shares(inst.g);
    for (double eps : {0.0, 0.02, 0.1}) {
      FairCrowdConfig cfg;
      cfg.epsilon = eps;
      const double b = minimize_M(inst.p, inst.g, pi, cfg).beta;
      const double m = objective(b, inst.p, inst.g, pi, cfg);
      for (double h : {1e-4, -1e-4}) {
        if (std::abs(b + h) <= cfg.beta_bound) {
          EXPECT_GE(objective(b + h, inst.p, inst.g, pi, cfg), m - 1e-9);
        }
      }
      const double m0 = objective(0.0, inst.p, inst.g, pi, cfg);
      EXPECT_GT(objective(2.0, inst.p, inst.g, pi, cfg), m0);
      EXPECT_GT(objective(-2.0, inst.p, inst.g, pi, cfg), m0);
    }
  }
}

TEST(MinimizeM, MirrorInstanceFlipsBeta) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = random_instance(40 + seed, 200);
    std::vector<Label> swapped(inst.g.size());
    for (std::size_t i = 0; i < swapped.size(); ++i) swapped[i] = 1 - inst.g.group(i);
    const GroupAssignment mirror(swapped);
    FairCrowdConfig cfg;
    cfg.epsilon = 0.05;
    const double b = minimize_M(inst.p, inst.g, group_shares(inst.g), cfg).beta;
    const double bm = minimize_M(inst.p, mirror, group_shares(mirror), cfg).beta;
    EXPECT_NEAR(bm, -b, 1e-6);
    const double e = polish_beta(inst.p, inst.g, group_shares(inst.g), cfg).beta;
    const double em = polish_beta(inst.p, mirror, group_shares(mirror), cfg).beta;
    EXPECT_NEAR(em, -e, 1e-12);
  }
}

TEST(PolishBeta, MatchesDenseScanOfExactObjective) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = random_instance(60 + seed, 60);
    const auto pi = group_shares(inst.g);
    FairCrowdConfig cfg;
    cfg.epsilon = 0.03;
    auto M = [&](double b) { return L_exact(b, inst.p, inst.g, pi) + cfg.epsilon * std::abs(b); };
    const double b = polish_beta(inst.p, inst.g, pi, cfg).beta;
    double best = M(b);
    for (int j = 0; j <= 40000; ++j) {
      EXPECT_GE(M(-2.0 + 4.0 * j / 40000.0), best - 1e-12);
    }
    // The smoothed minimizer lands close to the exact one.
    EXPECT_LE(M(minimize_M(inst.p, inst.g, pi, cfg).beta), best + 1e-3);
  }
}

// Signed gap of the band rule for given omegas, computed task by task.
double direct_gap(const RandomizedClassifier& rc, const PosteriorTable& p, const GroupAssignment& g) {
  std::vector<double> q(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) q[i] = rc.probability(p.phi1[i], g.group(i));
  return dp_gap(std::span<const double>(q), g).signed_gap();
}

TEST(SolveOmega, FourTaskInstanceAgainstLatticeOracle) {
  // tau = (0.4, 0.6); the group-1 task at 0.6 sits on its threshold.
  const auto p = table({0.2, 0.7, 0.6, 0.9});
  const GroupAssignment g({0, 0, 1, 1});
  FairCrowdConfig cfg;
  cfg.epsilon = 0.25;
  const double beta = 0.1;
  const auto sol = solve_omega(beta, p, g, {0.5, 0.5}, cfg);
  EXPECT_DOUBLE_EQ(sol.omega[0], 0.0);
  EXPECT_DOUBLE_EQ(sol.omega[1], 0.5);
  EXPECT_EQ(sol.residual, 0.0);

  // Every lattice point, ranked by miss then by norm.
  RandomizedClassifier rc;
  rc.tau = thresholds(beta, {0.5, 0.5});
  rc.delta = cfg.delta;
  double best_miss = 1e9, best_norm = 1e9;
  std::array<double, 2> best{0, 0};
  for (int i = 0; i <= 100; ++i) {
    for (int j = 0; j <= 100; ++j) {
      rc.omega = {i / 100.0, j / 100.0};
      const double miss = std::abs(direct_gap(rc, p, g) - cfg.epsilon);
      const double norm = rc.omega[0] + rc.omega[1];
      if (miss < best_miss - 1e-12 || (miss < best_miss + 1e-12 && norm < best_norm)) {
        best_miss = miss;
        best_norm = norm;
        best = rc.omega;
      }
    }
  }
  EXPECT_DOUBLE_EQ(best[0], 0.0);
  EXPECT_DOUBLE_EQ(best[1], 0.5);

  cfg.omega_solver = OmegaSolver::kGrid;
  const auto grid = solve_omega(beta, p, g, {0.5, 0.5}, cfg);
  // The lattice rule accepts any point within 1/grid of the best miss and
  // then prefers the smaller norm, so it may stop one step short.
  EXPECT_DOUBLE_EQ(grid.omega[0], 0.0);
  EXPECT_NEAR(grid.omega[1], 0.5, 0.02);
  EXPECT_LE(grid.residual, 1.0 / 101);
}

TEST(SolveOmega, NoBoundaryItemsGivesZero) {
  // Plug-in gap is already exactly epsilon.
  const auto p = table({0.1, 0.9, 0.9, 0.9});
  const GroupAssignment g({0, 0, 1, 1});
  FairCrowdConfig cfg;
  cfg.epsilon = 0.5;
  const auto sol = solve_omega(0.05, p, g, {0.5, 0.5}, cfg);
  EXPECT_EQ(sol.omega, (std::array<double, 2>{0.0, 0.0}));
  EXPECT_EQ(sol.residual, 0.0);
}

TEST(SolveOmega, InactiveConstraintGivesHalf) {
  const auto p = table({0.5, 0.8, 0.5, 0.3});
  const GroupAssignment g({0, 0, 1, 1});
  FairCrowdConfig cfg;
  cfg.epsilon = 0.6;
  const auto sol = solve_omega(0.0, p, g, {0.5, 0.5}, cfg);
  EXPECT_EQ(sol.omega, (std::array<double, 2>{0.5, 0.5}));
  EXPECT_EQ(sol.residual, 0.0);
}

TEST(SolveOmega, UnreachableTargetReportsResidual) {
  const auto p = table({0.1, 0.9});
  const GroupAssignment g({0, 1});
  FairCrowdConfig cfg;
  cfg.epsilon = 0.0;
  const auto sol = solve_omega(0.3, p, g, {0.5, 0.5}, cfg);
  EXPECT_EQ(sol.omega, (std::array<double, 2>{0.0, 0.0}));
  EXPECT_DOUBLE_EQ(sol.residual, 1.0);
}

TEST(Fairify, EpsilonOneRecoversPlugIn) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = random_instance(seed, 300);
    for (double delta : {1e-5, 0.0}) {
      FairCrowdConfig cfg;
      cfg.epsilon = 1.0;
      cfg.delta = delta;
      const auto r = fairify(inst.p, inst.g, cfg);
      EXPECT_EQ(r.classifier.beta_star, 0.0);
      const auto plug = harden(r.preprocessed);
      for (std::size_t i = 0; i < plug.size(); ++i) {
        EXPECT_EQ(r.classifier.mode_label(r.preprocessed.phi1[i], inst.g.group(i)), plug[i]);
      }
    }
  }
}

TEST(Fairify, InSampleGapWithinBudget) {
  SyntheticConfig sc;
  sc.num_tasks = 2000;
  sc.seed = 21;
  const Dataset d = generate_synthetic(sc).data;
  const auto p = majority_vote(d.votes);
  const double slack = 2.0 / double(std::min(d.groups.count(0), d.groups.count(1)));
  for (double eps : {0.0, 0.01, 0.05, 0.1, 0.2}) {
    FairCrowdConfig cfg;
    cfg.epsilon = eps;
    const auto r = fairify(p, d.groups, cfg);
    const auto pred = apply(r.classifier, r.preprocessed, d.groups, 1);
    EXPECT_LE(dp_gap(std::span<const double>(pred.q), d.groups).dp_gap, eps + slack);
    EXPECT_LE(r.classifier.residual, 1e-12);
    EXPECT_FALSE(r.beta_at_bound);
  }
}

TEST(Fairify, MatchesKnapsackOracle) {
  Rng rng(31, 0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> phi;
    std::vector<int> a;
    for (int grp = 0; grp < 2; ++grp) {
      const std::size_t cells = 2 + rng.below(8);
      for (std::size_t c = 0; c < cells; ++c) {
        const double v = rng.uniform();
        for (std::uint64_t k = 1 + rng.below(4); k > 0; --k) {
          phi.push_back(v);
          a.push_back(grp);
        }
      }
    }
    std::vector<Label> la(a.begin(), a.end());
    const GroupAssignment g(la);
    const double eps = rng.uniform(0.0, 0.3);
    FairCrowdConfig cfg;
    cfg.epsilon = eps;
    cfg.alpha = 0.0;
    const auto r = fairify(table(phi), g, cfg);
    double acc = 0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
      const double q = r.classifier.probability(r.preprocessed.phi1[i], la[i]);
      acc += q * phi[i] + (1 - q) * (1 - phi[i]);
    }
    acc /= double(phi.size());
    EXPECT_NEAR(acc, testing::knapsack_accuracy(phi, a, eps), 1e-6) << "trial " << trial;
  }
}

TEST(Apply, DeterministicAndThresholded) {
  const auto inst = random_instance(8, 100);
  RandomizedClassifier rc;
  rc.tau = {0.3, 0.6};
  rc.omega = {0.0, 0.0};
  rc.delta = 0.0;
  const auto pred = apply(rc, inst.p, inst.g, 4);
  for (std::size_t i = 0; i < inst.p.size(); ++i) {
    const Label a = inst.g.group(i);
    EXPECT_EQ(pred.labels[i], inst.p.phi1[i] > rc.tau[a] ? 1 : 0);
  }
  rc.delta = 0.2;
  rc.omega = {0.3, 0.8};
  const auto x = apply(rc, inst.p, inst.g, 4);
  const auto y = apply(rc, inst.p, inst.g, 4);
  EXPECT_EQ(x.labels, y.labels);
  EXPECT_EQ(x.q, y.q);
}

TEST(Apply, PlugInClassifierMatchesHarden) {
  const auto p = table({0.2, 0.5, 0.51, 0.49, 0.9});
  const GroupAssignment g({0, 1, 0, 1, 1});
  RandomizedClassifier rc;  // tau 1/2, delta 0; ties go to 1
  rc.omega = {1.0, 1.0};
  EXPECT_EQ(apply(rc, p, g, 0).labels, harden(p));
}

TEST(FairCrowdConfig, Validation) {
  FairCrowdConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.epsilon = -0.1;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.alpha = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.softmax_c = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(ClassifierCsv, HeaderAndRows) {
  RandomizedClassifier rc;
  rc.beta_star = 0.125;
  const auto path = testing::write_file("rc.csv", "");
  write_classifier(path, rc);
  const auto text = testing::read_file(path);
  EXPECT_EQ(text.substr(0, text.find('\n')), "a,tau,omega,pi_hat,beta_star,delta");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

}  // namespace
}  // namespace crowdfair
