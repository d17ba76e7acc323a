#ifndef CROWDFAIR_FAIRCROWD_H_
#define CROWDFAIR_FAIRCROWD_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "crowdfair/aggregate.h"
#include "crowdfair/dataset.h"

namespace crowdfair {

enum class OmegaSolver {
  /// Closed-form minimal-norm solution of the piecewise-linear gap equation.
  kExact,
  /// Lattice search over omega_grid x omega_grid points.
  kGrid,
};

struct FairCrowdConfig {
  double epsilon = 0.0;
  double softmax_c = 1e-4;
  double delta = 1e-5;
  double alpha = 0.04;
  double beta_bound = 2.0;
  std::size_t omega_grid = 101;
  OmegaSolver omega_solver = OmegaSolver::kExact;
  /// Replace the smoothed minimizer by the exact minimizer of the unsmoothed
  /// objective, which sits on a breakpoint where a posterior equals its
  /// group threshold.
  bool exact_polish = true;

  void validate() const;
};

/// Group-wise threshold rule with randomization on the threshold band.
struct RandomizedClassifier {
  double beta_star = 0.0;
  std::array<double, 2> tau{0.5, 0.5};
  std::array<double, 2> omega{0.5, 0.5};
  std::array<double, 2> pi_hat{0.5, 0.5};
  double delta = 0.0;
  /// Distance between the achieved signed gap and its target.
  double residual = 0.0;

  /// Probability of predicting 1 for posterior `phi1` in group `a`.
  double probability(double phi1, Label a) const {
    if (phi1 > tau[a] + delta) return 1.0;
    if (phi1 < tau[a] - delta) return 0.0;
    return omega[a];
  }
  /// Most likely output, with ties going to 1.
  Label mode_label(double phi1, Label a) const { return probability(phi1, a) >= 0.5 ? 1 : 0; }
};

/// Spreads the distinct posterior values in [1 - alpha, 1] evenly over
/// (0, 1] by rank. Values below 1 - alpha are left alone.
PosteriorTable preprocess_posteriors(const PosteriorTable& p, double alpha);

/// pi_hat[a] = N_a / N.
std::array<double, 2> group_shares(const GroupAssignment& g);

/// tau[a] = (pi_a + s_a beta) / (2 pi_a), s_a = 2a - 1.
std::array<double, 2> thresholds(double beta, std::array<double, 2> pi_hat);

/// Softmax-smoothed dual objective: sum over groups of the group mean of
/// c * log(exp(v_1 / c) + exp(v_0 / c)), v_k = pi_a Phi_k - (beta / 2) s_a s_k.
double L_hat(double beta, const PosteriorTable& p, const GroupAssignment& g,
             std::array<double, 2> pi_hat, double c);
/// Same objective with a hard max.
double L_exact(double beta, const PosteriorTable& p, const GroupAssignment& g,
               std::array<double, 2> pi_hat);

struct BetaSearch {
  double beta = 0.0;
  /// The minimizer landed on +-beta_bound, so the bound may be too small.
  bool at_bound = false;
};

/// Minimizes L_hat(beta) + epsilon |beta| over [-B, B]: 401-point grid, then
/// golden-section refinement on the best bracket.
BetaSearch minimize_M(const PosteriorTable& p, const GroupAssignment& g,
                      std::array<double, 2> pi_hat, const FairCrowdConfig& cfg);

/// Exact minimizer of L_exact(beta) + epsilon |beta| over [-B, B]. The
/// objective is convex and piecewise linear, so it is evaluated at every
/// breakpoint. Ties go to the smallest |beta|.
BetaSearch polish_beta(const PosteriorTable& p, const GroupAssignment& g,
                       std::array<double, 2> pi_hat, const FairCrowdConfig& cfg);

struct OmegaSolution {
  std::array<double, 2> omega{0.0, 0.0};
  double residual = 0.0;
};

/// Randomization weights for the band |phi1 - tau_a| <= delta so that the
/// signed gap rate_1 - rate_0 equals epsilon * sign(beta) (or lies in
/// [-epsilon, epsilon] when beta = 0), with minimal |omega_0| + |omega_1|.
OmegaSolution solve_omega(double beta_star, const PosteriorTable& p, const GroupAssignment& g,
                          std::array<double, 2> pi_hat, const FairCrowdConfig& cfg);

struct FairifyResult {
  RandomizedClassifier classifier;
  /// The posteriors the classifier is meant to be applied to.
  PosteriorTable preprocessed;
  /// Minimizer of the smoothed objective, before any polishing.
  double beta_smoothed = 0.0;
  bool beta_at_bound = false;
};

FairifyResult fairify(const PosteriorTable& p, const GroupAssignment& g,
                      const FairCrowdConfig& cfg);

struct Prediction {
  std::vector<double> q;
  std::vector<Label> labels;
};

/// Probabilities from the decision rule plus one Bernoulli draw per task;
/// task t uses its own substream of `seed`.
Prediction apply(const RandomizedClassifier& rc, const PosteriorTable& p,
                 const GroupAssignment& g, std::uint64_t seed);

/// Writes `a,tau,omega,pi_hat,beta_star,delta`, one row per group.
void write_classifier(const std::filesystem::path& path, const RandomizedClassifier& rc);

/// Writes `task_id,q,label`.
void write_predictions(const std::filesystem::path& path, std::span<const double> q,
                       std::span<const Label> labels, std::span<const std::string> task_ids);

}  // namespace crowdfair

#endif  // CROWDFAIR_FAIRCROWD_H_
