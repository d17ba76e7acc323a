#include "crowdfair/faircrowd.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crowdfair/csv.h"
#include "crowdfair/error.h"
#include "crowdfair/rng.h"

namespace crowdfair {

namespace {

constexpr double kPlateauTol = 1e-12;
constexpr double kZeroSnapTol = 1e-10;
constexpr std::size_t kGridPoints = 401;
constexpr double kGoldenWidth = 1e-8;

double sign_of(Label a) { return a ? 1.0 : -1.0; }

void check_inputs(const PosteriorTable& p, const GroupAssignment& g, const char* context) {
  if (p.size() != g.size()) throw Error(std::string(context) + ": posterior/group size mismatch");
  g.require_both_groups(context);
}

// Golden-section search for the minimum of a unimodal f on [lo, hi].
template <typename F>
double golden_section(F&& f, double lo, double hi, double width) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > width) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    }
  }
  return f1 <= f2 ? x1 : x2;
}

// Breakpoints of one group's hard-max objective, in u = s_a * beta. Item i
// contributes pi p_i - u/2 when u <= k_i and pi (1 - p_i) + u/2 otherwise,
// where k_i = pi (2 p_i - 1).
class GroupKinks {
 public:
  GroupKinks(const PosteriorTable& p, const GroupAssignment& g, Label a, double pi) {
    std::vector<double> phis;
    for (std::size_t t = 0; t < p.size(); ++t) {
      if (g.group(t) == a) phis.push_back(p.phi1[t]);
    }
    std::sort(phis.begin(), phis.end());
    kinks_.reserve(phis.size());
    prefix_pos_.assign(phis.size() + 1, 0.0);
    prefix_neg_.assign(phis.size() + 1, 0.0);
    for (std::size_t i = 0; i < phis.size(); ++i) {
      kinks_.push_back(pi * (2.0 * phis[i] - 1.0));
      prefix_pos_[i + 1] = prefix_pos_[i] + pi * phis[i];
      prefix_neg_[i + 1] = prefix_neg_[i] + pi * (1.0 - phis[i]);
    }
  }

  double mean(double u) const {
    const std::size_t n = kinks_.size();
    const auto below = std::size_t(std::lower_bound(kinks_.begin(), kinks_.end(), u) - kinks_.begin());
    const double lower = prefix_neg_[below] + double(below) * u / 2.0;
    const double upper = (prefix_pos_[n] - prefix_pos_[below]) - double(n - below) * u / 2.0;
    return (lower + upper) / double(n);
  }

  const std::vector<double>& kinks() const { return kinks_; }

 private:
  std::vector<double> kinks_;
  std::vector<double> prefix_pos_, prefix_neg_;
};

}  // namespace

void FairCrowdConfig::validate() const {
  if (!(epsilon >= 0.0)) throw Error("faircrowd: epsilon must be non-negative");
  if (!(softmax_c > 0.0)) throw Error("faircrowd: softmax_c must be positive");
  if (!(delta >= 0.0 && delta < 0.5)) throw Error("faircrowd: delta must lie in [0, 1/2)");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw Error("faircrowd: alpha must lie in [0, 1)");
  if (!(beta_bound > 0.0)) throw Error("faircrowd: beta_bound must be positive");
  if (omega_grid < 2) throw Error("faircrowd: omega_grid needs at least 2 points");
}

PosteriorTable preprocess_posteriors(const PosteriorTable& p, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw Error("preprocess_posteriors: alpha must lie in [0, 1)");
  const double lo = 1.0 - alpha;
  std::vector<double> tail;
  for (double v : p.phi1) {
    if (v >= lo && v <= 1.0) tail.push_back(v);
  }
  PosteriorTable out = p;
  if (tail.empty()) return out;
  std::sort(tail.begin(), tail.end());
  tail.erase(std::unique(tail.begin(), tail.end()), tail.end());
  const double eta = 1.0 / double(tail.size());
  for (double& v : out.phi1) {
    if (v >= lo && v <= 1.0) {
      const auto rank = std::size_t(std::lower_bound(tail.begin(), tail.end(), v) - tail.begin()) + 1;
      v = rank == tail.size() ? 1.0 : double(rank) * eta;
    }
  }
  return out;
}

std::array<double, 2> group_shares(const GroupAssignment& g) {
  const double n = double(g.size());
  return {double(g.count(0)) / n, double(g.count(1)) / n};
}

std::array<double, 2> thresholds(double beta, std::array<double, 2> pi_hat) {
  return {(pi_hat[0] - beta) / (2.0 * pi_hat[0]), (pi_hat[1] + beta) / (2.0 * pi_hat[1])};
}

double L_hat(double beta, const PosteriorTable& p, const GroupAssignment& g,
             std::array<double, 2> pi_hat, double c) {
  check_inputs(p, g, "L_hat");
  std::array<double, 2> sum{0.0, 0.0};
  for (std::size_t t = 0; t < p.size(); ++t) {
    const Label a = g.group(t);
    const double half = 0.5 * beta * sign_of(a);
    const double v1 = pi_hat[a] * p.phi1[t] - half;
    const double v0 = pi_hat[a] * (1.0 - p.phi1[t]) + half;
    // c log(e^{v1/c} + e^{v0/c}) with the larger term factored out.
    sum[a] += std::max(v1, v0) + c * std::log1p(std::exp(-std::abs(v1 - v0) / c));
  }
  return sum[0] / double(g.count(0)) + sum[1] / double(g.count(1));
}

double L_exact(double beta, const PosteriorTable& p, const GroupAssignment& g,
               std::array<double, 2> pi_hat) {
  check_inputs(p, g, "L_exact");
  std::array<double, 2> sum{0.0, 0.0};
  for (std::size_t t = 0; t < p.size(); ++t) {
    const Label a = g.group(t);
    const double half = 0.5 * beta * sign_of(a);
    sum[a] += std::max(pi_hat[a] * p.phi1[t] - half, pi_hat[a] * (1.0 - p.phi1[t]) + half);
  }
  return sum[0] / double(g.count(0)) + sum[1] / double(g.count(1));
}

BetaSearch minimize_M(const PosteriorTable& p, const GroupAssignment& g,
                      std::array<double, 2> pi_hat, const FairCrowdConfig& cfg) {
  cfg.validate();
  check_inputs(p, g, "minimize_M");
  const double B = cfg.beta_bound;
  auto M = [&](double beta) {
    return L_hat(beta, p, g, pi_hat, cfg.softmax_c) + cfg.epsilon * std::abs(beta);
  };

  const double step = 2.0 * B / double(kGridPoints - 1);
  std::vector<double> grid(kGridPoints), value(kGridPoints);
  for (std::size_t j = 0; j < kGridPoints; ++j) {
    // Index (kGridPoints - 1) / 2 is exactly 0.
    grid[j] = j == (kGridPoints - 1) / 2 ? 0.0 : -B + step * double(j);
    value[j] = M(grid[j]);
  }
  const double best = *std::min_element(value.begin(), value.end());
  std::size_t pick = 0;
  for (std::size_t j = 0; j < kGridPoints; ++j) {
    if (value[j] <= best + kPlateauTol &&
        (value[pick] > best + kPlateauTol || std::abs(grid[j]) < std::abs(grid[pick]))) {
      pick = j;
    }
  }

  double beta = grid[pick];
  double beta_value = value[pick];
  const double lo = std::max(-B, grid[pick] - step);
  const double hi = std::min(B, grid[pick] + step);
  const double refined = golden_section(M, lo, hi, kGoldenWidth);
  const double refined_value = M(refined);
  if (refined_value < beta_value - kPlateauTol) {
    beta = refined;
    beta_value = refined_value;
  }
  if (std::abs(beta_value - M(0.0)) < kZeroSnapTol) beta = 0.0;

  return BetaSearch{beta, std::abs(beta) >= B - step / 2.0};
}

BetaSearch polish_beta(const PosteriorTable& p, const GroupAssignment& g,
                       std::array<double, 2> pi_hat, const FairCrowdConfig& cfg) {
  cfg.validate();
  check_inputs(p, g, "polish_beta");
  const double B = cfg.beta_bound;
  const GroupKinks group0(p, g, 0, pi_hat[0]);
  const GroupKinks group1(p, g, 1, pi_hat[1]);
  auto M = [&](double beta) {
    return group0.mean(-beta) + group1.mean(beta) + cfg.epsilon * std::abs(beta);
  };

  std::vector<double> candidates{0.0, -B, B};
  for (double k : group0.kinks()) {
    if (std::abs(k) <= B) candidates.push_back(-k);
  }
  for (double k : group1.kinks()) {
    if (std::abs(k) <= B) candidates.push_back(k);
  }

  std::vector<double> value(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) value[i] = M(candidates[i]);
  const double best = *std::min_element(value.begin(), value.end());
  double beta = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (value[i] <= best + kPlateauTol && std::abs(candidates[i]) < std::abs(beta)) {
      beta = candidates[i];
    }
  }
  return BetaSearch{beta, std::abs(beta) >= B};
}

OmegaSolution solve_omega(double beta_star, const PosteriorTable& p, const GroupAssignment& g,
                          std::array<double, 2> pi_hat, const FairCrowdConfig& cfg) {
  cfg.validate();
  check_inputs(p, g, "solve_omega");
  const auto tau = thresholds(beta_star, pi_hat);
  std::array<double, 2> above{0, 0}, band{0, 0};
  for (std::size_t t = 0; t < p.size(); ++t) {
    const Label a = g.group(t);
    const double phi = p.phi1[t];
    if (phi > tau[a] + cfg.delta) {
      above[a] += 1;
    } else if (phi >= tau[a] - cfg.delta) {
      band[a] += 1;
    }
  }
  const std::array<double, 2> n{double(g.count(0)), double(g.count(1))};
  const double base = above[1] / n[1] - above[0] / n[0];
  const std::array<double, 2> mass{band[0] / n[0], band[1] / n[1]};
  auto gap = [&](double w0, double w1) { return base + w1 * mass[1] - w0 * mass[0]; };

  const double eps = cfg.epsilon;
  // Distance of a signed gap from the admissible target.
  auto miss = [&](double G) {
    if (beta_star > 0) return std::abs(G - eps);
    if (beta_star < 0) return std::abs(G + eps);
    return std::max(0.0, std::abs(G) - eps);
  };

  if (beta_star == 0.0 && miss(gap(0.5, 0.5)) == 0.0) return OmegaSolution{{0.5, 0.5}, 0.0};

  OmegaSolution out;
  if (cfg.omega_solver == OmegaSolver::kExact) {
    // G is increasing in omega_1 and decreasing in omega_0, so the
    // minimal-norm solution moves a single coordinate.
    double target;
    if (beta_star > 0) {
      target = eps;
    } else if (beta_star < 0) {
      target = -eps;
    } else {
      target = std::clamp(base, -eps, eps);
    }
    const double d = target - base;
    if (d > 0 && mass[1] > 0) out.omega[1] = std::min(1.0, d / mass[1]);
    if (d < 0 && mass[0] > 0) out.omega[0] = std::min(1.0, -d / mass[0]);
  } else {
    const std::size_t k = cfg.omega_grid;
    const double h = 1.0 / double(k - 1);
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> misses(k * k);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        misses[i * k + j] = miss(gap(double(i) * h, double(j) * h));
        best = std::min(best, misses[i * k + j]);
      }
    }
    const double tol = 1.0 / double(k);
    std::size_t pick = 0;
    double pick_norm = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const double norm = double(i + j) * h;
        if (misses[i * k + j] <= best + tol && norm < pick_norm) {
          pick = i * k + j;
          pick_norm = norm;
        }
      }
    }
    out.omega = {double(pick / k) * h, double(pick % k) * h};
  }
  out.residual = miss(gap(out.omega[0], out.omega[1]));
  return out;
}

FairifyResult fairify(const PosteriorTable& p, const GroupAssignment& g,
                      const FairCrowdConfig& cfg) {
  cfg.validate();
  check_inputs(p, g, "fairify");
  FairifyResult result;
  result.preprocessed = preprocess_posteriors(p, cfg.alpha);
  const auto pi_hat = group_shares(g);

  const BetaSearch smooth = minimize_M(result.preprocessed, g, pi_hat, cfg);
  result.beta_smoothed = smooth.beta;
  BetaSearch chosen = smooth;
  if (cfg.exact_polish) chosen = polish_beta(result.preprocessed, g, pi_hat, cfg);
  result.beta_at_bound = chosen.at_bound;

  const OmegaSolution omega = solve_omega(chosen.beta, result.preprocessed, g, pi_hat, cfg);
  RandomizedClassifier& rc = result.classifier;
  rc.beta_star = chosen.beta;
  rc.tau = thresholds(chosen.beta, pi_hat);
  rc.omega = omega.omega;
  rc.pi_hat = pi_hat;
  rc.delta = cfg.delta;
  rc.residual = omega.residual;
  return result;
}

Prediction apply(const RandomizedClassifier& rc, const PosteriorTable& p,
                 const GroupAssignment& g, std::uint64_t seed) {
  if (p.size() != g.size()) throw Error("apply: posterior/group size mismatch");
  Prediction out;
  out.q.resize(p.size());
  out.labels.resize(p.size());
  const std::uint64_t family = derive_seed(seed, 0xa991ULL);
  for (std::size_t t = 0; t < p.size(); ++t) {
    const double q = rc.probability(p.phi1[t], g.group(t));
    out.q[t] = q;
    if (q == 0.0 || q == 1.0) {
      out.labels[t] = q == 1.0;
    } else {
      Rng rng(family, t);
      out.labels[t] = rng.bernoulli(q) ? 1 : 0;
    }
  }
  return out;
}

void write_classifier(const std::filesystem::path& path, const RandomizedClassifier& rc) {
  auto out = csv::open_output(path);
  out << "a,tau,omega,pi_hat,beta_star,delta\n";
  for (int a = 0; a < 2; ++a) {
    out << a << ',' << csv::format_double(rc.tau[a]) << ',' << csv::format_double(rc.omega[a])
        << ',' << csv::format_double(rc.pi_hat[a]) << ',' << csv::format_double(rc.beta_star)
        << ',' << csv::format_double(rc.delta) << '\n';
  }
}

void write_predictions(const std::filesystem::path& path, std::span<const double> q,
                       std::span<const Label> labels, std::span<const std::string> task_ids) {
  if (q.size() != labels.size() || q.size() != task_ids.size()) {
    throw Error("write_predictions: column length mismatch");
  }
  auto out = csv::open_output(path);
  out << "task_id,q,label\n";
  for (std::size_t t = 0; t < q.size(); ++t) {
    out << task_ids[t] << ',' << csv::format_double(q[t]) << ',' << int(labels[t]) << '\n';
  }
}

}  // namespace crowdfair
