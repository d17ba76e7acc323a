#include "crowdfair/baseline.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>

#include "crowdfair/error.h"
#include "crowdfair/metrics.h"
#include "crowdfair/rng.h"

namespace crowdfair {
namespace {

double gap_of(const std::vector<Label>& y, const GroupAssignment& g) {
  return dp_gap(std::span<const Label>(y), g).dp_gap;
}

TEST(PostTd, IdentityWhenFeasible) {
  const GroupAssignment g({0, 0, 1, 1});
  const std::vector<Label> y{1, 0, 1, 1};
  EXPECT_EQ(post_td(y, g, 0.5, 1), y);
  EXPECT_EQ(post_td(y, g, 1.0, 1), y);
}

TEST(PostTd, TenAndTenFromFullSeparation) {
  std::vector<Label> group, y;
  for (int i = 0; i < 10; ++i) {
    group.push_back(1);
    y.push_back(1);
  }
  for (int i = 0; i < 10; ++i) {
    group.push_back(0);
    y.push_back(0);
  }
  const GroupAssignment g(group);
  const auto out = post_td(y, g, 0.0, 7);
  const auto r = dp_gap(std::span<const Label>(out), g);
  EXPECT_DOUBLE_EQ(r.rate[1], 0.5);
  EXPECT_DOUBLE_EQ(r.rate[0], 0.5);
  EXPECT_EQ(r.dp_gap, 0.0);
}

TEST(PostTd, DeterministicUnderSeed) {
  Rng rng(1, 0);
  std::vector<Label> group(200), y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    group[i] = Label(i % 2);
    y[i] = rng.bernoulli(group[i] ? 0.8 : 0.3);
  }
  const GroupAssignment g(group);
  EXPECT_EQ(post_td(y, g, 0.05, 3), post_td(y, g, 0.05, 3));
  EXPECT_NE(post_td(y, g, 0.05, 3), post_td(y, g, 0.05, 4));
}

TEST(PostTd, DisfavoredGroupOne) {
  const GroupAssignment g({0, 0, 1, 1});
  const std::vector<Label> y{1, 1, 0, 0};
  const auto out = post_td(y, g, 0.0, 2);
  EXPECT_EQ(gap_of(out, g), 0.0);
}

TEST(PostTd, GapWithinOneFlipOfBudget) {
  Rng rng(9, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 4 + rng.below(60);
    std::vector<Label> group(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      group[i] = Label(i < 2 ? i : rng.below(2));
      y[i] = rng.bernoulli(group[i] ? rng.uniform() : rng.uniform());
    }
    const GroupAssignment g(group);
    const double eps = rng.uniform(0.0, 0.3);
    const auto out = post_td(y, g, eps, trial);
    const double slack = 1.0 / double(std::min(g.count(0), g.count(1)));
    EXPECT_LE(gap_of(out, g), eps + slack + 1e-12);
  }
}

// Smallest number of flips over every subset of flips that an alternating
// schedule could produce: demotes d and promotes p with d - p in {0, 1},
// or any split once one side has no candidates left.
std::size_t exhaustive_min_flips(const std::vector<Label>& y, const GroupAssignment& g, double eps) {
  const std::size_t n = y.size();
  std::array<double, 2> pos{0, 0};
  for (std::size_t i = 0; i < n; ++i) pos[g.group(i)] += y[i];
  const std::array<double, 2> cnt{double(g.count(0)), double(g.count(1))};
  const Label fav = pos[1] / cnt[1] >= pos[0] / cnt[0] ? 1 : 0;
  std::size_t best = n + 1;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::size_t d = 0, p = 0;
    bool ok = true;
    std::vector<Label> z = y;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!(mask >> i & 1)) continue;
      if (g.group(i) == fav && y[i] == 1) {
        ++d;
      } else if (g.group(i) != fav && y[i] == 0) {
        ++p;
      } else {
        ok = false;
      }
      z[i] = 1 - z[i];
    }
    if (!ok) continue;
    std::size_t max_d = 0, max_p = 0;
    for (std::size_t i = 0; i < n; ++i) {
      max_d += g.group(i) == fav && y[i] == 1;
      max_p += g.group(i) != fav && y[i] == 0;
    }
    const bool alternating = d == p || d == p + 1 || (p == max_p && d > p) || (d == max_d && p > d);
    if (!alternating) continue;
    const double signed_gap = dp_gap(std::span<const Label>(z), g).rate[fav] -
                              dp_gap(std::span<const Label>(z), g).rate[1 - fav];
    if (signed_gap <= eps) best = std::min<std::size_t>(best, std::popcount(mask));
  }
  return best;
}

TEST(PostTd, FlipCountMinimalAmongAlternatingSchedules) {
  Rng rng(21, 0);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(11);
    std::vector<Label> group(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      group[i] = Label(i < 2 ? i : rng.below(2));
      y[i] = Label(rng.below(2));
    }
    const GroupAssignment g(group);
    const double eps = rng.uniform(0.0, 0.5);
    const auto out = post_td(y, g, eps, trial);
    std::size_t flips = 0;
    for (std::size_t i = 0; i < n; ++i) flips += out[i] != y[i];
    EXPECT_EQ(flips, exhaustive_min_flips(y, g, eps)) << "trial " << trial;
    ++checked;
  }
  EXPECT_EQ(checked, 200);
}

TEST(PostTd, RejectsBadInput) {
  const GroupAssignment g({0, 1});
  const std::vector<Label> y{1};
  EXPECT_THROW(post_td(y, g, 0.1, 0), Error);
  const std::vector<Label> y2{1, 0};
  EXPECT_THROW(post_td(y2, g, -0.1, 0), Error);
  EXPECT_THROW(post_td(y2, GroupAssignment({1, 1}), 0.1, 0), Error);
}

}  // namespace
}  // namespace crowdfair
