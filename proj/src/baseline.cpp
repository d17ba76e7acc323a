#include "crowdfair/baseline.h"

#include <array>

#include "crowdfair/error.h"
#include "crowdfair/rng.h"

namespace crowdfair {

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

std::vector<Label> post_td(std::span<const Label> pred, const GroupAssignment& g,
                           double epsilon, std::uint64_t seed) {
  if (pred.size() != g.size()) throw Error("post_td: prediction/group size mismatch");
  if (!(epsilon >= 0.0)) throw Error("post_td: epsilon must be non-negative");
  g.require_both_groups("post_td");

  std::vector<Label> out(pred.begin(), pred.end());
  std::array<std::size_t, 2> pos{0, 0};
  for (std::size_t t = 0; t < out.size(); ++t) pos[g.group(t)] += out[t];
  const std::array<double, 2> n{double(g.count(0)), double(g.count(1))};

  const Label fav = pos[1] / n[1] >= pos[0] / n[0] ? 1 : 0;
  const Label dis = 1 - fav;
  auto gap = [&] { return double(pos[fav]) / n[fav] - double(pos[dis]) / n[dis]; };
  if (gap() <= epsilon) return out;

  std::vector<std::size_t> demote, promote;
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (g.group(t) == fav && out[t] == 1) demote.push_back(t);
    if (g.group(t) == dis && out[t] == 0) promote.push_back(t);
  }
  Rng rng(seed, 0x7d);
  shuffle(demote, rng);
  shuffle(promote, rng);

  bool demote_turn = true;
  while (gap() > epsilon) {
    const bool can_demote = !demote.empty(), can_promote = !promote.empty();
    if (!can_demote && !can_promote) break;
    if ((demote_turn && can_demote) || !can_promote) {
      out[demote.back()] = 0;
      demote.pop_back();
      --pos[fav];
    } else {
      out[promote.back()] = 1;
      promote.pop_back();
      ++pos[dis];
    }
    demote_turn = !demote_turn;
  }
  return out;
}

}  // namespace crowdfair
