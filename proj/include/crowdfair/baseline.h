#ifndef CROWDFAIR_BASELINE_H_
#define CROWDFAIR_BASELINE_H_

#include <cstdint>
#include <span>
#include <vector>

#include "crowdfair/dataset.h"

namespace crowdfair {

/// Label-flipping baseline that only looks at hard predictions. Alternates
/// demoting a random positive of the favored group and promoting a random
/// negative of the other group until the gap is at most `epsilon`. When one
/// side runs out of candidates the other side takes the remaining flips.
std::vector<Label> post_td(std::span<const Label> pred, const GroupAssignment& g,
                           double epsilon, std::uint64_t seed);

}  // namespace crowdfair

#endif  // CROWDFAIR_BASELINE_H_
