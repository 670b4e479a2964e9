#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "atoc/env.hpp"
#include "atoc/rng.hpp"

namespace atoc {

struct CommConfig {
  std::size_t T = 15;         // gate re-decision interval, timesteps
  std::size_t m = 3;          // max collaborators per initiator
  double radius = 1.0;        // initiator's observable field
  double threshold = 0.5;
  double exploration = 0.1;   // gate flip probability while training

  void validate() const;
};

struct Group {
  std::size_t initiator = 0;
  std::vector<std::size_t> members;  // initiator first, then selection order
  std::size_t formed_at = 0;
};

// Groups in formation order (ascending initiator index).
struct GroupSet {
  std::vector<Group> groups;

  bool empty() const { return groups.empty(); }
  bool contains(std::size_t agent) const;
  std::vector<std::size_t> member_union() const;  // ascending, unique
};

// C[i][j] = 1 iff j belongs to the group initiated by i; the diagonal marks
// initiators. Row-major over n agents.
struct CommMatrix {
  std::size_t n = 0;
  std::vector<std::uint8_t> c;

  std::uint8_t at(std::size_t i, std::size_t j) const { return c[i * n + j]; }
};

// Gate decision at a re-decision boundary: agent `lo + k` initiates iff
// probs[k] >= threshold, flipped with probability `exploration` when
// training. One uniform draw per agent while training keeps streams aligned
// across exploration settings.
std::vector<std::size_t> decide_initiators(const std::vector<double>& probs,
                                           const CommConfig& config, std::size_t lo,
                                           bool training, Rng& rng);

// Sequential bandwidth-limited selection over agents in [lo, hi). Each
// initiator (ascending index) picks up to m collaborators within its radius,
// preferring unselected agents, then agents selected by earlier initiators,
// then other initiators, nearest first with index tie-break. An initiator
// with an empty candidate field forms no group.
GroupSet form_groups(const std::vector<std::size_t>& initiators, const WorldState& state,
                     const CommConfig& config, std::size_t lo, std::size_t hi,
                     std::size_t t);

CommMatrix comm_matrix(const GroupSet& gs, std::size_t n);

// Rebuild the ordered group list from a matrix plus the stored member
// orderings (one per initiator row, ascending initiator index). Throws when
// the orderings do not match the matrix.
GroupSet reconstruct_groups(const CommMatrix& m,
                            const std::vector<std::vector<std::size_t>>& member_orders,
                            std::size_t formed_at);

}  // namespace atoc
