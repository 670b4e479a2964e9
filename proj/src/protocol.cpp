#include "atoc/protocol.hpp"

#include <algorithm>
#include <set>

#include "atoc/errors.hpp"

namespace atoc {

void CommConfig::validate() const {
  if (T < 1) throw ConfigError("comm interval T must be >= 1");
  if (m < 1) throw ConfigError("comm bandwidth m must be >= 1");
  if (threshold <= 0.0 || threshold >= 1.0) {
    throw ConfigError("gate threshold must lie in (0,1)");
  }
  if (radius <= 0.0) throw ConfigError("observable radius must be positive");
  if (exploration < 0.0 || exploration > 1.0) {
    throw ConfigError("gate exploration rate must lie in [0,1]");
  }
}

bool GroupSet::contains(std::size_t agent) const {
  for (const Group& g : groups) {
    if (std::find(g.members.begin(), g.members.end(), agent) != g.members.end()) {
      return true;
    }
  }
  return false;
}

std::vector<std::size_t> GroupSet::member_union() const {
  std::set<std::size_t> all;
  for (const Group& g : groups) all.insert(g.members.begin(), g.members.end());
  return {all.begin(), all.end()};
}

std::vector<std::size_t> decide_initiators(const std::vector<double>& probs,
                                           const CommConfig& config, std::size_t lo,
                                           bool training, Rng& rng) {
  config.validate();
  std::vector<std::size_t> initiators;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] < 0.0 || probs[k] > 1.0) {
      throw NumericError("gate probability outside [0,1]");
    }
    bool fire = probs[k] >= config.threshold;
    if (training && rng.uniform() < config.exploration) fire = !fire;
    if (fire) initiators.push_back(lo + k);
  }
  return initiators;
}

GroupSet form_groups(const std::vector<std::size_t>& initiators, const WorldState& state,
                     const CommConfig& config, std::size_t lo, std::size_t hi,
                     std::size_t t) {
  config.validate();
  std::set<std::size_t> initiator_set(initiators.begin(), initiators.end());
  std::set<std::size_t> selected;
  GroupSet out;
  for (std::size_t i : initiators) {
    if (i < lo || i >= hi) throw ConfigError("initiator outside the agent range");
    struct Cand {
      int tier;
      double dist;
      std::size_t id;
    };
    std::vector<Cand> cands;
    for (std::size_t j = lo; j < hi; ++j) {
      if (j == i) continue;
      const double d = (state.pos[j] - state.pos[i]).norm();
      if (d > config.radius) continue;
      int tier;
      if (initiator_set.count(j)) {
        tier = 3;
      } else if (selected.count(j)) {
        tier = 2;
      } else {
        tier = 1;
      }
      cands.push_back({tier, d, j});
    }
    if (cands.empty()) continue;  // dissolved: nothing observable to share
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.tier != b.tier) return a.tier < b.tier;
      if (a.dist != b.dist) return a.dist < b.dist;
      return a.id < b.id;
    });
    Group g;
    g.initiator = i;
    g.formed_at = t;
    g.members.push_back(i);
    for (std::size_t k = 0; k < cands.size() && k < config.m; ++k) {
      g.members.push_back(cands[k].id);
      selected.insert(cands[k].id);
    }
    out.groups.push_back(std::move(g));
  }
  return out;
}

CommMatrix comm_matrix(const GroupSet& gs, std::size_t n) {
  CommMatrix m;
  m.n = n;
  m.c.assign(n * n, 0);
  for (const Group& g : gs.groups) {
    for (std::size_t j : g.members) {
      if (g.initiator >= n || j >= n) {
        throw ShapeError("group member outside the comm matrix");
      }
      m.c[g.initiator * n + j] = 1;
    }
  }
  return m;
}

GroupSet reconstruct_groups(const CommMatrix& m,
                            const std::vector<std::vector<std::size_t>>& member_orders,
                            std::size_t formed_at) {
  GroupSet out;
  std::size_t next_order = 0;
  for (std::size_t i = 0; i < m.n; ++i) {
    if (m.at(i, i) == 0) {
      // A row without its diagonal set must be empty: only initiators record
      // memberships.
      for (std::size_t j = 0; j < m.n; ++j) {
        if (m.at(i, j) != 0) {
          throw ShapeError("comm matrix row " + std::to_string(i) +
                           " set without an initiator diagonal");
        }
      }
      continue;
    }
    if (next_order >= member_orders.size()) {
      throw ShapeError("fewer member orderings than initiator rows");
    }
    const auto& order = member_orders[next_order++];
    std::set<std::size_t> from_row;
    for (std::size_t j = 0; j < m.n; ++j) {
      if (m.at(i, j) != 0) from_row.insert(j);
    }
    const std::set<std::size_t> from_order(order.begin(), order.end());
    if (from_row != from_order || order.size() != from_order.size() || order.empty() ||
        order.front() != i) {
      throw ShapeError("member ordering inconsistent with comm matrix row " +
                       std::to_string(i));
    }
    Group g;
    g.initiator = i;
    g.members = order;
    g.formed_at = formed_at;
    out.groups.push_back(std::move(g));
  }
  if (next_order != member_orders.size()) {
    throw ShapeError("more member orderings than initiator rows");
  }
  return out;
}

}  // namespace atoc
