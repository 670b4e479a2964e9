#pragma once

#include <cstddef>
#include <vector>

#include "atoc/array.hpp"
#include "atoc/protocol.hpp"
#include "atoc/rng.hpp"

namespace atoc {

// One environment step for one learner: per-agent rows over that learner's
// agents (indices inside `comm` are learner-local, matching the rows).
struct Transition {
  Array obs;                 // [n, obs_dim]
  Array act;                 // [n, act_dim]
  std::vector<double> rew;   // n
  Array next_obs;            // [n, obs_dim]
  GroupSet comm;
};

// Fixed-capacity ring with strict FIFO eviction and uniform sampling with
// replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  const Transition& sample_one(Rng& rng) const;
  std::vector<const Transition*> sample(std::size_t count, Rng& rng) const;

  std::size_t size() const { return store_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return store_.empty(); }

  // Oldest-first iteration for serialization.
  const Transition& nth_oldest(std::size_t k) const;

  // Physical snapshot hooks. Sampling indexes storage directly, so restoring
  // the exact slot layout (not just the logical order) keeps resumed draws
  // bit-identical.
  std::size_t cursor() const { return next_; }
  const Transition& slot(std::size_t k) const;
  void restore(std::vector<Transition> store, std::size_t cursor);

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;  // overwrite position once full
  std::vector<Transition> store_;
};

}  // namespace atoc
