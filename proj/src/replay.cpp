#include "atoc/replay.hpp"

#include "atoc/errors.hpp"

namespace atoc {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (store_.size() < capacity_) {
    store_.push_back(std::move(t));
    return;
  }
  store_[next_] = std::move(t);
  next_ = (next_ + 1) % capacity_;
}

const Transition& ReplayBuffer::sample_one(Rng& rng) const {
  if (store_.empty()) throw Error("sampling from an empty replay buffer");
  return store_[rng.index(store_.size())];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  if (store_.empty()) throw Error("sampling from an empty replay buffer");
  std::vector<const Transition*> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(&store_[rng.index(store_.size())]);
  return out;
}

const Transition& ReplayBuffer::nth_oldest(std::size_t k) const {
  if (k >= store_.size()) throw Error("replay index out of range");
  if (store_.size() < capacity_) return store_[k];
  return store_[(next_ + k) % capacity_];
}

const Transition& ReplayBuffer::slot(std::size_t k) const {
  if (k >= store_.size()) throw Error("replay index out of range");
  return store_[k];
}

void ReplayBuffer::restore(std::vector<Transition> store, std::size_t cursor) {
  if (store.size() > capacity_) throw Error("replay snapshot exceeds capacity");
  if (store.size() < capacity_ ? cursor != 0 : cursor >= capacity_) {
    throw Error("replay snapshot cursor out of range");
  }
  store_ = std::move(store);
  next_ = cursor;
}

}  // namespace atoc
