#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "atoc/array.hpp"
#include "atoc/rng.hpp"

namespace atoc {

// Named collection of learnable arrays for one network. Names are unique and
// shapes are fixed at creation; values mutate in place during optimization so
// graph nodes can hold stable references.
class ParameterSet {
 public:
  ParameterSet() = default;
  explicit ParameterSet(std::uint64_t creation_seed) : creation_seed_(creation_seed) {}

  Array& add(const std::string& name, Array init);
  bool has(const std::string& name) const { return entries_.count(name) != 0; }
  const Array& get(const std::string& name) const;
  Array& value(const std::string& name);

  std::size_t size() const { return entries_.size(); }
  std::size_t total_values() const;
  std::uint64_t creation_seed() const { return creation_seed_; }

  // name-ordered iteration
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::map<std::string, Array> entries_;
  std::uint64_t creation_seed_ = 0;
};

// i.i.d. normal draws with mean 0 and the given stddev, deterministic per
// rng state.
Array random_normal_init(std::vector<std::size_t> shape, double stddev, Rng& rng);

}  // namespace atoc
