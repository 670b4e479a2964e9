#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace atoc {

// Deterministic xoshiro256++ stream. A stream is identified by its seed;
// split(name) derives an independent child stream keyed on (seed, name), so
// the substream layout does not depend on how much the parent was consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();                  // [0, 1)
  double uniform(double lo, double hi);
  double normal();                   // standard normal
  std::size_t index(std::size_t n);  // uniform in [0, n)

  Rng split(std::string_view name) const;

  std::uint64_t seed() const { return seed_; }
  std::array<std::uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

 private:
  std::uint64_t seed_ = 0;
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace atoc
