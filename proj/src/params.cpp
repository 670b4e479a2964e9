#include "atoc/params.hpp"

#include "atoc/errors.hpp"

namespace atoc {

Array& ParameterSet::add(const std::string& name, Array init) {
  auto [it, inserted] = entries_.emplace(name, std::move(init));
  if (!inserted) throw Error("duplicate parameter name: " + name);
  return it->second;
}

const Array& ParameterSet::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter: " + name);
  return it->second;
}

Array& ParameterSet::value(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter: " + name);
  return it->second;
}

std::size_t ParameterSet::total_values() const {
  std::size_t n = 0;
  for (const auto& [name, a] : entries_) n += a.numel();
  return n;
}

Array random_normal_init(std::vector<std::size_t> shape, double stddev, Rng& rng) {
  if (shape.empty()) throw ShapeError("random_normal_init: empty shape");
  if (stddev <= 0.0) throw Error("random_normal_init: stddev must be positive");
  Array a(std::move(shape));
  for (double& x : a.v) x = stddev * rng.normal();
  return a;
}

}  // namespace atoc
