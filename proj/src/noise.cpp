#include "atoc/noise.hpp"

#include "atoc/errors.hpp"

namespace atoc {

OUNoise::OUNoise(std::size_t n_agents, double theta, double sigma)
    : theta_(theta), sigma_(sigma), x_(n_agents) {
  if (n_agents == 0) throw ConfigError("noise needs at least one agent");
  if (theta < 0.0 || theta > 1.0 || sigma < 0.0) {
    throw ConfigError("OU parameters out of range");
  }
}

void OUNoise::reset() { x_.assign(x_.size(), Vec2{}); }

const std::vector<Vec2>& OUNoise::step(Rng& rng) {
  for (Vec2& v : x_) {
    v.x += theta_ * (0.0 - v.x) + sigma_ * rng.normal();
    v.y += theta_ * (0.0 - v.y) + sigma_ * rng.normal();
  }
  return x_;
}

std::vector<double> OUNoise::flat() const {
  std::vector<double> out;
  out.reserve(2 * x_.size());
  for (const Vec2& v : x_) {
    out.push_back(v.x);
    out.push_back(v.y);
  }
  return out;
}

void OUNoise::set_flat(const std::vector<double>& values) {
  if (values.size() != 2 * x_.size()) {
    throw ShapeError("noise state size mismatch");
  }
  for (std::size_t i = 0; i < x_.size(); ++i) {
    x_[i] = {values[2 * i], values[2 * i + 1]};
  }
}

}  // namespace atoc
