#pragma once

#include <cstddef>
#include <vector>

#include "atoc/env.hpp"
#include "atoc/rng.hpp"

namespace atoc {

// Ornstein-Uhlenbeck exploration noise, one 2-vector per agent, mean 0:
// x <- x + theta*(0 - x) + sigma*eta with standard normal eta per component.
class OUNoise {
 public:
  OUNoise(std::size_t n_agents, double theta = 0.15, double sigma = 0.2);

  void reset();  // back to 0 at episode start
  const std::vector<Vec2>& step(Rng& rng);
  const std::vector<Vec2>& current() const { return x_; }

  double theta() const { return theta_; }
  double sigma() const { return sigma_; }

  // Flat (x0, y0, x1, y1, ...) view for checkpointing.
  std::vector<double> flat() const;
  void set_flat(const std::vector<double>& values);

 private:
  double theta_;
  double sigma_;
  std::vector<Vec2> x_;
};

}  // namespace atoc
