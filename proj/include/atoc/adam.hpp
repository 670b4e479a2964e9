#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "atoc/array.hpp"
#include "atoc/params.hpp"

namespace atoc {

// Per-parameter first/second moment state for the Adam optimizer.
struct AdamState {
  std::map<std::string, Array> m;
  std::map<std::string, Array> v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(const ParameterSet& params);  // zero moments matching shapes
};

// One bias-corrected Adam update. Parameters absent from `grads` are treated
// as zero-gradient. Throws on shape mismatch or non-finite gradients.
void adam_step(ParameterSet& params, const std::map<std::string, Array>& grads,
               AdamState& state, double lr);

}  // namespace atoc
