#include "atoc/adam.hpp"

#include <cmath>

#include <Eigen/Core>

#include "atoc/errors.hpp"

namespace atoc {

AdamState::AdamState(const ParameterSet& params) {
  for (const auto& [name, arr] : params) {
    m.emplace(name, Array::zeros(arr.shape));
    v.emplace(name, Array::zeros(arr.shape));
  }
}

void adam_step(ParameterSet& params, const std::map<std::string, Array>& grads,
               AdamState& state, double lr) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params) {
    auto mit = state.m.find(name);
    auto vit = state.v.find(name);
    if (mit == state.m.end() || vit == state.v.end()) {
      throw ConfigError("adam state missing moments for parameter '" + name + "'");
    }
    Array& m = mit->second;
    Array& v = vit->second;
    if (!m.same_shape(p) || !v.same_shape(p)) {
      throw ShapeError("adam moment shape differs from parameter '" + name + "'");
    }
    const Array* g = nullptr;
    auto git = grads.find(name);
    if (git != grads.end()) {
      g = &git->second;
      if (!g->same_shape(p)) {
        throw ShapeError("gradient shape " + g->shape_str() + " does not match parameter '" +
                         name + "' " + p.shape_str());
      }
      if (!g->all_finite()) {
        throw NumericError("non-finite gradient for parameter '" + name + "'");
      }
    }
    const auto n = static_cast<Eigen::Index>(p.numel());
    Eigen::Map<Eigen::ArrayXd> mm(m.v.data(), n);
    Eigen::Map<Eigen::ArrayXd> vm(v.v.data(), n);
    Eigen::Map<Eigen::ArrayXd> pm(p.v.data(), n);
    if (g != nullptr) {
      Eigen::Map<const Eigen::ArrayXd> gm(g->v.data(), n);
      mm = state.beta1 * mm + (1.0 - state.beta1) * gm;
      vm = state.beta2 * vm + (1.0 - state.beta2) * gm.square();
    } else {
      mm *= state.beta1;
      vm *= state.beta2;
    }
    pm -= lr * (mm / bc1) / ((vm / bc2).sqrt() + state.eps);
  }
}

}  // namespace atoc
