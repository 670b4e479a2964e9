#include "atoc/array.hpp"

#include <cmath>

#include <Eigen/Core>

#include "atoc/errors.hpp"

namespace atoc {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Array::Array(std::vector<std::size_t> s) : shape(std::move(s)) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("array dimensions must be positive");
  }
  v.assign(shape_numel(shape), 0.0);
}

Array::Array(std::vector<std::size_t> s, Storage values)
    : shape(std::move(s)), v(std::move(values)) {
  if (shape_numel(shape) != v.size()) {
    throw ShapeError("value count " + std::to_string(v.size()) +
                     " does not match shape " + shape_str());
  }
}

Array Array::full(std::vector<std::size_t> s, double value) {
  Array a(std::move(s));
  for (double& x : a.v) x = value;
  return a;
}

Array Array::vec(Storage values) {
  std::size_t n = values.size();
  return Array({n}, std::move(values));
}

std::size_t Array::rows() const {
  if (rank() != 2) throw ShapeError("rows() on non-matrix " + shape_str());
  return shape[0];
}

std::size_t Array::cols() const {
  if (rank() != 2) throw ShapeError("cols() on non-matrix " + shape_str());
  return shape[1];
}

bool Array::all_finite() const {
  if (v.empty()) return true;
  // Values here stay far below overflow, so a NaN/Inf-propagating sum is an
  // exact vectorizable test.
  const double s =
      Eigen::Map<const Eigen::ArrayXd>(v.data(), static_cast<Eigen::Index>(v.size())).sum();
  return std::isfinite(s);
}

std::string Array::shape_str() const {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  s += ")";
  return s;
}

}  // namespace atoc
