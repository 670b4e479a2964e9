#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <string>
#include <vector>

namespace atoc {

// Allocator with one fixed alignment class for every tensor buffer. SIMD
// kernels peel loops based on pointer alignment; a uniform alignment keeps
// results bit-identical across allocations (checkpoint resume relies on it).
template <class T>
struct AlignedAlloc {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAlloc() noexcept = default;
  template <class U>
  AlignedAlloc(const AlignedAlloc<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAlloc<U>&) const noexcept {
    return true;
  }
  template <class U>
  bool operator!=(const AlignedAlloc<U>&) const noexcept {
    return false;
  }
};

// Dense row-major float64 tensor. Rank 1 (vectors) and rank 2 (row batches /
// weight matrices) cover every quantity in this codebase. Values are expected
// to stay finite; ops that can produce NaN/Inf check and throw.
struct Array {
  using Storage = std::vector<double, AlignedAlloc<double>>;

  std::vector<std::size_t> shape;
  Storage v;

  Array() = default;
  explicit Array(std::vector<std::size_t> s);  // zero-filled
  Array(std::vector<std::size_t> s, Storage values);

  static Array zeros(std::vector<std::size_t> s) { return Array(std::move(s)); }
  static Array full(std::vector<std::size_t> s, double value);
  static Array scalar(double value) { return Array({1, 1}, {value}); }
  static Array vec(Storage values);

  std::size_t numel() const { return v.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const;  // rank-2 only
  std::size_t cols() const;  // rank-2 only

  double& at(std::size_t i) { return v[i]; }
  double at(std::size_t i) const { return v[i]; }
  double& at(std::size_t i, std::size_t j) { return v[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return v[i * cols() + j]; }

  bool same_shape(const Array& other) const { return shape == other.shape; }
  bool all_finite() const;
  std::string shape_str() const;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);

}  // namespace atoc
