#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

namespace spk {

// Dense row-major tensor. Shapes used in practice are [C,H,W] feature maps,
// [B,d] matrices and flat vectors.
template <typename T>
struct TensorT {
  std::vector<std::size_t> shape;
  std::vector<T> v;

  TensorT() = default;
  explicit TensorT(std::vector<std::size_t> s, T fill = T{})
      : shape(std::move(s)), v(count(shape), fill) {}

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }

  std::size_t size() const { return v.size(); }
  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  std::size_t dim(std::size_t i) const { return shape[i]; }

  T& operator[](std::size_t i) { return v[i]; }
  const T& operator[](std::size_t i) const { return v[i]; }

  // [rows, cols]
  T& at2(std::size_t i, std::size_t j) { return v[i * shape[1] + j]; }
  const T& at2(std::size_t i, std::size_t j) const { return v[i * shape[1] + j]; }

  // [C, H, W]
  T& at3(std::size_t c, std::size_t h, std::size_t w) {
    return v[(c * shape[1] + h) * shape[2] + w];
  }
  const T& at3(std::size_t c, std::size_t h, std::size_t w) const {
    return v[(c * shape[1] + h) * shape[2] + w];
  }

  // [N, C, K, K] conv weights
  T& at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return v[((a * shape[1] + b) * shape[2] + c) * shape[3] + d];
  }
  const T& at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return v[((a * shape[1] + b) * shape[2] + c) * shape[3] + d];
  }

  bool all_finite() const {
    for (const T& x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  void fill(T x) { std::fill(v.begin(), v.end(), x); }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  friend bool operator==(const TensorT& a, const TensorT& b) {
    return a.shape == b.shape && a.v == b.v;
  }
};

using TensorF = TensorT<float>;
using TensorD = TensorT<double>;

template <typename To, typename From>
TensorT<To> tensor_cast(const TensorT<From>& t) {
  TensorT<To> r;
  r.shape = t.shape;
  r.v.reserve(t.v.size());
  for (const From& x : t.v) r.v.push_back(static_cast<To>(x));
  return r;
}

inline std::string shape_str(const std::vector<std::size_t>& s) {
  std::string r;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) r += "x";
    r += std::to_string(s[i]);
  }
  return r;
}

}  // namespace spk
