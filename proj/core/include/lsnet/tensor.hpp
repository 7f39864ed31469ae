#pragma once
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsnet {

// Dense row-major tensor. T is float on the training path and double on the
// verification path; the two are never mixed within one computation.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(numel_of(shape), T(0)) {}
  Tensor(std::vector<int> s, std::vector<T> data) : shape(std::move(s)), v(std::move(data)) {
    if (v.size() != numel_of(shape)) throw std::invalid_argument("tensor: data size does not match shape");
  }

  static size_t numel_of(const std::vector<int>& s) {
    size_t n = 1;
    for (int d : s) {
      if (d < 0) throw std::invalid_argument("tensor: negative dimension");
      n *= static_cast<size_t>(d);
    }
    return n;
  }

  size_t numel() const { return v.size(); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }

  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  T& at(size_t i) { return v[i]; }
  const T& at(size_t i) const { return v[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

template <typename T>
std::string shape_str(const Tensor<T>& t) {
  std::string s = "[";
  for (size_t i = 0; i < t.shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(t.shape[i]);
  }
  return s + "]";
}

}  // namespace lsnet
