#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "smg/core/errors.hpp"

namespace smg {

// Dense row-major tensor, rank <= 4. Value semantics throughout; shapes are
// small so copies of the shape vector are never a concern.
template <typename S>
struct Tensor {
  std::vector<int> shape;
  std::vector<S> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> shp) : shape(std::move(shp)), data(count(shape), S(0)) {}
  Tensor(std::vector<int> shp, std::vector<S> d) : shape(std::move(shp)), data(std::move(d)) {
    if (data.size() != count(shape)) throw InputError("tensor data does not match shape");
  }

  static std::size_t count(const std::vector<int>& shp) {
    std::size_t n = 1;
    for (int d : shp) {
      if (d <= 0) throw InputError("tensor dimension must be positive");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  static Tensor zeros(std::vector<int> shp) { return Tensor(std::move(shp)); }
  static Tensor full(std::vector<int> shp, S v) {
    Tensor t(std::move(shp));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor scalar(S v) { return Tensor({1}, {v}); }

  std::size_t numel() const { return data.size(); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }

  S& operator[](std::size_t i) { return data[i]; }
  const S& operator[](std::size_t i) const { return data[i]; }

  S& at4(int a, int b, int c, int d) {
    return data[((static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d];
  }
  const S& at4(int a, int b, int c, int d) const {
    return data[((static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d];
  }
  S& at3(int a, int b, int c) {
    return data[(static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c];
  }
  const S& at3(int a, int b, int c) const {
    return data[(static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c];
  }
  S& at2(int a, int b) { return data[static_cast<std::size_t>(a) * shape[1] + b]; }
  const S& at2(int a, int b) const { return data[static_cast<std::size_t>(a) * shape[1] + b]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void fill(S v) { std::fill(data.begin(), data.end(), v); }

  Tensor reshaped(std::vector<int> shp) const {
    if (count(shp) != numel()) throw InputError("reshape element count mismatch");
    Tensor t;
    t.shape = std::move(shp);
    t.data = data;
    return t;
  }

  bool all_finite() const {
    for (S v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  S min_value() const {
    S m = data[0];
    for (S v : data) m = std::min(m, v);
    return m;
  }
  S max_value() const {
    S m = data[0];
    for (S v : data) m = std::max(m, v);
    return m;
  }
  double sum() const {
    double s = 0;
    for (S v : data) s += static_cast<double>(v);
    return s;
  }
  double mean() const { return sum() / static_cast<double>(numel()); }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> t;
    t.shape = shape;
    t.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) t.data[i] = static_cast<T>(data[i]);
    return t;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ")";
    return os.str();
  }
};

template <typename S>
inline void require_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* where) {
  if (!a.same_shape(b))
    throw InputError(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

} // namespace smg
