#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "dgnet/common.hpp"

namespace dgnet {

// Dense row-major nd-array of doubles. Ranks used in practice: 1 (bias,
// feature vectors), 3 (C,H,W activations) and 4 (Cout,Cin,Kh,Kw weights).
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(count(shape_), 0.0);
  }

  Tensor(std::vector<int> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count(shape_))
      throw ShapeMismatchError("Tensor: data size does not match shape");
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // (c, y, x) indexing for rank-3 tensors.
  double& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  const double& at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }

  // (o, i, ky, kx) indexing for rank-4 tensors.
  double& at(int o, int i, int ky, int kx) {
    return data_[((static_cast<std::size_t>(o) * shape_[1] + i) * shape_[2] + ky) * shape_[3] +
                 kx];
  }
  const double& at(int o, int i, int ky, int kx) const {
    return data_[((static_cast<std::size_t>(o) * shape_[1] + i) * shape_[2] + ky) * shape_[3] +
                 kx];
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double sum() const {
    double acc = 0.0;
    for (double v : data_) acc += v;
    return acc;
  }

  std::string shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + ")";
  }

  static std::size_t count(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
      if (d < 0) throw ShapeMismatchError("Tensor: negative dimension");
      n *= static_cast<std::size_t>(d);
    }
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
  if (!a.same_shape(b))
    throw ShapeMismatchError(std::string(where) + ": shape " + a.shape_str() + " vs " +
                             b.shape_str());
}

}  // namespace dgnet
