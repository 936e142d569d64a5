#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "xienh/error.hpp"

namespace xienh::nn {

/// Three-dimensional extent. Activations use (batch, frames, channels);
/// parameters use (kernel, in, out) for weights and (1, 1, C) for vectors.
struct Shape {
  std::size_t d0 = 1;
  std::size_t d1 = 1;
  std::size_t d2 = 1;

  std::size_t numel() const { return d0 * d1 * d2; }
  std::string str() const {
    return "(" + std::to_string(d0) + ", " + std::to_string(d1) + ", " + std::to_string(d2) + ")";
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

template <typename T>
class Tensor {
 public:
  Tensor() : shape_{0, 0, 0} {}
  explicit Tensor(Shape shape, T fill = T{}) : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    require(data_.size() == shape_.numel(), "Tensor: data length does not match shape " + shape_.str());
  }

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_.d1 + j) * shape_.d2 + k];
  }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_.d1 + j) * shape_.d2 + k];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Innermost row (i, j, :).
  std::span<T> row(std::size_t i, std::size_t j) {
    return {data_.data() + (i * shape_.d1 + j) * shape_.d2, shape_.d2};
  }
  std::span<const T> row(std::size_t i, std::size_t j) const {
    return {data_.data() + (i * shape_.d1 + j) * shape_.d2, shape_.d2};
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

}  // namespace xienh::nn
