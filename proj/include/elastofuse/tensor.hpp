#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <vector>

#include "elastofuse/errors.hpp"

namespace elastofuse::nn {

/// Dense row-major float tensor. Shapes follow the NCHW convention for image
/// batches; 2-D tensors are (rows, cols); 1-D are flat vectors.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(numel_of(shape_)), 0.0f);
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, float v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim() const { return static_cast<int>(shape_.size()); }
  int size(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  float& at(int a, int b) {
    assert(dim() == 2);
    return data_[static_cast<std::size_t>(a) * shape_[1] + b];
  }
  float at(int a, int b) const {
    assert(dim() == 2);
    return data_[static_cast<std::size_t>(a) * shape_[1] + b];
  }
  float& at(int a, int b, int c) {
    assert(dim() == 3);
    return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }
  float at(int a, int b, int c) const {
    assert(dim() == 3);
    return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }
  float& at(int a, int b, int c, int d) {
    assert(dim() == 4);
    return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }
  float at(int a, int b, int c, int d) const {
    assert(dim() == 4);
    return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }

  void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor reshaped(std::vector<int> shape) const {
    if (numel_of(shape) != numel())
      throw ModelError("reshape changes element count");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  static std::int64_t numel_of(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int s : shape) n *= s;
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

}  // namespace elastofuse::nn
