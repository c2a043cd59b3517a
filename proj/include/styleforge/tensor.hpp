#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "styleforge/real.hpp"

namespace styleforge {

using Shape = std::vector<int>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array. Images are stored N×C×H×W, vectors N×F.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, real fill = real(0));
  Tensor(Shape shape, std::vector<real> values);

  const Shape& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int dim(int axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  real* data() noexcept { return data_.data(); }
  const real* data() const noexcept { return data_.data(); }
  std::span<real> values() noexcept { return data_; }
  std::span<const real> values() const noexcept { return data_; }

  real& operator[](std::size_t i) { return data_[i]; }
  real operator[](std::size_t i) const { return data_[i]; }

  real& at(int row, int col);
  real at(int row, int col) const;
  real& at(int n, int c, int h, int w);
  real at(int n, int c, int h, int w) const;

  void fill(real value);
  Tensor reshaped(Shape shape) const;

  /// Rows [begin, begin + count) along axis 0.
  Tensor slice_batch(int begin, int count) const;
  /// Single sample along axis 0 with the leading dimension kept (1×...).
  Tensor sample(int index) const { return slice_batch(index, 1); }

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(real factor);

  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<real> data_;
};

/// Stacks equally-shaped tensors along a new leading axis, or along the
/// existing one when every part already has a leading batch dimension of 1.
Tensor stack_batch(const std::vector<Tensor>& parts);

real max_abs_diff(const Tensor& a, const Tensor& b);
real mean_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace styleforge
