#include "styleforge/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace styleforge {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, real fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<real> values) : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_size(shape_)) {
    throw std::invalid_argument("tensor value count " + std::to_string(data_.size()) +
                                " does not match shape " + shape_string(shape_));
  }
}

int Tensor::dim(int axis) const {
  if (axis < 0 || axis >= rank()) {
    throw std::out_of_range("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape_));
  }
  return shape_[static_cast<std::size_t>(axis)];
}

real& Tensor::at(int row, int col) { return data_[static_cast<std::size_t>(row) * shape_[1] + col]; }
real Tensor::at(int row, int col) const { return data_[static_cast<std::size_t>(row) * shape_[1] + col]; }

real& Tensor::at(int n, int c, int h, int w) {
  return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}
real Tensor::at(int n, int c, int h, int w) const {
  return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

void Tensor::fill(real value) { std::fill(data_.begin(), data_.end(), value); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw std::invalid_argument("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::slice_batch(int begin, int count) const {
  if (rank() == 0 || begin < 0 || count < 0 || begin + count > shape_[0]) {
    throw std::out_of_range("batch slice out of range for shape " + shape_string(shape_));
  }
  Shape out_shape = shape_;
  out_shape[0] = count;
  const std::size_t stride = data_.size() / std::max(shape_[0], 1);
  std::vector<real> out(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                        data_.begin() + static_cast<std::ptrdiff_t>((begin + count) * stride));
  return Tensor(std::move(out_shape), std::move(out));
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw std::invalid_argument("shape mismatch in += : " + shape_string(shape_) + " vs " + shape_string(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(real factor) {
  for (auto& v : data_) v *= factor;
  return *this;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](real v) { return std::isfinite(v); });
}

Tensor stack_batch(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("stack_batch needs at least one tensor");
  const Shape& first = parts.front().shape();
  const bool has_batch_axis = !first.empty() && first[0] == 1;
  Shape out_shape;
  if (has_batch_axis) {
    out_shape = first;
    out_shape[0] = static_cast<int>(parts.size());
  } else {
    out_shape.push_back(static_cast<int>(parts.size()));
    out_shape.insert(out_shape.end(), first.begin(), first.end());
  }
  std::vector<real> values;
  values.reserve(shape_size(out_shape));
  for (const auto& p : parts) {
    if (p.shape() != first) throw std::invalid_argument("stack_batch: inconsistent shapes");
    values.insert(values.end(), p.values().begin(), p.values().end());
  }
  return Tensor(std::move(out_shape), std::move(values));
}

real max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("max_abs_diff: shape mismatch");
  real m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

real mean_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("mean_abs_diff: shape mismatch");
  if (a.size() == 0) return 0;
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(static_cast<double>(a[i]) - b[i]);
  return static_cast<real>(s / static_cast<double>(a.size()));
}

}  // namespace styleforge
