#include "pbnn/tensor.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <functional>
#include <numeric>

namespace pbnn {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) { return fmt::format("[{}]", fmt::join(shape, ",")); }

namespace {

void check_dims(const Shape& shape) {
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == 0) throw ShapeError(fmt::format("dimension {} of {} is zero", i, shape_string(shape)));
  }
}

}  // namespace

Tensor::Tensor() : values_(Eigen::VectorXd::Zero(1)) {}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_dims(shape_);
  values_ = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(shape_size(shape_)), fill);
}

Tensor::Tensor(Shape shape, Eigen::VectorXd values) : shape_(std::move(shape)), values_(std::move(values)) {
  check_dims(shape_);
  if (shape_size(shape_) != size()) {
    throw ShapeError(fmt::format("shape {} needs {} values, got {}", shape_string(shape_), shape_size(shape_), size()));
  }
}

Tensor::Tensor(Shape shape, std::initializer_list<double> values)
    : Tensor(std::move(shape), Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
                                   values.begin(), static_cast<Eigen::Index>(values.size())))) {}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError(fmt::format("axis {} out of range for {}", axis, shape_string(shape_)));
  return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> idx) const {
  if (idx.size() != shape_.size()) {
    throw ShapeError(fmt::format("{} indices for tensor of rank {}", idx.size(), shape_.size()));
  }
  std::size_t off = 0;
  std::size_t axis = 0;
  for (std::size_t i : idx) {
    if (i >= shape_[axis]) throw ShapeError(fmt::format("index {} out of range on axis {}", i, axis));
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != size()) {
    throw ShapeError(fmt::format("cannot reshape {} to {}", shape_string(shape_), shape_string(shape)));
  }
  return Tensor(std::move(shape), values_);
}

RowMatrixMap Tensor::matrix(std::size_t rows) {
  if (rows == 0 || size() % rows != 0) throw ShapeError(fmt::format("cannot view {} values as {} rows", size(), rows));
  return {values_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(size() / rows)};
}

ConstRowMatrixMap Tensor::matrix(std::size_t rows) const {
  if (rows == 0 || size() % rows != 0) throw ShapeError(fmt::format("cannot view {} values as {} rows", size(), rows));
  return {values_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(size() / rows)};
}

ConstRowMatrixMap Tensor::image() const {
  if (rank() != 2) throw ShapeError(fmt::format("image view needs rank 2, got {}", shape_string(shape_)));
  return matrix(shape_[0]);
}

Tensor stack(std::span<const Tensor> items) {
  if (items.empty()) throw ShapeError("cannot stack zero tensors");
  const Shape& inner = items.front().shape();
  Shape shape{items.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  Tensor out(shape);
  const std::size_t n = items.front().size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].shape() != inner) {
      throw ShapeError(fmt::format("stack item {} has shape {}, expected {}", i, shape_string(items[i].shape()),
                                   shape_string(inner)));
    }
    std::copy_n(items[i].data(), n, out.data() + i * n);
  }
  return out;
}

Tensor unstack(const Tensor& batch, std::size_t n) {
  if (batch.rank() < 2) throw ShapeError("unstack needs rank >= 2");
  if (n >= batch.dim(0)) throw ShapeError(fmt::format("batch index {} out of range", n));
  Shape inner(batch.shape().begin() + 1, batch.shape().end());
  const std::size_t count = shape_size(inner);
  Eigen::VectorXd v = batch.values().segment(static_cast<Eigen::Index>(n * count), static_cast<Eigen::Index>(count));
  return Tensor(std::move(inner), std::move(v));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(fmt::format("{}: shape {} vs {}", what, shape_string(a.shape()), shape_string(b.shape())));
  }
}

}  // namespace pbnn
