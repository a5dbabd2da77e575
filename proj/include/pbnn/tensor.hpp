#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "pbnn/errors.hpp"

namespace pbnn {

using Shape = std::vector<std::size_t>;

/// Row-major dynamic matrix; the layout every 2-D view of a Tensor uses.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixMap = Eigen::Map<RowMatrix>;
using ConstRowMatrixMap = Eigen::Map<const RowMatrix>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles with shape metadata.
///
/// Every dimension is positive and the element count always equals the
/// product of the shape. A default-constructed tensor is a rank-0 scalar.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, Eigen::VectorXd values);
  Tensor(Shape shape, std::initializer_list<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }

  Eigen::VectorXd& values() noexcept { return values_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }

  std::span<double> flat() noexcept { return {values_.data(), size()}; }
  std::span<const double> flat() const noexcept { return {values_.data(), size()}; }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  double& operator[](std::size_t i) { return values_[static_cast<Eigen::Index>(i)]; }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

  template <typename... Idx>
  double& operator()(Idx... idx) {
    return values_[static_cast<Eigen::Index>(offset({static_cast<std::size_t>(idx)...}))];
  }
  template <typename... Idx>
  double operator()(Idx... idx) const {
    return values_[static_cast<Eigen::Index>(offset({static_cast<std::size_t>(idx)...}))];
  }

  /// Same values under a new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  /// Row-major 2-D view splitting the flat storage into `rows` x (size/rows).
  RowMatrixMap matrix(std::size_t rows);
  ConstRowMatrixMap matrix(std::size_t rows) const;

  /// View of a 2-D tensor as an image matrix.
  ConstRowMatrixMap image() const;

  bool all_finite() const { return values_.allFinite(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const;

  Shape shape_;
  Eigen::VectorXd values_;
};

/// Stacks equally-shaped tensors along a new leading axis.
Tensor stack(std::span<const Tensor> items);

/// Extracts item `n` of the leading axis.
Tensor unstack(const Tensor& batch, std::size_t n);

/// Throws ShapeError naming `what` when the shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace pbnn
