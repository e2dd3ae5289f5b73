#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpox {

using Index = std::int64_t;

/// Raised when operand shapes are inconsistent. The message names the
/// offending dimension.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<Index>;

inline Index shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

template <typename Scalar>
using MatrixRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

/// Dense row-major tensor of rank 1..4. Image activations are NHWC.
///
/// Production code uses Tensor<float>; Tensor<double> exists for
/// finite-difference gradient checks.
template <typename Scalar>
class Tensor {
 public:
  using value_type = Scalar;
  using MatrixMap = Eigen::Map<MatrixRM<Scalar>>;
  using ConstMatrixMap = Eigen::Map<const MatrixRM<Scalar>>;
  using ArrayMap = Eigen::Map<ArrayX<Scalar>>;
  using ConstArrayMap = Eigen::Map<const ArrayX<Scalar>>;

  Tensor() = default;

  explicit Tensor(Shape shape, Scalar fill = Scalar(0)) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_ = ArrayX<Scalar>::Constant(shape_numel(shape_), fill);
  }

  Tensor(Shape shape, std::initializer_list<Scalar> values) : Tensor(std::move(shape)) {
    if (static_cast<Index>(values.size()) != size())
      throw ShapeError("tensor initializer has " + std::to_string(values.size()) +
                       " values for shape " + shape_to_string(shape_));
    std::copy(values.begin(), values.end(), data_.data());
  }

  Tensor(Shape shape, std::span<const Scalar> values) : Tensor(std::move(shape)) {
    if (static_cast<Index>(values.size()) != size())
      throw ShapeError("tensor buffer has " + std::to_string(values.size()) +
                       " values for shape " + shape_to_string(shape_));
    std::copy(values.begin(), values.end(), data_.data());
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), Scalar(1)); }
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const { return shape_; }
  Index dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const { return shape_.size(); }
  Index size() const { return static_cast<Index>(data_.size()); }
  bool empty() const { return data_.size() == 0; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::span<Scalar> values() { return {data_.data(), static_cast<std::size_t>(data_.size())}; }
  std::span<const Scalar> values() const {
    return {data_.data(), static_cast<std::size_t>(data_.size())};
  }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  /// NHWC element access for rank-4 tensors.
  Scalar& at(Index n, Index h, Index w, Index c) { return data_[offset(n, h, w, c)]; }
  Scalar at(Index n, Index h, Index w, Index c) const { return data_[offset(n, h, w, c)]; }

  /// Rank-2 element access.
  Scalar& at(Index r, Index c) { return data_[r * shape_[1] + c]; }
  Scalar at(Index r, Index c) const { return data_[r * shape_[1] + c]; }

  ArrayX<Scalar>& array() { return data_; }
  const ArrayX<Scalar>& array() const { return data_; }

  /// View as a row-major matrix whose column count is the trailing dimension.
  MatrixMap matrix() { return MatrixMap(data_.data(), rows_for_matrix(), shape_.back()); }
  ConstMatrixMap matrix() const {
    return ConstMatrixMap(data_.data(), rows_for_matrix(), shape_.back());
  }

  Tensor reshaped(Shape shape) const {
    check_shape(shape);
    if (shape_numel(shape) != size())
      throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " +
                       shape_to_string(shape));
    Tensor out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    out.array() = data_.template cast<Other>();
    return out;
  }

  bool all_finite() const { return data_.isFinite().all(); }

  void fill(Scalar v) { data_.setConstant(v); }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && (data_ == other.data_).all();
  }

 private:
  static void check_shape(const Shape& shape) {
    if (shape.empty() || shape.size() > 4)
      throw ShapeError("tensor rank must be in [1, 4], got " + std::to_string(shape.size()));
    for (std::size_t i = 0; i < shape.size(); ++i)
      if (shape[i] <= 0)
        throw ShapeError("dimension " + std::to_string(i) + " must be positive, got " +
                         std::to_string(shape[i]));
  }

  Index rows_for_matrix() const { return shape_.empty() ? 0 : size() / shape_.back(); }

  Index offset(Index n, Index h, Index w, Index c) const {
    return ((n * shape_[1] + h) * shape_[2] + w) * shape_[3] + c;
  }

  Shape shape_;
  ArrayX<Scalar> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace mpox
