#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace phaselab {

/// Channel-major 3D array. Stored as a (channels x height*width) row-major
/// matrix so a channel is one contiguous row and convolutions map onto GEMM.
template <typename Scalar>
class Tensor3 {
 public:
  using Index = Eigen::Index;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using PlaneMap = Eigen::Map<Matrix>;
  using ConstPlaneMap = Eigen::Map<const Matrix>;

  Tensor3() = default;
  Tensor3(Index channels, Index height, Index width)
      : height_(height), width_(width), data_(Matrix::Zero(channels, height * width)) {
    if (channels < 1 || height < 1 || width < 1)
      throw std::invalid_argument("Tensor3: dimensions must be positive");
  }
  Tensor3(Matrix data, Index height, Index width) : height_(height), width_(width), data_(std::move(data)) {
    if (data_.cols() != height * width) throw std::invalid_argument("Tensor3: data/shape mismatch");
  }

  Index channels() const { return data_.rows(); }
  Index height() const { return height_; }
  Index width() const { return width_; }
  Index size() const { return data_.size(); }

  Scalar& operator()(Index c, Index y, Index x) { return data_(c, y * width_ + x); }
  Scalar operator()(Index c, Index y, Index x) const { return data_(c, y * width_ + x); }

  Matrix& matrix() { return data_; }
  const Matrix& matrix() const { return data_; }

  /// One channel viewed as a height x width grid.
  PlaneMap plane(Index c) { return PlaneMap(data_.row(c).data(), height_, width_); }
  ConstPlaneMap plane(Index c) const { return ConstPlaneMap(data_.row(c).data(), height_, width_); }

  bool same_shape(const Tensor3& other) const {
    return channels() == other.channels() && height_ == other.height_ && width_ == other.width_;
  }

  template <typename Other>
  Tensor3<Other> cast() const {
    return Tensor3<Other>(data_.template cast<Other>(), height_, width_);
  }

  std::string shape_string() const {
    return std::to_string(channels()) + "x" + std::to_string(height_) + "x" + std::to_string(width_);
  }

 private:
  Index height_ = 0;
  Index width_ = 0;
  Matrix data_;
};

}  // namespace phaselab
