#ifndef FORMCAST_TENSOR_HPP
#define FORMCAST_TENSOR_HPP

#include <Eigen/Core>

#include <array>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace formcast::nn {

using Index = Eigen::Index;

/// Up to four extents; network tensors use (batch, channel, height, width).
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<Index> dims) {
    if (dims.size() == 0 || dims.size() > 4) throw std::invalid_argument("tensor rank must be 1..4");
    rank_ = static_cast<int>(dims.size());
    int k = 0;
    for (Index d : dims) {
      if (d < 0) throw std::invalid_argument("negative tensor extent");
      dims_[k++] = d;
    }
  }
  explicit Shape(const std::vector<Index>& dims) {
    if (dims.empty() || dims.size() > 4) throw std::invalid_argument("tensor rank must be 1..4");
    rank_ = static_cast<int>(dims.size());
    for (int k = 0; k < rank_; ++k) {
      if (dims[static_cast<std::size_t>(k)] < 0) throw std::invalid_argument("negative tensor extent");
      dims_[k] = dims[static_cast<std::size_t>(k)];
    }
  }

  int rank() const { return rank_; }
  Index operator[](int k) const { return dims_.at(static_cast<std::size_t>(k)); }
  Index size() const {
    Index s = 1;
    for (int k = 0; k < rank_; ++k) s *= dims_[k];
    return rank_ == 0 ? 0 : s;
  }
  std::vector<Index> dims() const { return {dims_.begin(), dims_.begin() + rank_}; }

  // NCHW accessors; only meaningful for rank-4 shapes.
  Index n() const { return dims_[0]; }
  Index c() const { return dims_[1]; }
  Index h() const { return dims_[2]; }
  Index w() const { return dims_[3]; }

  bool operator==(const Shape& o) const {
    if (rank_ != o.rank_) return false;
    for (int k = 0; k < rank_; ++k) {
      if (dims_[k] != o.dims_[k]) return false;
    }
    return true;
  }

  std::string str() const {
    std::string s = "(";
    for (int k = 0; k < rank_; ++k) s += (k ? "x" : "") + std::to_string(dims_[k]);
    return s + ")";
  }

 private:
  std::array<Index, 4> dims_{0, 0, 0, 0};
  int rank_ = 0;
};

/// Dense contiguous array with value semantics. Row-major over the shape.
template <typename Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Tensor() = default;
  explicit Tensor(const Shape& shape) : shape_(shape), data_(Array::Zero(shape.size())) {}
  Tensor(const Shape& shape, Scalar fill) : shape_(shape), data_(Array::Constant(shape.size(), fill)) {}
  Tensor(const Shape& shape, Array data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) throw std::invalid_argument("tensor data does not match shape " + shape_.str());
  }

  const Shape& shape() const { return shape_; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  Array& array() { return data_; }
  const Array& array() const { return data_; }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  /// Element (n, c, y, x) of a rank-4 tensor.
  Scalar& at(Index n, Index c, Index y, Index x) {
    return data_[((n * shape_.c() + c) * shape_.h() + y) * shape_.w() + x];
  }
  Scalar at(Index n, Index c, Index y, Index x) const {
    return data_[((n * shape_.c() + c) * shape_.h() + y) * shape_.w() + x];
  }

  /// rows x cols row-major view of the storage.
  Eigen::Map<Matrix> matrix(Index rows, Index cols) { return {data_.data(), rows, cols}; }
  Eigen::Map<const Matrix> matrix(Index rows, Index cols) const { return {data_.data(), rows, cols}; }

  Tensor reshaped(const Shape& s) const {
    if (s.size() != size()) throw std::invalid_argument("reshape changes element count");
    return Tensor(s, data_);
  }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  void set_zero() { data_.setZero(); }

 private:
  Shape shape_;
  Array data_;
};

}  // namespace formcast::nn

#endif  // FORMCAST_TENSOR_HPP
