#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace attrgen {

/// Extents of a dense tensor, up to rank 4 with slot semantics
/// (height, width, channels, batch). Missing trailing extents act as 1.
class Shape {
 public:
  Shape() = default;

  Shape(std::initializer_list<int> extents)
      : Shape(std::vector<int>(extents.begin(), extents.end())) {}

  explicit Shape(const std::vector<int>& extents) {
    if (extents.size() > 4) throw std::invalid_argument("Shape: rank > 4");
    for (int e : extents) {
      if (e <= 0) throw std::invalid_argument("Shape: non-positive extent " + std::to_string(e));
      ext_[rank_++] = e;
    }
  }

  int rank() const { return rank_; }
  int extent(int axis) const { return axis < rank_ ? ext_[axis] : 1; }

  int height() const { return extent(0); }
  int width() const { return extent(1); }
  int channels() const { return extent(2); }
  int batch() const { return extent(3); }

  std::int64_t count() const {
    std::int64_t n = 1;
    for (int i = 0; i < rank_; ++i) n *= ext_[i];
    return n;
  }

  bool operator==(const Shape& o) const {
    for (int i = 0; i < 4; ++i)
      if (extent(i) != o.extent(i)) return false;
    return true;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    if (rank_ == 0) return "()";
    std::ostringstream os;
    for (int i = 0; i < rank_; ++i) {
      if (i) os << 'x';
      os << ext_[i];
    }
    return os.str();
  }

 private:
  std::array<int, 4> ext_{1, 1, 1, 1};
  int rank_ = 0;
};

/// Dense rank-<=4 tensor with contiguous storage. Element (y, x, c, n) lives at
/// ((n*C + c)*H + y)*W + x, so x is fastest and each (n, c) plane is contiguous.
/// Scalar is float for training and double for gradient checking.
template <typename S>
class Tensor {
 public:
  using Scalar = S;
  using Storage = Eigen::Array<S, Eigen::Dynamic, 1>;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(shape), data_(Storage::Zero(shape.count())) {}

  static Tensor zeros(Shape shape) { return Tensor(shape); }

  static Tensor constant(Shape shape, S value) {
    Tensor t(shape);
    t.data_.setConstant(value);
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::int64_t size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }

  S& operator()(int y, int x = 0, int c = 0, int n = 0) { return data_[index(y, x, c, n)]; }
  S operator()(int y, int x = 0, int c = 0, int n = 0) const { return data_[index(y, x, c, n)]; }

  S& operator[](std::int64_t i) { return data_[i]; }
  S operator[](std::int64_t i) const { return data_[i]; }

  /// Flat view for elementwise Eigen expressions.
  Storage& array() { return data_; }
  const Storage& array() const { return data_; }

  bool all_finite() const { return data_.isFinite().all(); }

  bool same_bits(const Tensor& o) const {
    return shape_ == o.shape_ && std::memcmp(data(), o.data(), sizeof(S) * size()) == 0;
  }

 private:
  std::int64_t index(int y, int x, int c, int n) const {
    return ((static_cast<std::int64_t>(n) * shape_.channels() + c) * shape_.height() + y) *
               shape_.width() +
           x;
  }

  Shape shape_;
  Storage data_;
};

template <typename S>
void require_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* where) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(where) + ": shape mismatch " + a.shape().str() +
                                " vs " + b.shape().str());
}

}  // namespace attrgen
