#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace motion6d::nn {

struct Shape {
  int n = 0;
  int c = 0;
  int h = 1;
  int w = 1;

  std::size_t numel() const { return static_cast<std::size_t>(n) * c * h * w; }
  bool operator==(const Shape&) const = default;
};

/// Dense NCHW float tensor.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape s, float fill = 0.0f) : shape_(s), data_(s.numel(), fill) {}
  Tensor(int n, int c, int h = 1, int w = 1) : Tensor(Shape{n, c, h, w}) {}

  const Shape& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> span() { return data_; }
  std::span<const float> span() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  float& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
  float at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

  /// Pointer to sample n (its C*H*W block).
  float* sample(int n) { return data_.data() + static_cast<std::size_t>(n) * shape_.c * shape_.h * shape_.w; }
  const float* sample(int n) const {
    return data_.data() + static_cast<std::size_t>(n) * shape_.c * shape_.h * shape_.w;
  }

  void fill(float v) { std::fill(data_.begin(), data_.end(), v); }
  void reshape(Shape s) {
    assert(s.numel() == data_.size());
    shape_ = s;
  }

 private:
  std::size_t index(int n, int c, int h, int w) const {
    assert(n >= 0 && n < shape_.n && c >= 0 && c < shape_.c && h >= 0 && h < shape_.h && w >= 0 && w < shape_.w);
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }

  Shape shape_;
  std::vector<float> data_;
};

/// Concatenate along channels.
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Split channels [0, ca) and [ca, C).
void split_channels(const Tensor& x, int ca, Tensor& a, Tensor& b);

void add_inplace(Tensor& y, const Tensor& x);

}  // namespace motion6d::nn
