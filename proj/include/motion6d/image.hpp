#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace motion6d {

/// Row-major, channel-last float image; values nominally in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, float fill = 0.0f)
      : height_(height), width_(width), channels_(channels),
        data_(static_cast<std::size_t>(height) * width * channels, fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  float& at(int r, int c, int ch = 0) {
    assert(r >= 0 && r < height_ && c >= 0 && c < width_ && ch >= 0 && ch < channels_);
    return data_[(static_cast<std::size_t>(r) * width_ + c) * channels_ + ch];
  }
  float at(int r, int c, int ch = 0) const {
    assert(r >= 0 && r < height_ && c >= 0 && c < width_ && ch >= 0 && ch < channels_);
    return data_[(static_cast<std::size_t>(r) * width_ + c) * channels_ + ch];
  }

  float* pixel(int r, int c) { return data_.data() + (static_cast<std::size_t>(r) * width_ + c) * channels_; }
  const float* pixel(int r, int c) const {
    return data_.data() + (static_cast<std::size_t>(r) * width_ + c) * channels_;
  }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool operator==(const Image&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Channel-wise concatenation of same-sized images.
Image concat_channels(const Image& a, const Image& b);

/// Single-channel {0,1} image of pixels equal to `id` in an integer label image.
Image binary_mask_from_labels(std::span<const unsigned char> labels, int height, int width, int id);

/// Intersection over union of two masks thresholded at 0.5. Empty-vs-empty counts as 1.
double mask_iou(const Image& a, const Image& b);

/// Number of pixels >= 0.5.
long mask_area(const Image& m);

}  // namespace motion6d
