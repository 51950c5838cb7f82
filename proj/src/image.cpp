#include "motion6d/image.hpp"

#include <stdexcept>

namespace motion6d {

Image concat_channels(const Image& a, const Image& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw std::invalid_argument("concat_channels: size mismatch");
  }
  Image out(a.height(), a.width(), a.channels() + b.channels());
  for (int r = 0; r < a.height(); ++r) {
    for (int c = 0; c < a.width(); ++c) {
      float* dst = out.pixel(r, c);
      const float* pa = a.pixel(r, c);
      const float* pb = b.pixel(r, c);
      for (int k = 0; k < a.channels(); ++k) dst[k] = pa[k];
      for (int k = 0; k < b.channels(); ++k) dst[a.channels() + k] = pb[k];
    }
  }
  return out;
}

Image binary_mask_from_labels(std::span<const unsigned char> labels, int height, int width, int id) {
  Image m(height, width, 1);
  auto d = m.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = labels[i] == id ? 1.0f : 0.0f;
  }
  return m;
}

double mask_iou(const Image& a, const Image& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("mask_iou: size mismatch");
  }
  long inter = 0;
  long uni = 0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const bool x = da[i] >= 0.5f;
    const bool y = db[i] >= 0.5f;
    inter += (x && y);
    uni += (x || y);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

long mask_area(const Image& m) {
  long n = 0;
  for (float v : m.data()) n += v >= 0.5f;
  return n;
}

}  // namespace motion6d
