#include "motion6d/cropkit.hpp"

#include "motion6d/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace motion6d {

MaskStats mask_stats(const Image& mask) {
  if (mask.channels() != 1) {
    throw std::invalid_argument("mask_stats expects a single-channel mask");
  }
  double sr = 0.0, sc = 0.0, srr = 0.0, scc = 0.0;
  long n = 0;
  for (int r = 0; r < mask.height(); ++r) {
    const float* row = mask.pixel(r, 0);
    for (int c = 0; c < mask.width(); ++c) {
      if (row[c] >= 0.5f) {
        sr += r;
        sc += c;
        srr += static_cast<double>(r) * r;
        scc += static_cast<double>(c) * c;
        ++n;
      }
    }
  }
  if (n == 0) {
    throw EmptyMask("mask has no foreground pixels");
  }
  MaskStats s;
  s.pixel_count = n;
  s.centroid_row = sr / n;
  s.centroid_col = sc / n;
  s.std_row = std::sqrt(std::max(0.0, srr / n - s.centroid_row * s.centroid_row));
  s.std_col = std::sqrt(std::max(0.0, scc / n - s.centroid_col * s.centroid_col));
  return s;
}

CropSpec translation_crop(const MaskStats& prev, int image_h, int /*image_w*/, int out_size) {
  const double side = kTranslationCropFraction * image_h;
  return {prev.centroid_row, prev.centroid_col, side, side, out_size};
}

CropSpec rotation_crop(const MaskStats& stats, int out_size) {
  const double sr = std::max(stats.std_row, 1.0);
  const double sc = std::max(stats.std_col, 1.0);
  return {stats.centroid_row, stats.centroid_col, 2.0 * kRotationCropSigmas * sr, 2.0 * kRotationCropSigmas * sc,
          out_size};
}

bool rotation_crop_degenerate(const MaskStats& stats) { return stats.std_row < 1.0 || stats.std_col < 1.0; }

namespace {

struct Tap {
  int i0;
  int i1;
  float w0;
  float w1;
};

Tap make_tap(double x) {
  const double f = std::floor(x);
  const float frac = static_cast<float>(x - f);
  const int i0 = static_cast<int>(f);
  return {i0, i0 + 1, 1.0f - frac, frac};
}

}  // namespace

Image extract_crop(const Image& image, const CropSpec& spec) {
  const int n = spec.out_size;
  const int ch = image.channels();
  const int H = image.height();
  const int W = image.width();
  Image out(n, n, ch);
  std::vector<Tap> cols(n);
  for (int j = 0; j < n; ++j) cols[j] = make_tap(spec.source_col(j));

  for (int i = 0; i < n; ++i) {
    const Tap tr = make_tap(spec.source_row(i));
    for (int j = 0; j < n; ++j) {
      const Tap& tc = cols[j];
      float* dst = out.pixel(i, j);
      const int rr[2] = {tr.i0, tr.i1};
      const float wr[2] = {tr.w0, tr.w1};
      const int cc[2] = {tc.i0, tc.i1};
      const float wc[2] = {tc.w0, tc.w1};
      for (int a = 0; a < 2; ++a) {
        if (rr[a] < 0 || rr[a] >= H || wr[a] == 0.0f) continue;
        for (int b = 0; b < 2; ++b) {
          if (cc[b] < 0 || cc[b] >= W || wc[b] == 0.0f) continue;
          const float w = wr[a] * wc[b];
          const float* src = image.pixel(rr[a], cc[b]);
          for (int k = 0; k < ch; ++k) dst[k] += w * src[k];
        }
      }
    }
  }
  return out;
}

Image paste_crop(const Image& crop, const CropSpec& spec, int image_h, int image_w) {
  if (crop.channels() != 1 || crop.height() != spec.out_size || crop.width() != spec.out_size) {
    throw std::invalid_argument("paste_crop: crop shape does not match spec");
  }
  Image out(image_h, image_w, 1);
  const int n = spec.out_size;
  const double top = spec.center_row - 0.5 * spec.height;
  const double left = spec.center_col - 0.5 * spec.width;
  const int r_begin = std::max(0, static_cast<int>(std::ceil(top)));
  const int r_end = std::min(image_h - 1, static_cast<int>(std::floor(top + spec.height)));
  const int c_begin = std::max(0, static_cast<int>(std::ceil(left)));
  const int c_end = std::min(image_w - 1, static_cast<int>(std::floor(left + spec.width)));
  const double sy = n / spec.height;
  const double sx = n / spec.width;
  auto clampi = [n](int v) { return std::clamp(v, 0, n - 1); };
  for (int r = r_begin; r <= r_end; ++r) {
    const Tap tr = make_tap((r - top) * sy - 0.5);
    const int r0 = clampi(tr.i0), r1 = clampi(tr.i1);
    for (int c = c_begin; c <= c_end; ++c) {
      const Tap tc = make_tap((c - left) * sx - 0.5);
      const int c0 = clampi(tc.i0), c1 = clampi(tc.i1);
      out.at(r, c) = tr.w0 * (tc.w0 * crop.at(r0, c0) + tc.w1 * crop.at(r0, c1)) +
                     tr.w1 * (tc.w0 * crop.at(r1, c0) + tc.w1 * crop.at(r1, c1));
    }
  }
  return out;
}

Image add_coord_channels(const Image& square) {
  if (square.height() != square.width()) {
    throw std::invalid_argument("add_coord_channels expects a square image");
  }
  const int n = square.height();
  const int ch = square.channels();
  Image out(n, n, ch + 2);
  auto coord = [n](int i) { return n == 1 ? 0.0f : static_cast<float>(-1.0 + 2.0 * i / (n - 1)); };
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const float* src = square.pixel(r, c);
      float* dst = out.pixel(r, c);
      for (int k = 0; k < ch; ++k) dst[k] = src[k];
      dst[ch] = coord(r);
      dst[ch + 1] = coord(c);
    }
  }
  return out;
}

}  // namespace motion6d
