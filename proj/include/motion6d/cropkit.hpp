#pragma once

// Crop windows derived from object masks, bilinear resampling to square
// network inputs, and CoordConv-style coordinate channels.
//
// Continuous image coordinates put pixel (r, c) at its center (r, c); a crop
// window covers [center - extent/2, center + extent/2] along each axis.

#include "motion6d/image.hpp"

namespace motion6d {

inline constexpr int kDefaultCropSize = 64;
inline constexpr double kTranslationCropFraction = 0.4;
inline constexpr double kRotationCropSigmas = 2.1;

struct MaskStats {
  double centroid_row = 0.0;
  double centroid_col = 0.0;
  double std_row = 0.0;
  double std_col = 0.0;
  long pixel_count = 0;
};

struct CropSpec {
  double center_row = 0.0;
  double center_col = 0.0;
  double height = 1.0;
  double width = 1.0;
  int out_size = kDefaultCropSize;

  /// Source coordinate sampled by output pixel (i, j).
  double source_row(int i) const { return center_row - 0.5 * height + (i + 0.5) * height / out_size; }
  double source_col(int j) const { return center_col - 0.5 * width + (j + 0.5) * width / out_size; }
};

/// Foreground moments of a mask thresholded at 0.5. Throws EmptyMask.
MaskStats mask_stats(const Image& mask);

/// Fixed square window (side 0.4 * image height) on the previous frame's centroid.
CropSpec translation_crop(const MaskStats& prev, int image_h, int image_w, int out_size = kDefaultCropSize);

/// Tight window with half-extent 2.1 sigma per axis; sigmas below one pixel are clamped to one.
CropSpec rotation_crop(const MaskStats& stats, int out_size = kDefaultCropSize);

/// True when either sigma is below the one-pixel clamp.
bool rotation_crop_degenerate(const MaskStats& stats);

/// Bilinear resample of the window to out_size x out_size; samples outside the image read 0.
Image extract_crop(const Image& image, const CropSpec& spec);

/// Inverse of extract_crop for a single-channel crop: bilinear back-projection onto a
/// zero canvas of the full image size. Pixels outside the window stay 0.
Image paste_crop(const Image& crop, const CropSpec& spec, int image_h, int image_w);

/// Appends normalised row and column index channels in [-1, 1] (a 1-pixel axis maps to 0).
Image add_coord_channels(const Image& square);

}  // namespace motion6d
