#pragma once
// Thin libpng wrappers: 8-bit RGB frames and 8-bit single-channel label maps.

#include "motion6d/image.hpp"

#include <string>
#include <vector>

namespace motion6d {

struct LabelImage {
  int height = 0;
  int width = 0;
  std::vector<unsigned char> labels;
};

/// Quantises [0,1] floats to 8 bits (round to nearest). 1 or 3 channels.
void write_png(const std::string& path, const Image& image);
void write_label_png(const std::string& path, const LabelImage& labels);

/// Any 8-bit PNG; grey is expanded to RGB, alpha dropped. Values scaled to [0,1].
Image read_png_rgb(const std::string& path);
LabelImage read_label_png(const std::string& path);

}  // namespace motion6d
