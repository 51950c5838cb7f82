#include "motion6d/pngio.hpp"

#include "motion6d/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace motion6d {

namespace {

using FilePtr = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode), &std::fclose);
  if (!f) throw IoError("cannot open " + path);
  return f;
}

void write_rows(const std::string& path, int height, int width, int color_type,
                const std::vector<unsigned char>& bytes) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng init failed for " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng write failed for " + path);
  }
  png_init_io(png, f.get());
  // Fast deflate: archives are written once per sequence and read many times.
  png_set_compression_level(png, 3);
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  for (int r = 0; r < height; ++r) {
    png_write_row(png, const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(r) * width * channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct Decoded {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<unsigned char> bytes;
};

Decoded read_rows(const std::string& path, bool want_gray) {
  FilePtr f = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) throw IoError(path + ": not a PNG");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng init failed for " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng read failed for " + path);
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (want_gray) {
    if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_destroy_read_struct(&png, &info, nullptr);
      throw IoError(path + ": label image must be greyscale");
    }
  } else if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_read_update_info(png, info);
  Decoded d;
  d.height = static_cast<int>(png_get_image_height(png, info));
  d.width = static_cast<int>(png_get_image_width(png, info));
  d.channels = png_get_channels(png, info);
  d.bytes.resize(static_cast<std::size_t>(d.height) * d.width * d.channels);
  std::vector<png_bytep> rows(d.height);
  for (int r = 0; r < d.height; ++r) rows[r] = d.bytes.data() + static_cast<std::size_t>(r) * d.width * d.channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return d;
}

}  // namespace

void write_png(const std::string& path, const Image& image) {
  if (image.channels() != 1 && image.channels() != 3) throw IoError("write_png needs 1 or 3 channels");
  std::vector<unsigned char> bytes(image.size());
  const auto src = image.data();
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(src[i], 0.0f, 1.0f) * 255.0f));
  }
  write_rows(path, image.height(), image.width(), image.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
             bytes);
}

void write_label_png(const std::string& path, const LabelImage& labels) {
  write_rows(path, labels.height, labels.width, PNG_COLOR_TYPE_GRAY, labels.labels);
}

Image read_png_rgb(const std::string& path) {
  const Decoded d = read_rows(path, false);
  Image img(d.height, d.width, 3);
  auto dst = img.data();
  for (std::size_t i = 0; i < d.bytes.size(); ++i) dst[i] = d.bytes[i] / 255.0f;
  return img;
}

LabelImage read_label_png(const std::string& path) {
  Decoded d = read_rows(path, true);
  return {d.height, d.width, std::move(d.bytes)};
}

}  // namespace motion6d
