// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include "gpnerf/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace gpnerf {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

[[noreturn]] void fail(const std::string& path, const char* what) {
  throw Error("png: " + std::string(what) + ": " + path);
}

}  // namespace

void write_png8(const std::string& path, const ImageU8& img) {
  GPNERF_CHECK(img.channels == 1 || img.channels == 3, "png8 supports 1 or 3 channels");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail(path, "cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(path, "write error");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.w, img.h, 8,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(img.h);
  for (int y = 0; y < img.h; ++y)
    rows[y] = const_cast<png_bytep>(img.pix.data() + (size_t)y * img.w * img.channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_png16(const std::string& path, const ImageU16& img) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail(path, "cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(path, "write error");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.w, img.h, 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  // PNG stores 16-bit samples big-endian.
  std::vector<uint8_t> row((size_t)img.w * 2);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      const uint16_t v = img.pix[(size_t)y * img.w + x];
      row[2 * x] = (uint8_t)(v >> 8);
      row[2 * x + 1] = (uint8_t)(v & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageU8 read_png8(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail(path, "cannot open");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "corrupt file");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (bit_depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "expected 8-bit png");
  }
  png_set_palette_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  ImageU8 img;
  img.w = (int)png_get_image_width(png, info);
  img.h = (int)png_get_image_height(png, info);
  img.channels = (int)png_get_channels(png, info);
  img.pix.resize((size_t)img.h * img.w * img.channels);
  std::vector<png_bytep> rows(img.h);
  for (int y = 0; y < img.h; ++y)
    rows[y] = img.pix.data() + (size_t)y * img.w * img.channels;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

ImageU16 read_png16(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail(path, "cannot open");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "corrupt file");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  if (png_get_bit_depth(png, info) != 16 ||
      png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "expected 16-bit grayscale png");
  }
  ImageU16 img;
  img.w = (int)png_get_image_width(png, info);
  img.h = (int)png_get_image_height(png, info);
  img.pix.resize((size_t)img.h * img.w);
  std::vector<uint8_t> row((size_t)img.w * 2);
  for (int y = 0; y < img.h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < img.w; ++x)
      img.pix[(size_t)y * img.w + x] =
          (uint16_t)((row[2 * x] << 8) | row[2 * x + 1]);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

ImageU8 rgb_to_u8(const Tensor& rgb) {
  GPNERF_CHECK(rgb.rank() == 3 && rgb.dim(2) == 3, "rgb_to_u8 expects [H,W,3]");
  ImageU8 img;
  img.h = rgb.dim(0);
  img.w = rgb.dim(1);
  img.channels = 3;
  img.pix.resize((size_t)img.h * img.w * 3);
  for (int64_t i = 0; i < rgb.numel(); ++i)
    img.pix[i] = (uint8_t)std::lround(std::clamp(rgb[i], 0.0, 1.0) * 255.0);
  return img;
}

Tensor u8_to_rgb(const ImageU8& img) {
  GPNERF_CHECK(img.channels == 3, "u8_to_rgb expects 3 channels");
  Tensor rgb({img.h, img.w, 3});
  for (int64_t i = 0; i < rgb.numel(); ++i) rgb[i] = img.pix[i] / 255.0;
  return rgb;
}

ImageU8 labels_to_u8(const LabelArray& labels) {
  GPNERF_CHECK(labels.shape().size() == 2, "labels_to_u8 expects [H,W]");
  ImageU8 img;
  img.h = labels.dim(0);
  img.w = labels.dim(1);
  img.channels = 1;
  img.pix.resize((size_t)img.h * img.w);
  for (int64_t i = 0; i < labels.numel(); ++i) {
    GPNERF_CHECK(labels[i] >= 0 && labels[i] <= 255, "label exceeds 8-bit index");
    img.pix[i] = (uint8_t)labels[i];
  }
  return img;
}

LabelArray u8_to_labels(const ImageU8& img) {
  GPNERF_CHECK(img.channels == 1, "u8_to_labels expects 1 channel");
  LabelArray labels({img.h, img.w});
  for (int64_t i = 0; i < labels.numel(); ++i) labels[i] = img.pix[i];
  return labels;
}

ImageU16 depth_to_u16(const Tensor& depth, double lo, double hi) {
  GPNERF_CHECK(depth.rank() == 2, "depth_to_u16 expects [H,W]");
  GPNERF_CHECK(hi > lo, "bad depth range");
  ImageU16 img;
  img.h = depth.dim(0);
  img.w = depth.dim(1);
  img.pix.resize((size_t)img.h * img.w);
  for (int64_t i = 0; i < depth.numel(); ++i) {
    const double t = std::clamp((depth[i] - lo) / (hi - lo), 0.0, 1.0);
    img.pix[i] = (uint16_t)std::lround(t * 65535.0);
  }
  return img;
}

Tensor u16_to_depth(const ImageU16& img, double lo, double hi) {
  Tensor depth({img.h, img.w});
  for (int64_t i = 0; i < depth.numel(); ++i)
    depth[i] = lo + (hi - lo) * (img.pix[i] / 65535.0);
  return depth;
}

}  // namespace gpnerf
