// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpnerf/tensor.hpp"

namespace gpnerf {

struct ImageU8 {
  int h = 0, w = 0, channels = 0;
  std::vector<uint8_t> pix;  // interleaved row-major
};

struct ImageU16 {
  int h = 0, w = 0;
  std::vector<uint16_t> pix;
};

void write_png8(const std::string& path, const ImageU8& img);
void write_png16(const std::string& path, const ImageU16& img);
ImageU8 read_png8(const std::string& path);
ImageU16 read_png16(const std::string& path);

/// [H,W,3] float in [0,1] -> 8-bit (round-to-nearest)
ImageU8 rgb_to_u8(const Tensor& rgb);
Tensor u8_to_rgb(const ImageU8& img);

ImageU8 labels_to_u8(const LabelArray& labels);
LabelArray u8_to_labels(const ImageU8& img);

/// Linear [lo,hi] -> [0,65535] quantization
ImageU16 depth_to_u16(const Tensor& depth, double lo, double hi);
Tensor u16_to_depth(const ImageU16& img, double lo, double hi);

}  // namespace gpnerf
