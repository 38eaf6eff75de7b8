#pragma once

#include <string>
#include <vector>

#include "facet/align.hpp"

namespace facet::img {

// Binary PPM/PGM (P6 8-bit RGB, P5 8-bit gray).
align::ImageF32 read_pnm(const std::string& path);
void write_pnm(const align::ImageF32& image, const std::string& path);

// Raw float tensor container ("FTEN"): magic, u32 version, u32 ndim,
// u32 dims[], f32 data, all little-endian.
struct FloatTensor {
  std::vector<int> shape;
  std::vector<float> data;
};

FloatTensor read_ften(const std::string& path);
void write_ften(const FloatTensor& tensor, const std::string& path);

align::ImageF32 image_from_ften(const FloatTensor& t);  // rank-3 (c, h, w)
FloatTensor ften_from_image(const align::ImageF32& image);

}  // namespace facet::img
