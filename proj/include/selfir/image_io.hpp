#pragma once

#include <string>

#include "selfir/image.hpp"

namespace selfir {

// PNG, 8- or 16-bit, gray or RGB (alpha stripped). Values scale to [0,1].
Image load_png(const std::string& path);
void save_png(const Image& img, const std::string& path, int bit_depth = 8);

// Binary tensor container for linear / raw-like float data.
// Little-endian: magic "SIRT", u32 version=1, u32 dtype (0 = f32),
// u32 ndim, u32 dims[ndim], then the row-major f32 payload.
void save_sirt(const float* data, const std::vector<std::uint32_t>& dims,
               const std::string& path);
std::vector<float> load_sirt(const std::string& path, std::vector<std::uint32_t>& dims);

void save_sirt_image(const Image& img, const std::string& path);
Image load_sirt_image(const std::string& path, ColorSpace cs);

// Dispatch by extension (.png / .sirt), tag the colorspace and center-crop
// to even dimensions. `clamp` enforces the [0,1] range; pass false when
// loading unclamped noise targets from a .sirt file.
Image load_image(const std::string& path, ColorSpace cs, bool clamp = true);
// Dispatch by extension; PNGs are written clamped, .sirt files verbatim.
void save_image(const Image& img, const std::string& path, int bit_depth = 8);

}  // namespace selfir
