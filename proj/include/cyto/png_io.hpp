#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cyto/raster.hpp"

namespace cyto {

// Lossless PNG codec for the pipeline's rasters. 8-bit gray and RGB images
// round-trip exactly; palette/alpha/16-bit inputs are converted on read.
RasterImage read_png(const std::string& path);
void write_png(const std::string& path, const RasterImage& img);

// 16-bit single-channel rasters (superpixel label maps).
void write_png16(const std::string& path, const std::vector<std::uint16_t>& data, int width,
                 int height);
std::vector<std::uint16_t> read_png16(const std::string& path, int& width, int& height);

// Masks are stored as 8-bit gray PNGs with values 0/255.
void write_mask_png(const std::string& path, const BinaryMask& mask);
BinaryMask read_mask_png(const std::string& path);

}  // namespace cyto
