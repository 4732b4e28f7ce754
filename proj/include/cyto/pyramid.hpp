#pragma once

#include <string>
#include <vector>

#include "cyto/raster.hpp"

// Multi-level image pyramid with power-of-factor downsampling and
// cross-level coordinate mapping. Level 0 is full resolution; level k has
// dimensions ceil(level0 / factor^k) per axis. Usage mirrors scanner
// pyramids: high level = coarse, low level = fine.

namespace cyto {

struct ImagePyramid {
  std::vector<RasterImage> levels;  // level 0 first
  int factor = 2;
  double pixel_um = 0.0;  // physical pixel size at level 0; 0 = unknown

  int level_count() const { return static_cast<int>(levels.size()); }
  const RasterImage& level(int k) const;
};

// Each level k+1 is the box-filter mean of level k (round half to even).
// Throws if a requested level's parent is smaller than the factor in either
// axis (the level would not correspond to a real downsample).
ImagePyramid build_pyramid(const RasterImage& level0, int levels, int factor = 2);

// Single box-filter downsample step; edge windows cover the remaining pixels.
RasterImage downsample_box(const RasterImage& img, int factor);

// Exact pixel copy of `box` (half-open) at the given level.
RasterImage read_region(const ImagePyramid& p, int level, const BBox& box);

// Scales a box between levels by factor^(from-to). Downscaling rounds
// outward (floor mins, ceil maxes); the result is clamped to the target
// level and an empty post-clamp box is an error.
BBox map_box(const BBox& box, int from_level, int to_level, const ImagePyramid& p);

NormBBox normalize_box(const BBox& box, int level, const ImagePyramid& p);

// Outward rounding so no annotated pixel is lost; clamped to level bounds.
BBox denormalize_box(const NormBBox& nb, int level, const ImagePyramid& p);

// Pyramid directory layout: meta.txt ("width height channels levels factor
// pixel_um") plus level_<k>.png per level.
void save_pyramid(const ImagePyramid& p, const std::string& dir);
ImagePyramid load_pyramid(const std::string& dir);

}  // namespace cyto
