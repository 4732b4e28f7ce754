#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cyto/pyramid.hpp"
#include "cyto/raster.hpp"

// Ink-mark ROI extraction: score blue-minus-red ink on the registered slide,
// gate it by the clean/inked difference when a clean image is available,
// threshold + morphology, then derive bounding boxes from skeleton
// components and crop the matching high-resolution regions.

namespace cyto {

struct InkConfig {
  int close_radius = 2;
  int open_radius = 1;
  int min_skeleton_px = 30;  // skeleton components smaller than this are noise
  int margin_px = 4;         // outward bbox dilation
};

// clean may be null; when present it must match the inked image dimensions.
BinaryMask detect_ink_mask(const RasterImage& inked_aligned, const RasterImage* clean,
                           const InkConfig& cfg);

struct RoiBox {
  int id = 0;
  NormBBox norm;
  int source_level = 0;
};

struct RoiSet {
  std::string slide_id;
  std::vector<RoiBox> boxes;  // ordered by (y0, x0)
};

RoiSet extract_roi_boxes(const BinaryMask& ink, int level, const ImagePyramid& p,
                         const InkConfig& cfg);

struct RoiCrops {
  std::vector<std::pair<RoiBox, RasterImage>> crops;
  std::vector<std::string> warnings;  // degenerate boxes skipped, etc.
};

RoiCrops crop_rois(const ImagePyramid& p, const RoiSet& rois, int target_level);

// Manifest rows: id,level,x0,y0,x1,y1 with coordinates to 6 decimals.
// Round-trips bit-exactly: read(write(x)) then write again gives identical bytes.
std::string format_roi_manifest(const RoiSet& rois);
void write_roi_manifest(const std::string& path, const RoiSet& rois);
RoiSet read_roi_manifest(const std::string& path);

}  // namespace cyto
