#include "cyto/inkroi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace cyto {

BinaryMask detect_ink_mask(const RasterImage& inked_aligned, const RasterImage* clean,
                           const InkConfig& cfg) {
  require_valid(inked_aligned, "detect_ink_mask");
  if (inked_aligned.channels != 3)
    throw std::invalid_argument("detect_ink_mask: inked image must be RGB");

  // blue minus red isolates the marker ink
  RasterImage score = channel_subtract(inked_aligned, 2, 0);

  if (clean) {
    require_valid(*clean, "detect_ink_mask clean");
    if (clean->width != inked_aligned.width ||
        clean->height != inked_aligned.height || clean->channels != 3)
      throw std::invalid_argument("detect_ink_mask: clean/inked dimension mismatch");
    // channel-wise difference: ink can match the clean slide in luminance
    RasterImage diff = RasterImage::make(inked_aligned.width, inked_aligned.height, 1);
    const std::size_t n = diff.pixels.size();
    for (std::size_t i = 0; i < n; ++i) {
      int d = 0;
      for (int c = 0; c < 3; ++c)
        d = std::max(d, std::abs(int(inked_aligned.pixels[i * 3 + c]) -
                                 int(clean->pixels[i * 3 + c])));
      diff.pixels[i] = static_cast<std::uint8_t>(d);
    }
    BinaryMask gate = otsu_threshold(diff).mask;
    for (std::size_t i = 0; i < n; ++i)
      if (!gate.bits[i]) score.pixels[i] = 0;
  }

  BinaryMask mask = otsu_threshold(score).mask;
  if (mask.count() == 0) return mask;
  mask = morphology(mask, MorphOp::Close, cfg.close_radius);
  mask = morphology(mask, MorphOp::Open, cfg.open_radius);
  return mask;
}

RoiSet extract_roi_boxes(const BinaryMask& ink, int level, const ImagePyramid& p,
                         const InkConfig& cfg) {
  const RasterImage& lvl = p.level(level);
  if (ink.width != lvl.width || ink.height != lvl.height)
    throw std::invalid_argument("extract_roi_boxes: mask does not match level dimensions");

  BinaryMask skel = skeletonize(ink);
  auto comps = connected_components(skel);

  RoiSet out;
  for (const Component& c : comps) {
    if (c.area < cfg.min_skeleton_px) continue;
    BBox b{std::max(0, c.bbox.x0 - cfg.margin_px), std::max(0, c.bbox.y0 - cfg.margin_px),
           std::min(lvl.width, c.bbox.x1 + cfg.margin_px),
           std::min(lvl.height, c.bbox.y1 + cfg.margin_px)};
    RoiBox rb;
    rb.norm = normalize_box(b, level, p);
    rb.source_level = level;
    out.boxes.push_back(rb);
  }
  std::sort(out.boxes.begin(), out.boxes.end(), [](const RoiBox& a, const RoiBox& b) {
    if (a.norm.y0 != b.norm.y0) return a.norm.y0 < b.norm.y0;
    return a.norm.x0 < b.norm.x0;
  });
  for (std::size_t i = 0; i < out.boxes.size(); ++i) out.boxes[i].id = static_cast<int>(i);
  return out;
}

RoiCrops crop_rois(const ImagePyramid& p, const RoiSet& rois, int target_level) {
  p.level(target_level);  // validates
  RoiCrops out;
  for (const RoiBox& rb : rois.boxes) {
    BBox b;
    try {
      b = denormalize_box(rb.norm, target_level, p);
    } catch (const std::exception& e) {
      out.warnings.push_back("roi " + std::to_string(rb.id) + " skipped: " + e.what());
      continue;
    }
    out.crops.emplace_back(rb, read_region(p, target_level, b));
  }
  return out;
}

std::string format_roi_manifest(const RoiSet& rois) {
  std::string out;
  char buf[200];
  for (const RoiBox& rb : rois.boxes) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%.6f,%.6f,%.6f\n", rb.id, rb.source_level,
                  rb.norm.x0, rb.norm.y0, rb.norm.x1, rb.norm.y1);
    out += buf;
  }
  return out;
}

void write_roi_manifest(const std::string& path, const RoiSet& rois) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_roi_manifest: cannot open " + path);
  f << format_roi_manifest(rois);
}

RoiSet read_roi_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_roi_manifest: cannot open " + path);
  RoiSet out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    RoiBox rb;
    if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%lf,%lf", &rb.id, &rb.source_level, &rb.norm.x0,
                    &rb.norm.y0, &rb.norm.x1, &rb.norm.y1) != 6)
      throw std::runtime_error("read_roi_manifest: " + path + ": malformed line " +
                               std::to_string(lineno));
    if (!rb.norm.valid())
      throw std::runtime_error("read_roi_manifest: " + path + ": invalid box on line " +
                               std::to_string(lineno));
    out.boxes.push_back(rb);
  }
  return out;
}

}  // namespace cyto
