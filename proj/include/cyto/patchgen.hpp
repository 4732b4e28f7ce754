#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cyto/label.hpp"
#include "cyto/raster.hpp"

// Sliding-window patch extraction from ROI crops, background filtering,
// abnormal/normal labeling against a hand-drawn abnormal-cell mask,
// centroid-centered abnormal patches and the balanced dataset split.

namespace cyto {

struct PatchConfig {
  int size = 128;
  int stride = 64;
  int white_cutoff = 200;        // min-channel >= cutoff counts as background
  double bg_discard = 0.75;      // patches with bg_fraction > this are dropped
  double abn_threshold = 0.20;   // strictly-greater rule
};

struct PatchWindow {
  int x = 0, y = 0;
  RasterImage image;
};

// Row-major fully-contained windows at (i*stride, j*stride). An ROI smaller
// than one window yields an empty sequence (callers warn).
std::vector<PatchWindow> sliding_patches(const RasterImage& roi, int size = 128, int stride = 64);

double background_fraction(const RasterImage& patch, int white_cutoff = 200);

struct LabelResult {
  double abn_fraction = 0;
  ClassLabel label = ClassLabel::Normal;
};

// abn_fraction = set mask pixels inside the window / size^2; label Abnormal
// iff strictly greater than the threshold.
LabelResult label_patch(int origin_x, int origin_y, int size, const BinaryMask& abnormal_mask,
                        double abn_threshold = 0.20);

struct PatchRecord {
  int roi_id = 0;
  int x = 0, y = 0;
  int size = 128;
  RasterImage image;
  double bg_fraction = 0;
  double abn_fraction = 0;
  ClassLabel label = ClassLabel::Normal;
};

// Full extraction for one ROI crop: slide, filter background, label.
// abnormal_mask may be null (everything labels Normal).
std::vector<PatchRecord> extract_patches(const RasterImage& roi, const BinaryMask* abnormal_mask,
                                         int roi_id, const PatchConfig& cfg, int threads = 1);

// One window per abnormal-mask component, centered on its centroid and
// shifted minimally inside the ROI; all labeled Abnormal.
std::vector<PatchRecord> centroid_patches(const BinaryMask& abnormal_mask, const RasterImage& roi,
                                          int roi_id, const PatchConfig& cfg);

// Split machinery operates on id+label references, not pixel data.
struct LabeledId {
  std::string id;
  ClassLabel label = ClassLabel::Normal;
};

struct SplitConfig {
  // per-class patch counts; defaults reproduce the published split
  int train_per_class = 1200;
  int val_per_class = 200;
  int test_per_class = 660;
  // external (single-cell) records go to train/validation only
  int ext_train_normal = 196;
  int ext_val_normal = 46;
  int ext_train_abnormal = 560;
  int ext_val_abnormal = 115;
};

struct SplitEntry {
  std::string id;
  ClassLabel label = ClassLabel::Normal;
  bool external = false;
};

struct DatasetSplit {
  std::vector<SplitEntry> train, validation, test;
  std::uint64_t seed = 0;
};

// Keeps all abnormal patches (count A), samples A normal patches without
// replacement, partitions both pools per SplitConfig (counts must consume
// the pools exactly) and shuffles each manifest deterministically.
DatasetSplit balance_and_split(const std::vector<LabeledId>& patches,
                               const std::vector<LabeledId>& external, const SplitConfig& cfg,
                               std::uint64_t seed);

// Manifest rows: patch_path,roi_id,origin_x,origin_y,label,abn_fraction,bg_fraction
// (fractions to 5 decimals). patch_path follows roi<k>_x<ox>_y<oy>.png.
std::string patch_file_name(int roi_id, int x, int y);
std::string format_patch_manifest_row(const std::string& path, const PatchRecord& r);
std::string patch_manifest_header();

struct PatchManifestRow {
  std::string path;
  int roi_id = 0, x = 0, y = 0;
  ClassLabel label = ClassLabel::Normal;
  double abn_fraction = 0, bg_fraction = 0;
};
std::vector<PatchManifestRow> read_patch_manifest(const std::string& path);

std::vector<LabeledId> read_labeled_ids(const std::string& path);  // id,label rows
void write_split_manifest(const std::string& path, const std::vector<SplitEntry>& entries);
std::vector<SplitEntry> read_split_manifest(const std::string& path);

}  // namespace cyto
