#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>

#include "cyto/inkroi.hpp"
#include "cyto/pyramid.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace cyto;

namespace {

ImagePyramid flat_pyramid(int w, int h) {
  return build_pyramid(RasterImage::make(w, h, 1, 0), 1, 2);
}

BinaryMask ring_mask(int w, int h, double cx, double cy, double r, double thickness) {
  RasterImage img = RasterImage::make(w, h, 1, 0);
  std::uint8_t white[1] = {255};
  fixtures::draw_ring(img, cx, cy, r, thickness, white);
  BinaryMask m = BinaryMask::make(w, h, false);
  for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = img.pixels[i] > 0;
  return m;
}

}  // namespace

TEST_CASE("detect_ink_mask finds a blue stroke") {
  RasterImage clean = RasterImage::make(256, 256, 3, 180);
  RasterImage inked = clean;
  const std::uint8_t blue[3] = {40, 40, 200};
  fixtures::draw_ring(inked, 128, 128, 70, 4, blue);

  InkConfig cfg;
  BinaryMask mask = detect_ink_mask(inked, &clean, cfg);

  std::int64_t stroke = 0, stroke_hit = 0, clean_px = 0, clean_hit = 0;
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 256; ++x) {
      bool is_stroke = inked.at(x, y, 2) == 200;
      if (is_stroke) {
        ++stroke;
        stroke_hit += mask.test(x, y);
      } else {
        ++clean_px;
        clean_hit += mask.test(x, y);
      }
    }
  CHECK(double(stroke_hit) / double(stroke) >= 0.95);
  CHECK(double(clean_hit) / double(clean_px) < 0.01);
}

TEST_CASE("detect_ink_mask on identical and red-inked slides") {
  RasterImage clean = fixtures::clean_slide(21, 200, 200);
  InkConfig cfg;
  BinaryMask none = detect_ink_mask(clean, &clean, cfg);
  CHECK(double(none.count()) / (200.0 * 200.0) < 0.001);

  RasterImage red_inked = clean;
  const std::uint8_t red[3] = {200, 40, 40};
  fixtures::draw_ring(red_inked, 100, 100, 60, 4, red);
  BinaryMask red_mask = detect_ink_mask(red_inked, &clean, cfg);
  CHECK(red_mask.count() == 0);

  RasterImage small = RasterImage::make(10, 10, 3, 0);
  CHECK_THROWS(detect_ink_mask(small, &clean, cfg));  // dimension mismatch
}

TEST_CASE("extract_roi_boxes from a drawn ring") {
  ImagePyramid p = flat_pyramid(512, 512);
  BinaryMask ink = ring_mask(512, 512, 200, 150, 60, 3);
  InkConfig cfg;
  RoiSet rois = extract_roi_boxes(ink, 0, p, cfg);
  REQUIRE(rois.boxes.size() == 1);
  BBox b = denormalize_box(rois.boxes[0].norm, 0, p);
  BBox truth{140, 90, 260, 210};
  CHECK(fixtures::iou(b, truth) >= 0.8);
  CHECK(rois.boxes[0].id == 0);
  CHECK(rois.boxes[0].source_level == 0);
}

TEST_CASE("extract_roi_boxes empty and ordering") {
  ImagePyramid p = flat_pyramid(512, 512);
  InkConfig cfg;
  CHECK(extract_roi_boxes(BinaryMask::make(512, 512, false), 0, p, cfg).boxes.empty());

  BinaryMask two = ring_mask(512, 512, 400, 380, 50, 3);
  BinaryMask first = ring_mask(512, 512, 120, 100, 50, 3);
  for (std::size_t i = 0; i < two.bits.size(); ++i) two.bits[i] |= first.bits[i];
  RoiSet rois = extract_roi_boxes(two, 0, p, cfg);
  REQUIRE(rois.boxes.size() == 2);
  CHECK(rois.boxes[0].norm.y0 < rois.boxes[1].norm.y0);
  CHECK(rois.boxes[0].id == 0);
  CHECK(rois.boxes[1].id == 1);
}

TEST_CASE("small skeleton components are discarded") {
  ImagePyramid p = flat_pyramid(256, 256);
  BinaryMask ink = BinaryMask::make(256, 256, false);
  for (int x = 100; x < 110; ++x) ink.set(x, 50, true);  // 10 px fragment
  InkConfig cfg;  // min_skeleton_px = 30
  CHECK(extract_roi_boxes(ink, 0, p, cfg).boxes.empty());
}

TEST_CASE("skeleton pixels lie inside their RoiBox") {
  ImagePyramid p = flat_pyramid(300, 300);
  BinaryMask ink = ring_mask(300, 300, 150, 150, 70, 4);
  InkConfig cfg;
  RoiSet rois = extract_roi_boxes(ink, 0, p, cfg);
  REQUIRE(rois.boxes.size() == 1);
  BBox b = denormalize_box(rois.boxes[0].norm, 0, p);
  BinaryMask skel = skeletonize(ink);
  for (int y = 0; y < 300; ++y)
    for (int x = 0; x < 300; ++x)
      if (skel.test(x, y)) {
        CHECK(x >= b.x0);
        CHECK(x < b.x1);
        CHECK(y >= b.y0);
        CHECK(y < b.y1);
      }
}

TEST_CASE("re-detection inside a returned box stays inside it") {
  ImagePyramid p = flat_pyramid(400, 400);
  BinaryMask ink = ring_mask(400, 400, 180, 200, 80, 4);
  InkConfig cfg;
  RoiSet rois = extract_roi_boxes(ink, 0, p, cfg);
  REQUIRE(rois.boxes.size() == 1);
  BBox outer = denormalize_box(rois.boxes[0].norm, 0, p);

  BinaryMask restricted = BinaryMask::make(400, 400, false);
  for (int y = outer.y0; y < outer.y1; ++y)
    for (int x = outer.x0; x < outer.x1; ++x) restricted.set(x, y, ink.test(x, y));
  RoiSet again = extract_roi_boxes(restricted, 0, p, cfg);
  REQUIRE_FALSE(again.boxes.empty());
  for (const RoiBox& rb : again.boxes) {
    BBox inner = denormalize_box(rb.norm, 0, p);
    CHECK(inner.x0 >= outer.x0 - cfg.margin_px);
    CHECK(inner.y0 >= outer.y0 - cfg.margin_px);
    CHECK(inner.x1 <= outer.x1 + cfg.margin_px);
    CHECK(inner.y1 <= outer.y1 + cfg.margin_px);
  }
}

TEST_CASE("crop_rois arithmetic and id pairing") {
  RasterImage base = fixtures::clean_slide(5, 512, 512);
  ImagePyramid p = build_pyramid(base, 3, 2);

  RoiSet rois;
  RoiBox rb;
  rb.id = 0;
  rb.norm = {0.25, 0.25, 0.5, 0.5};
  rb.source_level = 2;
  rois.boxes.push_back(rb);

  RoiCrops crops = crop_rois(p, rois, 0);
  REQUIRE(crops.crops.size() == 1);
  CHECK(crops.warnings.empty());
  const RasterImage& img = crops.crops[0].second;
  CHECK(img.width == 128);
  CHECK(img.height == 128);
  CHECK(crops.crops[0].first.id == 0);
  // matches a direct read
  RasterImage direct = read_region(p, 0, {128, 128, 256, 256});
  CHECK(img.pixels == direct.pixels);

  // crop then re-normalize stays within one pixel of the original
  BBox back = denormalize_box(rois.boxes[0].norm, 0, p);
  NormBBox renorm = normalize_box(back, 0, p);
  CHECK(std::abs(renorm.x0 - 0.25) <= 1.0 / 512);
  CHECK(std::abs(renorm.y1 - 0.5) <= 1.0 / 512);
}

TEST_CASE("roi manifest round-trips bit-exactly") {
  RoiSet rois;
  fixtures::Rng rng(9);
  for (int i = 0; i < 5; ++i) {
    RoiBox rb;
    rb.id = i;
    double x0 = rng.uniform01() * 0.5, y0 = rng.uniform01() * 0.5;
    rb.norm = {x0, y0, x0 + 0.1 + rng.uniform01() * 0.3, y0 + 0.1 + rng.uniform01() * 0.3};
    rb.source_level = 7;
    rois.boxes.push_back(rb);
  }
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "cyto_test_roi";
  fs::create_directories(dir);
  std::string path = (dir / "m.csv").string();

  write_roi_manifest(path, rois);
  RoiSet back = read_roi_manifest(path);
  std::string again = format_roi_manifest(back);
  std::ifstream f(path);
  std::string original((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  CHECK(again == original);
  REQUIRE(back.boxes.size() == rois.boxes.size());
  fs::remove_all(dir);
}

TEST_CASE("roi pipeline is deterministic") {
  RasterImage clean = fixtures::clean_slide(33, 320, 320);
  fixtures::SlideGroundTruth gt;
  RasterImage inked = fixtures::ink_slide(clean, gt, 34, 2);
  ImagePyramid p = build_pyramid(clean, 1, 2);
  InkConfig cfg;

  BinaryMask m1 = detect_ink_mask(inked, &clean, cfg);
  BinaryMask m2 = detect_ink_mask(inked, &clean, cfg);
  CHECK(m1.bits == m2.bits);
  RoiSet r1 = extract_roi_boxes(m1, 0, p, cfg);
  RoiSet r2 = extract_roi_boxes(m2, 0, p, cfg);
  CHECK(format_roi_manifest(r1) == format_roi_manifest(r2));
}
