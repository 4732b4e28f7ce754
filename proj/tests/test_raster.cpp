#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <filesystem>
#include <set>

#include "cyto/png_io.hpp"
#include "cyto/pyramid.hpp"
#include "cyto/raster.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace cyto;

namespace {

BinaryMask random_mask(std::uint64_t seed, int w, int h, double density) {
  fixtures::Rng rng(seed);
  BinaryMask m = BinaryMask::make(w, h, false);
  for (auto& b : m.bits) b = rng.uniform01() < density ? 1 : 0;
  return m;
}

bool subset(const BinaryMask& a, const BinaryMask& b) {  // a <= b
  for (std::size_t i = 0; i < a.bits.size(); ++i)
    if (a.bits[i] && !b.bits[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("to_gray weights") {
  RasterImage img = RasterImage::make(3, 1, 3);
  std::uint8_t px[3][3] = {{255, 255, 255}, {0, 0, 0}, {100, 200, 50}};
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 3; ++c) img.at(i, 0, c) = px[i][c];
  RasterImage g = to_gray(img);
  CHECK(g.at(0, 0) == 255);
  CHECK(g.at(1, 0) == 0);
  CHECK(g.at(2, 0) == 153);  // round(29.9 + 117.4 + 5.7)

  RasterImage one = RasterImage::make(2, 2, 1, 42);
  CHECK(to_gray(one).pixels == one.pixels);
}

TEST_CASE("channel_subtract saturates") {
  RasterImage img = RasterImage::make(2, 1, 3);
  // pixel 0: blue 200 red 10; pixel 1: blue 10 red 200
  img.at(0, 0, 2) = 200;
  img.at(0, 0, 0) = 10;
  img.at(1, 0, 2) = 10;
  img.at(1, 0, 0) = 200;
  RasterImage d = channel_subtract(img, 2, 0);
  CHECK(d.at(0, 0) == 190);
  CHECK(d.at(1, 0) == 0);

  RasterImage gray3 = RasterImage::make(4, 4, 3, 77);
  RasterImage z = channel_subtract(gray3, 2, 0);
  CHECK(std::all_of(z.pixels.begin(), z.pixels.end(), [](std::uint8_t v) { return v == 0; }));

  CHECK_THROWS(channel_subtract(img, 0, 3));
}

TEST_CASE("otsu bimodal and constant") {
  RasterImage img = RasterImage::make(16, 2, 1, 0);
  for (int x = 0; x < 16; ++x) img.at(x, 1) = 255;
  OtsuResult r = otsu_threshold(img);
  for (int x = 0; x < 16; ++x) {
    CHECK_FALSE(r.mask.test(x, 0));
    CHECK(r.mask.test(x, 1));
  }

  RasterImage flat = RasterImage::make(8, 8, 1, 7);
  OtsuResult rf = otsu_threshold(flat);
  CHECK(rf.threshold == 7);
  CHECK(rf.mask.count() == 0);
}

TEST_CASE("otsu matches variance-scan oracle on two clusters") {
  fixtures::Rng rng(99);
  RasterImage img = RasterImage::make(64, 64, 1);
  bool flip = false;
  std::vector<bool> bright_cluster;
  for (auto& v : img.pixels) {
    // balanced pseudo-gaussian clusters around 50 and 200, supports disjoint
    double base = (flip = !flip) ? 50.0 : 200.0;
    double jitter = (rng.uniform01() + rng.uniform01() + rng.uniform01() - 1.5) * 6.0;
    v = static_cast<std::uint8_t>(std::clamp(base + jitter, 30.0, 220.0));
    bright_cluster.push_back(base > 100.0);
  }
  OtsuResult r = otsu_threshold(img);
  CHECK(r.threshold == oracles::otsu_scan(img.pixels));
  // the threshold separates the cluster supports: classification is perfect
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    CHECK(bool(r.mask.bits[i]) == bright_cluster[i]);
}

TEST_CASE("otsu invariant under pixel permutation") {
  RasterImage img = fixtures::textured_image(4, 32, 32);
  OtsuResult a = otsu_threshold(img);
  RasterImage shuffled = img;
  fixtures::Rng rng(5);
  for (std::size_t i = shuffled.pixels.size(); i > 1; --i)
    std::swap(shuffled.pixels[i - 1], shuffled.pixels[rng.bounded(i)]);
  CHECK(otsu_threshold(shuffled).threshold == a.threshold);
}

TEST_CASE("morphology basics") {
  BinaryMask m = BinaryMask::make(7, 7, false);
  m.set(3, 3, true);
  BinaryMask d = morphology(m, MorphOp::Dilate, 1);
  CHECK(d.count() == 5);  // 4-neighborhood + center
  CHECK(d.test(3, 3));
  CHECK(d.test(2, 3));
  CHECK(d.test(4, 3));
  CHECK(d.test(3, 2));
  CHECK(d.test(3, 4));

  CHECK(morphology(m, MorphOp::Open, 1).count() == 0);

  BinaryMask blob = random_mask(17, 30, 22, 0.4);
  BinaryMask c1 = morphology(blob, MorphOp::Close, 2);
  BinaryMask c2 = morphology(c1, MorphOp::Close, 2);
  CHECK(c1.bits == c2.bits);
}

TEST_CASE("morphology extensivity properties on random masks") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    for (int radius : {1, 2, 3}) {
      BinaryMask m = random_mask(seed, 25, 19, 0.35);
      CHECK(subset(morphology(m, MorphOp::Open, radius), m));
      CHECK(subset(m, morphology(m, MorphOp::Close, radius)));
    }
  }
}

TEST_CASE("skeletonize bar matches the reference implementation") {
  BinaryMask bar = BinaryMask::make(14, 7, false);
  for (int y = 2; y < 5; ++y)
    for (int x = 2; x < 12; ++x) bar.set(x, y, true);
  BinaryMask s = skeletonize(bar);
  BinaryMask ref = oracles::zhang_suen_reference(bar);
  CHECK(s.bits == ref.bits);
  CHECK(subset(s, bar));
  // one-pixel-thick line spanning the long axis
  int minx = 99, maxx = -1;
  for (int y = 0; y < s.height; ++y) {
    int row = 0;
    for (int x = 0; x < s.width; ++x)
      if (s.test(x, y)) {
        ++row;
        minx = std::min(minx, x);
        maxx = std::max(maxx, x);
      }
  }
  CHECK(maxx - minx >= 5);  // spans the long axis (thinning trims the ends)
  for (int x = minx; x <= maxx; ++x) {
    int col = 0;
    for (int y = 0; y < s.height; ++y) col += s.test(x, y);
    CHECK(col == 1);  // one pixel thick
  }
}

TEST_CASE("skeletonize edge cases and random agreement") {
  BinaryMask empty = BinaryMask::make(9, 9, false);
  CHECK(skeletonize(empty).count() == 0);

  BinaryMask dot = BinaryMask::make(9, 9, false);
  dot.set(4, 4, true);
  BinaryMask sd = skeletonize(dot);
  CHECK(sd.count() == 1);
  CHECK(sd.test(4, 4));

  for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
    BinaryMask m = random_mask(seed, 28, 24, 0.55);
    BinaryMask s = skeletonize(m);
    CHECK(s.bits == oracles::zhang_suen_reference(m).bits);
    CHECK(subset(s, m));
  }
}

TEST_CASE("connected components") {
  BinaryMask m = BinaryMask::make(12, 6, false);
  for (int y = 1; y < 3; ++y)
    for (int x = 1; x < 3; ++x) m.set(x, y, true);
  for (int y = 3; y < 5; ++y)
    for (int x = 8; x < 10; ++x) m.set(x, y, true);
  auto comps = connected_components(m);
  REQUIRE(comps.size() == 2);
  CHECK(comps[0].area == 4);
  CHECK(comps[1].area == 4);
  CHECK(comps[0].bbox.y0 <= comps[1].bbox.y0);

  CHECK(connected_components(BinaryMask::make(4, 4, false)).empty());

  // L-shaped 8-connected blob of 5 pixels
  BinaryMask l = BinaryMask::make(8, 8, false);
  int pts[5][2] = {{2, 2}, {2, 3}, {2, 4}, {3, 5}, {4, 5}};  // diagonal joint
  double sx = 0, sy = 0;
  for (auto& p : pts) {
    l.set(p[0], p[1], true);
    sx += p[0];
    sy += p[1];
  }
  auto lc = connected_components(l);
  REQUIRE(lc.size() == 1);
  CHECK(lc[0].area == 5);
  CHECK(lc[0].cx == doctest::Approx(sx / 5));
  CHECK(lc[0].cy == doctest::Approx(sy / 5));
}

TEST_CASE("component areas sum to mask count") {
  for (std::uint64_t seed : {21ull, 22ull}) {
    BinaryMask m = random_mask(seed, 40, 33, 0.3);
    auto comps = connected_components(m);
    std::int64_t total = 0;
    for (auto& c : comps) total += c.area;
    CHECK(total == m.count());
  }
}

TEST_CASE("pyramid level sizes and content") {
  RasterImage img = fixtures::textured_image(7, 512, 512);
  ImagePyramid p = build_pyramid(img, 4, 2);
  REQUIRE(p.level_count() == 4);
  CHECK(p.level(0).width == 512);
  CHECK(p.level(1).width == 256);
  CHECK(p.level(2).width == 128);
  CHECK(p.level(3).width == 64);
  CHECK(p.level(0).pixels == img.pixels);

  RasterImage flat = RasterImage::make(64, 64, 3, 99);
  ImagePyramid pf = build_pyramid(flat, 3, 2);
  for (int k = 0; k < 3; ++k)
    CHECK(std::all_of(pf.level(k).pixels.begin(), pf.level(k).pixels.end(),
                      [](std::uint8_t v) { return v == 99; }));
}

TEST_CASE("box downsample rounds half to even") {
  RasterImage img = RasterImage::make(2, 2, 1);
  img.pixels = {0, 0, 255, 255};
  RasterImage d = downsample_box(img, 2);
  REQUIRE(d.width == 1);
  REQUIRE(d.height == 1);
  CHECK(d.at(0, 0) == 128);  // mean 127.5 -> even neighbor
}

TEST_CASE("pyramid depth limit") {
  RasterImage img = RasterImage::make(16, 16, 1, 0);
  CHECK_NOTHROW(build_pyramid(img, 5, 2));  // 16,8,4,2,1
  CHECK_THROWS(build_pyramid(img, 6, 2));   // 1 cannot halve again
  RasterImage wide = RasterImage::make(512, 64, 1, 0);
  CHECK_THROWS(build_pyramid(wide, 8, 2));  // height exhausts first
}

TEST_CASE("read_region semantics") {
  RasterImage img = fixtures::textured_image(8, 64, 48);
  ImagePyramid p = build_pyramid(img, 2, 2);

  RasterImage full = read_region(p, 0, {0, 0, 64, 48});
  CHECK(full.pixels == img.pixels);

  RasterImage px = read_region(p, 0, {10, 20, 11, 21});
  CHECK(px.at(0, 0) == img.at(10, 20));

  // adjacent half-open boxes tile without gap or overlap
  RasterImage a = read_region(p, 0, {0, 0, 32, 48});
  RasterImage b = read_region(p, 0, {32, 0, 64, 48});
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x)
      CHECK((x < 32 ? a.at(x, y) : b.at(x - 32, y)) == img.at(x, y));

  CHECK_THROWS(read_region(p, 0, {0, 0, 65, 48}));
  CHECK_THROWS(read_region(p, 2, {0, 0, 4, 4}));
}

TEST_CASE("map_box across levels") {
  RasterImage img = RasterImage::make(4096, 4096, 1, 0);
  ImagePyramid p = build_pyramid(img, 8, 2);

  BBox b = map_box({10, 10, 20, 20}, 7, 1, p);
  CHECK(b.x0 == 640);
  CHECK(b.y0 == 640);
  CHECK(b.x1 == 1280);
  CHECK(b.y1 == 1280);

  // round trip covers the original and overshoots by < factor^|a-c|
  BBox orig{101, 57, 333, 414};
  BBox down = map_box(orig, 0, 3, p);
  BBox up = map_box(down, 3, 0, p);
  CHECK(up.x0 <= orig.x0);
  CHECK(up.y0 <= orig.y0);
  CHECK(up.x1 >= orig.x1);
  CHECK(up.y1 >= orig.y1);
  CHECK(up.x0 > orig.x0 - 8);
  CHECK(up.x1 < orig.x1 + 8);
}

TEST_CASE("normalize and denormalize boxes") {
  RasterImage img = RasterImage::make(4096, 4096, 1, 0);
  ImagePyramid p = build_pyramid(img, 1, 2);

  NormBBox nb{0.25, 0.25, 0.5, 0.5};
  BBox b = denormalize_box(nb, 0, p);
  CHECK(b.x0 == 1024);
  CHECK(b.y0 == 1024);
  CHECK(b.x1 == 2048);
  CHECK(b.y1 == 2048);

  NormBBox full{0, 0, 1, 1};
  BBox fb = denormalize_box(full, 0, p);
  CHECK(fb.x0 == 0);
  CHECK(fb.x1 == 4096);

  BBox orig{123, 456, 789, 1011};
  NormBBox n2 = normalize_box(orig, 0, p);
  BBox back = denormalize_box(n2, 0, p);
  CHECK(back.x0 <= orig.x0);
  CHECK(back.x1 >= orig.x1);
  CHECK(back.x0 >= orig.x0 - 1);
  CHECK(back.x1 <= orig.x1 + 1);
}

TEST_CASE("pyramid directory round trip") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "cyto_test_pyr";
  fs::remove_all(dir);

  RasterImage img = fixtures::clean_slide(3, 128, 96);
  ImagePyramid p = build_pyramid(img, 3, 2);
  p.pixel_um = 0.228;
  save_pyramid(p, dir.string());
  ImagePyramid q = load_pyramid(dir.string());

  REQUIRE(q.level_count() == 3);
  CHECK(q.factor == 2);
  CHECK(q.pixel_um == doctest::Approx(0.228));
  for (int k = 0; k < 3; ++k) CHECK(q.level(k).pixels == p.level(k).pixels);
  fs::remove_all(dir);
}

TEST_CASE("png round trip including 16-bit labels") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "cyto_test_png";
  fs::create_directories(dir);

  RasterImage rgb = fixtures::clean_slide(9, 40, 30);
  write_png((dir / "rgb.png").string(), rgb);
  RasterImage back = read_png((dir / "rgb.png").string());
  CHECK(back.channels == 3);
  CHECK(back.pixels == rgb.pixels);

  std::vector<std::uint16_t> labels(40 * 30);
  for (std::size_t i = 0; i < labels.size(); ++i)
    labels[i] = static_cast<std::uint16_t>((i * 37) % 60000);
  write_png16((dir / "lab.png").string(), labels, 40, 30);
  int w = 0, h = 0;
  auto lb = read_png16((dir / "lab.png").string(), w, h);
  CHECK(w == 40);
  CHECK(h == 30);
  CHECK(lb == labels);
  fs::remove_all(dir);
}
