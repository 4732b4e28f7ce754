#pragma once

// Synthetic fixtures shared by the unit and acceptance suites: seeded
// textured images, slide pairs with blue ink rings, and simple transforms
// with known ground truth.

#include <cmath>
#include <cstdint>
#include <vector>

#include "cyto/raster.hpp"

namespace fixtures {

struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  // uniform in [0, n)
  std::uint64_t bounded(std::uint64_t n) {
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }
  double uniform01() { return (next() >> 11) * 0x1.0p-53; }
};

inline void draw_disc(cyto::RasterImage& img, double cx, double cy, double r,
                      const std::uint8_t* color) {
  int x0 = std::max(0, int(cx - r - 1)), x1 = std::min(img.width - 1, int(cx + r + 1));
  int y0 = std::max(0, int(cy - r - 1)), y1 = std::min(img.height - 1, int(cy + r + 1));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      double dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy <= r * r)
        for (int c = 0; c < img.channels; ++c) img.at(x, y, c) = color[c];
    }
}

inline void draw_disc_gray(cyto::RasterImage& img, double cx, double cy, double r,
                           std::uint8_t v) {
  std::uint8_t color[3] = {v, v, v};
  draw_disc(img, cx, cy, r, color);
}

// ring = annulus of the given thickness centered on radius r
inline void draw_ring(cyto::RasterImage& img, double cx, double cy, double r, double thickness,
                      const std::uint8_t* color) {
  double rin = r - thickness / 2.0, rout = r + thickness / 2.0;
  int x0 = std::max(0, int(cx - rout - 1)), x1 = std::min(img.width - 1, int(cx + rout + 1));
  int y0 = std::max(0, int(cy - rout - 1)), y1 = std::min(img.height - 1, int(cy + rout + 1));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      double dx = x - cx, dy = y - cy;
      double d2 = dx * dx + dy * dy;
      if (d2 >= rin * rin && d2 <= rout * rout)
        for (int c = 0; c < img.channels; ++c) img.at(x, y, c) = color[c];
    }
}

// grayscale texture: many random discs over a mid background; plenty of
// FAST corners, no repeating structure
inline cyto::RasterImage textured_image(std::uint64_t seed, int w, int h, int discs = 0) {
  Rng rng(seed);
  cyto::RasterImage img = cyto::RasterImage::make(w, h, 1, 128);
  if (discs == 0) discs = w * h / 800;
  for (int i = 0; i < discs; ++i) {
    double cx = rng.uniform01() * w, cy = rng.uniform01() * h;
    double r = 2.0 + rng.uniform01() * 8.0;
    draw_disc_gray(img, cx, cy, r, static_cast<std::uint8_t>(rng.bounded(256)));
  }
  return img;
}

// integer translation; vacated pixels keep `fill`
inline cyto::RasterImage translate_image(const cyto::RasterImage& img, int dx, int dy,
                                         std::uint8_t fill = 0) {
  cyto::RasterImage out = cyto::RasterImage::make(img.width, img.height, img.channels, fill);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      int sx = x - dx, sy = y - dy;
      if (sx < 0 || sx >= img.width || sy < 0 || sy >= img.height) continue;
      for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  return out;
}

// bilinear rotation about the image center (angle in radians, +ccw in
// pixel coordinates with y down)
inline cyto::RasterImage rotate_image(const cyto::RasterImage& img, double angle,
                                      std::uint8_t fill = 0) {
  cyto::RasterImage out = cyto::RasterImage::make(img.width, img.height, img.channels, fill);
  double cxr = (img.width - 1) / 2.0, cyr = (img.height - 1) / 2.0;
  double ca = std::cos(angle), sa = std::sin(angle);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      // inverse map
      double rx = ca * (x - cxr) + sa * (y - cyr) + cxr;
      double ry = -sa * (x - cxr) + ca * (y - cyr) + cyr;
      if (rx < 0 || ry < 0 || rx > img.width - 1 || ry > img.height - 1) continue;
      int x0 = int(rx), y0 = int(ry);
      int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
      double fx = rx - x0, fy = ry - y0;
      for (int c = 0; c < img.channels; ++c) {
        double v = img.at(x0, y0, c) * (1 - fx) * (1 - fy) + img.at(x1, y0, c) * fx * (1 - fy) +
                   img.at(x0, y1, c) * (1 - fx) * fy + img.at(x1, y1, c) * fx * fy;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(v));
      }
    }
  return out;
}

// exact 90-degree clockwise rotation (pixel permutation)
inline cyto::RasterImage rotate90_cw(const cyto::RasterImage& img) {
  cyto::RasterImage out = cyto::RasterImage::make(img.height, img.width, img.channels);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(x, y, c) = img.at(y, img.height - 1 - x, c);
  return out;
}

struct SlideGroundTruth {
  struct Ring {
    double cx, cy, r;
  };
  std::vector<Ring> rings;
  std::vector<Ring> abnormal_blobs;  // dark blobs placed inside rings
};

// clean slide: near-white background with scattered cell-like blobs
inline cyto::RasterImage clean_slide(std::uint64_t seed, int w, int h, int cells = 0) {
  Rng rng(seed);
  cyto::RasterImage img = cyto::RasterImage::make(w, h, 3, 235);
  if (cells == 0) cells = w * h / 3000;
  for (int i = 0; i < cells; ++i) {
    double cx = rng.uniform01() * w, cy = rng.uniform01() * h;
    double r = 4.0 + rng.uniform01() * 10.0;
    std::uint8_t cyto_color[3] = {static_cast<std::uint8_t>(150 + rng.bounded(40)),
                                  static_cast<std::uint8_t>(130 + rng.bounded(40)),
                                  static_cast<std::uint8_t>(170 + rng.bounded(40))};
    draw_disc(img, cx, cy, r, cyto_color);
    std::uint8_t nuc_color[3] = {static_cast<std::uint8_t>(80 + rng.bounded(30)),
                                 static_cast<std::uint8_t>(50 + rng.bounded(30)),
                                 static_cast<std::uint8_t>(110 + rng.bounded(30))};
    draw_disc(img, cx, cy, r * 0.45, nuc_color);
  }
  return img;
}

// adds blue marker rings (and dark abnormal blobs inside them) to a copy
inline cyto::RasterImage ink_slide(const cyto::RasterImage& clean, SlideGroundTruth& gt,
                                   std::uint64_t seed, int rings) {
  Rng rng(seed);
  cyto::RasterImage inked = clean;
  const std::uint8_t blue[3] = {40, 40, 200};
  for (int i = 0; i < rings; ++i) {
    double r, cx, cy;
    for (int attempt = 0;; ++attempt) {
      r = 0.08 * clean.width + rng.uniform01() * 0.05 * clean.width;
      cx = r + 8 + rng.uniform01() * (clean.width - 2 * (r + 8));
      cy = r + 8 + rng.uniform01() * (clean.height - 2 * (r + 8));
      bool clear = true;
      for (const auto& other : gt.rings)
        clear &= std::hypot(cx - other.cx, cy - other.cy) > r + other.r + 12;
      if (clear || attempt > 200) break;
    }
    draw_ring(inked, cx, cy, r, 4.0, blue);
    gt.rings.push_back({cx, cy, r});
    gt.abnormal_blobs.push_back({cx, cy, r * 0.45});
  }
  return inked;
}

inline double iou(const cyto::BBox& a, const cyto::BBox& b) {
  int ix0 = std::max(a.x0, b.x0), iy0 = std::max(a.y0, b.y0);
  int ix1 = std::min(a.x1, b.x1), iy1 = std::min(a.y1, b.y1);
  double inter = double(std::max(0, ix1 - ix0)) * std::max(0, iy1 - iy0);
  double uni = double(a.width()) * a.height() + double(b.width()) * b.height() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

}  // namespace fixtures
