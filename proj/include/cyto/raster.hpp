#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

// Core 8-bit raster primitives: grayscale conversion, channel arithmetic,
// Otsu thresholding, binary morphology, Zhang-Suen thinning and connected
// components. Everything here is a pure function of its inputs.

namespace cyto {

struct RasterImage {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 or 3, interleaved
  std::vector<std::uint8_t> pixels;

  static RasterImage make(int w, int h, int c, std::uint8_t fill = 0);

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  std::uint8_t at(int x, int y, int c = 0) const { return pixels[index(x, y, c)]; }
  std::uint8_t& at(int x, int y, int c = 0) { return pixels[index(x, y, c)]; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  bool same_dims(const RasterImage& o) const { return width == o.width && height == o.height; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

// Throws std::invalid_argument if dimensions/channel count/buffer disagree.
void require_valid(const RasterImage& img, const char* what = "image");

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1, row-major

  static BinaryMask make(int w, int h, bool fill = false);

  bool test(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  std::int64_t count() const;
  bool same_dims(const BinaryMask& o) const { return width == o.width && height == o.height; }
};

// Half-open pixel box [x0,x1) x [y0,y1).
struct BBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool valid() const { return x0 < x1 && y0 < y1; }
};

// Unit-normalized box, 0 <= x0 < x1 <= 1 (same for y).
struct NormBBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool valid() const {
    return x0 >= 0.0 && x0 < x1 && x1 <= 1.0 && y0 >= 0.0 && y0 < y1 && y1 <= 1.0;
  }
};

// gray = round(0.299 R + 0.587 G + 0.114 B); 1-channel input is returned unchanged.
RasterImage to_gray(const RasterImage& img);

// out = max(0, img[a] - img[b]) per pixel, single-channel result.
RasterImage channel_subtract(const RasterImage& img, int a, int b);

struct OtsuResult {
  BinaryMask mask;  // bit = (pixel > threshold)
  int threshold = 0;
};

// Threshold maximizing between-class variance over the 256-bin histogram
// (smallest maximizer). A constant image yields threshold = that constant
// and an all-false mask.
OtsuResult otsu_threshold(const RasterImage& gray);

// Histogram-level Otsu, reused by callers that bin non-8-bit data.
// Returns the threshold bin, or -1 if fewer than two bins are occupied.
int otsu_threshold_histogram(const std::array<std::uint64_t, 256>& hist);

enum class MorphOp { Erode, Dilate, Open, Close };

// Binary morphology with a disc structuring element (dx^2 + dy^2 <= r^2).
// Pixels outside the image are background. Open and Close run their two
// passes on a canvas padded by the radius so that open(m) <= m <= close(m)
// holds pixelwise even for border-touching masks.
BinaryMask morphology(const BinaryMask& mask, MorphOp op, int radius);

// Zhang-Suen thinning. Output is a subset of the input.
BinaryMask skeletonize(const BinaryMask& mask);

struct Component {
  int label = 0;
  std::int64_t area = 0;
  double cx = 0, cy = 0;  // centroid, mean of member pixel coordinates
  BBox bbox;
};

// 8-connected components, ordered by (bbox.y0, bbox.x0); labels follow that order.
std::vector<Component> connected_components(const BinaryMask& mask);

}  // namespace cyto
