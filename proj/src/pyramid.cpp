#include "cyto/pyramid.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "cyto/png_io.hpp"

namespace fs = std::filesystem;

namespace cyto {

const RasterImage& ImagePyramid::level(int k) const {
  if (k < 0 || k >= level_count())
    throw std::out_of_range("pyramid: invalid level " + std::to_string(k) + " of " +
                            std::to_string(level_count()));
  return levels[k];
}

RasterImage downsample_box(const RasterImage& img, int factor) {
  require_valid(img, "downsample_box");
  if (factor < 2) throw std::invalid_argument("downsample_box: factor must be >= 2");
  int ow = (img.width + factor - 1) / factor;
  int oh = (img.height + factor - 1) / factor;
  RasterImage out = RasterImage::make(ow, oh, img.channels);
  for (int oy = 0; oy < oh; ++oy) {
    int y0 = oy * factor, y1 = std::min(y0 + factor, img.height);
    for (int ox = 0; ox < ow; ++ox) {
      int x0 = ox * factor, x1 = std::min(x0 + factor, img.width);
      for (int c = 0; c < img.channels; ++c) {
        double sum = 0.0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) sum += img.at(x, y, c);
        double mean = sum / (double(y1 - y0) * double(x1 - x0));
        // round half to even, the process default rounding mode
        out.at(ox, oy, c) = static_cast<std::uint8_t>(std::nearbyint(mean));
      }
    }
  }
  return out;
}

ImagePyramid build_pyramid(const RasterImage& level0, int levels, int factor) {
  require_valid(level0, "build_pyramid");
  if (levels < 1) throw std::invalid_argument("build_pyramid: levels must be >= 1");
  if (factor < 2) throw std::invalid_argument("build_pyramid: factor must be >= 2");
  ImagePyramid p;
  p.factor = factor;
  p.levels.reserve(levels);
  p.levels.push_back(level0);
  for (int k = 1; k < levels; ++k) {
    const RasterImage& prev = p.levels.back();
    if (prev.width < factor || prev.height < factor)
      throw std::invalid_argument("build_pyramid: level " + std::to_string(k) +
                                  " would downsample a dimension smaller than the factor");
    p.levels.push_back(downsample_box(prev, factor));
  }
  return p;
}

RasterImage read_region(const ImagePyramid& p, int level, const BBox& box) {
  const RasterImage& src = p.level(level);
  if (!box.valid() || box.x0 < 0 || box.y0 < 0 || box.x1 > src.width || box.y1 > src.height)
    throw std::out_of_range("read_region: box outside level bounds");
  RasterImage out = RasterImage::make(box.width(), box.height(), src.channels);
  const std::size_t row_bytes = static_cast<std::size_t>(box.width()) * src.channels;
  for (int y = 0; y < box.height(); ++y) {
    const std::uint8_t* s = &src.pixels[src.index(box.x0, box.y0 + y)];
    std::uint8_t* d = &out.pixels[out.index(0, y)];
    std::copy(s, s + row_bytes, d);
  }
  return out;
}

namespace {

std::int64_t ipow(int base, int exp) {
  std::int64_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

BBox clamp_box(BBox b, const RasterImage& lvl, const char* what) {
  b.x0 = std::max(0, std::min(b.x0, lvl.width));
  b.x1 = std::max(0, std::min(b.x1, lvl.width));
  b.y0 = std::max(0, std::min(b.y0, lvl.height));
  b.y1 = std::max(0, std::min(b.y1, lvl.height));
  if (!b.valid()) throw std::invalid_argument(std::string(what) + ": box empty after clamping");
  return b;
}

}  // namespace

BBox map_box(const BBox& box, int from_level, int to_level, const ImagePyramid& p) {
  const RasterImage& target = p.level(to_level);
  p.level(from_level);  // validates
  if (!box.valid()) throw std::invalid_argument("map_box: invalid box");
  BBox out;
  if (from_level >= to_level) {
    std::int64_t m = ipow(p.factor, from_level - to_level);
    out = {static_cast<int>(box.x0 * m), static_cast<int>(box.y0 * m),
           static_cast<int>(box.x1 * m), static_cast<int>(box.y1 * m)};
  } else {
    std::int64_t m = ipow(p.factor, to_level - from_level);
    auto fdiv = [m](int v) { return static_cast<int>(v >= 0 ? v / m : -((-v + m - 1) / m)); };
    auto cdiv = [m](int v) { return static_cast<int>(v >= 0 ? (v + m - 1) / m : -((-v) / m)); };
    out = {fdiv(box.x0), fdiv(box.y0), cdiv(box.x1), cdiv(box.y1)};
  }
  return clamp_box(out, target, "map_box");
}

NormBBox normalize_box(const BBox& box, int level, const ImagePyramid& p) {
  const RasterImage& lvl = p.level(level);
  if (!box.valid() || box.x0 < 0 || box.y0 < 0 || box.x1 > lvl.width || box.y1 > lvl.height)
    throw std::invalid_argument("normalize_box: box outside level bounds");
  return {double(box.x0) / lvl.width, double(box.y0) / lvl.height, double(box.x1) / lvl.width,
          double(box.y1) / lvl.height};
}

BBox denormalize_box(const NormBBox& nb, int level, const ImagePyramid& p) {
  if (!nb.valid()) throw std::invalid_argument("denormalize_box: invalid normalized box");
  const RasterImage& lvl = p.level(level);
  // snap before floor/ceil so exact rationals survive the fp round trip
  constexpr double kSnap = 1e-9;
  BBox b{static_cast<int>(std::floor(nb.x0 * lvl.width + kSnap)),
         static_cast<int>(std::floor(nb.y0 * lvl.height + kSnap)),
         static_cast<int>(std::ceil(nb.x1 * lvl.width - kSnap)),
         static_cast<int>(std::ceil(nb.y1 * lvl.height - kSnap))};
  return clamp_box(b, lvl, "denormalize_box");
}

void save_pyramid(const ImagePyramid& p, const std::string& dir) {
  if (p.levels.empty()) throw std::invalid_argument("save_pyramid: empty pyramid");
  fs::create_directories(dir);
  const RasterImage& l0 = p.levels[0];
  {
    std::ofstream meta(fs::path(dir) / "meta.txt");
    if (!meta) throw std::runtime_error("save_pyramid: cannot write meta.txt in " + dir);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d %d %d %d %d %.6f\n", l0.width, l0.height, l0.channels,
                  p.level_count(), p.factor, p.pixel_um);
    meta << buf;
  }
  for (int k = 0; k < p.level_count(); ++k)
    write_png((fs::path(dir) / ("level_" + std::to_string(k) + ".png")).string(), p.levels[k]);
}

ImagePyramid load_pyramid(const std::string& dir) {
  std::ifstream meta(fs::path(dir) / "meta.txt");
  if (!meta) throw std::runtime_error("load_pyramid: cannot open " + dir + "/meta.txt");
  int w = 0, h = 0, c = 0, levels = 0, factor = 0;
  double pixel_um = 0.0;
  if (!(meta >> w >> h >> c >> levels >> factor >> pixel_um))
    throw std::runtime_error("load_pyramid: malformed meta.txt in " + dir);
  if (levels < 1 || factor < 2)
    throw std::runtime_error("load_pyramid: invalid levels/factor in " + dir);

  ImagePyramid p;
  p.factor = factor;
  p.pixel_um = pixel_um;
  p.levels.reserve(levels);
  for (int k = 0; k < levels; ++k) {
    RasterImage img = read_png((fs::path(dir) / ("level_" + std::to_string(k) + ".png")).string());
    std::int64_t f = ipow(factor, k);
    int ew = static_cast<int>((w + f - 1) / f);
    int eh = static_cast<int>((h + f - 1) / f);
    if (img.width != ew || img.height != eh || img.channels != c)
      throw std::runtime_error("load_pyramid: level " + std::to_string(k) +
                               " dimensions disagree with meta.txt");
    p.levels.push_back(std::move(img));
  }
  return p;
}

}  // namespace cyto
