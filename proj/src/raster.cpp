#include "cyto/raster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cyto {

RasterImage RasterImage::make(int w, int h, int c, std::uint8_t fill) {
  if (w < 1 || h < 1 || (c != 1 && c != 3))
    throw std::invalid_argument("RasterImage::make: bad dimensions or channel count");
  RasterImage img;
  img.width = w;
  img.height = h;
  img.channels = c;
  img.pixels.assign(static_cast<std::size_t>(w) * h * c, fill);
  return img;
}

void require_valid(const RasterImage& img, const char* what) {
  if (img.width < 1 || img.height < 1)
    throw std::invalid_argument(std::string(what) + ": empty image");
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument(std::string(what) + ": unsupported channel count " +
                                std::to_string(img.channels));
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * img.channels)
    throw std::invalid_argument(std::string(what) + ": pixel buffer size mismatch");
}

BinaryMask BinaryMask::make(int w, int h, bool fill) {
  if (w < 1 || h < 1) throw std::invalid_argument("BinaryMask::make: bad dimensions");
  BinaryMask m;
  m.width = w;
  m.height = h;
  m.bits.assign(static_cast<std::size_t>(w) * h, fill ? 1 : 0);
  return m;
}

std::int64_t BinaryMask::count() const {
  return std::accumulate(bits.begin(), bits.end(), std::int64_t{0});
}

RasterImage to_gray(const RasterImage& img) {
  require_valid(img);
  if (img.channels == 1) return img;
  RasterImage out = RasterImage::make(img.width, img.height, 1);
  const std::size_t n = img.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* p = &img.pixels[i * 3];
    double g = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(g));
  }
  return out;
}

RasterImage channel_subtract(const RasterImage& img, int a, int b) {
  require_valid(img);
  if (a < 0 || a >= img.channels || b < 0 || b >= img.channels)
    throw std::invalid_argument("channel_subtract: channel index out of range");
  RasterImage out = RasterImage::make(img.width, img.height, 1);
  const std::size_t n = img.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    int d = int(img.pixels[i * img.channels + a]) - int(img.pixels[i * img.channels + b]);
    out.pixels[i] = static_cast<std::uint8_t>(d > 0 ? d : 0);
  }
  return out;
}

int otsu_threshold_histogram(const std::array<std::uint64_t, 256>& hist) {
  std::uint64_t total = 0;
  double sum_all = 0.0;
  int occupied = 0;
  for (int i = 0; i < 256; ++i) {
    total += hist[i];
    sum_all += double(i) * double(hist[i]);
    if (hist[i] > 0) ++occupied;
  }
  if (occupied < 2) return -1;

  double best_var = -1.0;
  int best_t = 0;
  std::uint64_t w0 = 0;
  double sum0 = 0.0;
  for (int t = 0; t < 256; ++t) {
    w0 += hist[t];
    sum0 += double(t) * double(hist[t]);
    std::uint64_t w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    double mu0 = sum0 / double(w0);
    double mu1 = (sum_all - sum0) / double(w1);
    double var = double(w0) * double(w1) * (mu0 - mu1) * (mu0 - mu1);
    if (var > best_var) {
      best_var = var;
      best_t = t;
    }
  }
  return best_t;
}

OtsuResult otsu_threshold(const RasterImage& gray) {
  require_valid(gray);
  if (gray.channels != 1) throw std::invalid_argument("otsu_threshold: expected 1 channel");

  std::array<std::uint64_t, 256> hist{};
  for (std::uint8_t v : gray.pixels) ++hist[v];

  OtsuResult r;
  r.mask = BinaryMask::make(gray.width, gray.height, false);

  int t = otsu_threshold_histogram(hist);
  if (t < 0) {
    // constant image: threshold is the constant, mask stays all-false
    r.threshold = gray.pixels[0];
    return r;
  }
  r.threshold = t;
  const std::size_t n = gray.pixel_count();
  for (std::size_t i = 0; i < n; ++i) r.mask.bits[i] = gray.pixels[i] > t ? 1 : 0;
  return r;
}

namespace {

std::vector<std::pair<int, int>> disc_offsets(int radius) {
  std::vector<std::pair<int, int>> offs;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) offs.emplace_back(dx, dy);
  return offs;
}

BinaryMask dilate_impl(const BinaryMask& m, const std::vector<std::pair<int, int>>& offs) {
  BinaryMask out = BinaryMask::make(m.width, m.height, false);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (!m.test(x, y)) continue;
      for (auto [dx, dy] : offs) {
        int nx = x + dx, ny = y + dy;
        if (out.in_bounds(nx, ny)) out.set(nx, ny, true);
      }
    }
  return out;
}

BinaryMask erode_impl(const BinaryMask& m, const std::vector<std::pair<int, int>>& offs) {
  BinaryMask out = BinaryMask::make(m.width, m.height, false);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      bool all = true;
      for (auto [dx, dy] : offs) {
        int nx = x + dx, ny = y + dy;
        if (!m.in_bounds(nx, ny) || !m.test(nx, ny)) {
          all = false;
          break;
        }
      }
      out.set(x, y, all);
    }
  return out;
}

BinaryMask pad_mask(const BinaryMask& m, int pad) {
  BinaryMask out = BinaryMask::make(m.width + 2 * pad, m.height + 2 * pad, false);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (m.test(x, y)) out.set(x + pad, y + pad, true);
  return out;
}

BinaryMask crop_mask(const BinaryMask& m, int pad, int w, int h) {
  BinaryMask out = BinaryMask::make(w, h, false);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.set(x, y, m.test(x + pad, y + pad));
  return out;
}

}  // namespace

BinaryMask morphology(const BinaryMask& mask, MorphOp op, int radius) {
  if (radius < 1) throw std::invalid_argument("morphology: radius must be >= 1");
  if (mask.width < 1 || mask.height < 1) throw std::invalid_argument("morphology: empty mask");
  const auto offs = disc_offsets(radius);
  switch (op) {
    case MorphOp::Erode:
      return erode_impl(mask, offs);
    case MorphOp::Dilate:
      return dilate_impl(mask, offs);
    case MorphOp::Open: {
      BinaryMask p = pad_mask(mask, radius);
      return crop_mask(dilate_impl(erode_impl(p, offs), offs), radius, mask.width, mask.height);
    }
    case MorphOp::Close: {
      BinaryMask p = pad_mask(mask, radius);
      return crop_mask(erode_impl(dilate_impl(p, offs), offs), radius, mask.width, mask.height);
    }
  }
  throw std::invalid_argument("morphology: unknown op");
}

namespace {

// Neighborhood p2..p9 clockwise from north, as used by Zhang-Suen.
inline void neighbors(const BinaryMask& m, int x, int y, int p[8]) {
  auto get = [&](int nx, int ny) { return m.in_bounds(nx, ny) && m.test(nx, ny) ? 1 : 0; };
  p[0] = get(x, y - 1);      // p2 N
  p[1] = get(x + 1, y - 1);  // p3 NE
  p[2] = get(x + 1, y);      // p4 E
  p[3] = get(x + 1, y + 1);  // p5 SE
  p[4] = get(x, y + 1);      // p6 S
  p[5] = get(x - 1, y + 1);  // p7 SW
  p[6] = get(x - 1, y);      // p8 W
  p[7] = get(x - 1, y - 1);  // p9 NW
}

}  // namespace

BinaryMask skeletonize(const BinaryMask& mask) {
  BinaryMask cur = mask;
  std::vector<std::pair<int, int>> to_clear;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      to_clear.clear();
      for (int y = 0; y < cur.height; ++y) {
        for (int x = 0; x < cur.width; ++x) {
          if (!cur.test(x, y)) continue;
          int p[8];
          neighbors(cur, x, y, p);
          int b = p[0] + p[1] + p[2] + p[3] + p[4] + p[5] + p[6] + p[7];
          if (b < 2 || b > 6) continue;
          int a = 0;
          for (int i = 0; i < 8; ++i)
            if (p[i] == 0 && p[(i + 1) % 8] == 1) ++a;
          if (a != 1) continue;
          bool cond;
          if (pass == 0)
            cond = (p[0] * p[2] * p[4] == 0) && (p[2] * p[4] * p[6] == 0);
          else
            cond = (p[0] * p[2] * p[6] == 0) && (p[0] * p[4] * p[6] == 0);
          if (cond) to_clear.emplace_back(x, y);
        }
      }
      for (auto [x, y] : to_clear) cur.set(x, y, false);
      if (!to_clear.empty()) changed = true;
    }
  }
  return cur;
}

std::vector<Component> connected_components(const BinaryMask& mask) {
  std::vector<Component> comps;
  std::vector<std::int32_t> seen(static_cast<std::size_t>(mask.width) * mask.height, 0);
  std::vector<std::pair<int, int>> stack;

  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      std::size_t idx = static_cast<std::size_t>(y) * mask.width + x;
      if (!mask.bits[idx] || seen[idx]) continue;
      Component c;
      c.bbox = {x, y, x + 1, y + 1};
      double sx = 0, sy = 0;
      stack.clear();
      stack.emplace_back(x, y);
      seen[idx] = 1;
      while (!stack.empty()) {
        auto [px, py] = stack.back();
        stack.pop_back();
        ++c.area;
        sx += px;
        sy += py;
        c.bbox.x0 = std::min(c.bbox.x0, px);
        c.bbox.y0 = std::min(c.bbox.y0, py);
        c.bbox.x1 = std::max(c.bbox.x1, px + 1);
        c.bbox.y1 = std::max(c.bbox.y1, py + 1);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            int nx = px + dx, ny = py + dy;
            if (!mask.in_bounds(nx, ny)) continue;
            std::size_t nidx = static_cast<std::size_t>(ny) * mask.width + nx;
            if (mask.bits[nidx] && !seen[nidx]) {
              seen[nidx] = 1;
              stack.emplace_back(nx, ny);
            }
          }
      }
      c.cx = sx / double(c.area);
      c.cy = sy / double(c.area);
      comps.push_back(c);
    }
  }
  std::sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) {
    if (a.bbox.y0 != b.bbox.y0) return a.bbox.y0 < b.bbox.y0;
    if (a.bbox.x0 != b.bbox.x0) return a.bbox.x0 < b.bbox.x0;
    return std::make_pair(a.cy, a.cx) < std::make_pair(b.cy, b.cx);
  });
  for (std::size_t i = 0; i < comps.size(); ++i) comps[i].label = static_cast<int>(i);
  return comps;
}

}  // namespace cyto
