#include "cyto/registration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace cyto {

namespace {

// Bresenham circle of radius 3, clockwise from north.
constexpr int kCircle[16][2] = {{0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0},  {3, 1},
                                {2, 2},  {1, 3},  {0, 3},  {-1, 3}, {-2, 2}, {-3, 1},
                                {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}};

bool fast9_corner(const RasterImage& img, int x, int y, int t) {
  const int c = img.at(x, y);
  const int hi = c + t, lo = c - t;

  // a 9-run covers at least two compass points
  int nb = 0, nd = 0;
  for (int k = 0; k < 16; k += 4) {
    int v = img.at(x + kCircle[k][0], y + kCircle[k][1]);
    if (v > hi) ++nb;
    if (v < lo) ++nd;
  }
  if (nb < 2 && nd < 2) return false;

  int state[16];
  for (int k = 0; k < 16; ++k) {
    int v = img.at(x + kCircle[k][0], y + kCircle[k][1]);
    state[k] = v > hi ? 1 : (v < lo ? -1 : 0);
  }
  for (int want : {1, -1}) {
    int run = 0;
    for (int k = 0; k < 32; ++k) {
      if (state[k & 15] == want) {
        if (++run >= 9) return true;
      } else {
        run = 0;
      }
    }
  }
  return false;
}

double harris_response(const RasterImage& img, int x, int y) {
  // 7x7 block of Sobel products, k = 0.04
  double sxx = 0, syy = 0, sxy = 0;
  for (int by = -3; by <= 3; ++by)
    for (int bx = -3; bx <= 3; ++bx) {
      int px = x + bx, py = y + by;
      double gx = (img.at(px + 1, py - 1) + 2.0 * img.at(px + 1, py) + img.at(px + 1, py + 1)) -
                  (img.at(px - 1, py - 1) + 2.0 * img.at(px - 1, py) + img.at(px - 1, py + 1));
      double gy = (img.at(px - 1, py + 1) + 2.0 * img.at(px, py + 1) + img.at(px + 1, py + 1)) -
                  (img.at(px - 1, py - 1) + 2.0 * img.at(px, py - 1) + img.at(px + 1, py - 1));
      sxx += gx * gx;
      syy += gy * gy;
      sxy += gx * gy;
    }
  return (sxx * syy - sxy * sxy) - 0.04 * (sxx + syy) * (sxx + syy);
}

constexpr int kPatchRadius = 15;

const std::vector<std::pair<int, int>>& centroid_disc() {
  static const std::vector<std::pair<int, int>> disc = [] {
    std::vector<std::pair<int, int>> d;
    for (int dy = -kPatchRadius; dy <= kPatchRadius; ++dy)
      for (int dx = -kPatchRadius; dx <= kPatchRadius; ++dx)
        if (dx * dx + dy * dy <= kPatchRadius * kPatchRadius) d.emplace_back(dx, dy);
    return d;
  }();
  return disc;
}

double intensity_centroid_angle(const RasterImage& img, int x, int y) {
  double m10 = 0, m01 = 0;
  for (auto [dx, dy] : centroid_disc()) {
    int px = x + dx, py = y + dy;
    if (!img.in_bounds(px, py)) continue;
    double v = img.at(px, py);
    m10 += dx * v;
    m01 += dy * v;
  }
  if (m10 == 0.0 && m01 == 0.0) return 0.0;
  return std::atan2(m01, m10);
}

}  // namespace

std::vector<Keypoint> detect_keypoints(const RasterImage& input, int fast_threshold,
                                       int max_keypoints) {
  RasterImage gray = to_gray(input);
  if (gray.width < 31 || gray.height < 31)
    throw std::invalid_argument("detect_keypoints: image too small (31x31 minimum)");
  if (fast_threshold < 1) throw std::invalid_argument("detect_keypoints: threshold must be >= 1");
  if (max_keypoints < 1) throw std::invalid_argument("detect_keypoints: max_keypoints must be >= 1");

  const int w = gray.width, h = gray.height;
  const double kNoCorner = -std::numeric_limits<double>::infinity();
  std::vector<double> resp(static_cast<std::size_t>(w) * h, kNoCorner);

  // margin 4: circle radius 3 plus the Sobel reach of the Harris block
  for (int y = 4; y < h - 4; ++y)
    for (int x = 4; x < w - 4; ++x)
      if (fast9_corner(gray, x, y, fast_threshold))
        resp[static_cast<std::size_t>(y) * w + x] = harris_response(gray, x, y);

  std::vector<Keypoint> kps;
  for (int y = 4; y < h - 4; ++y) {
    for (int x = 4; x < w - 4; ++x) {
      std::size_t idx = static_cast<std::size_t>(y) * w + x;
      double r = resp[idx];
      if (r == kNoCorner) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          std::size_t nidx = static_cast<std::size_t>(y + dy) * w + (x + dx);
          double nr = resp[nidx];
          if (nr > r || (nr == r && nidx < idx)) {
            is_max = false;
            break;
          }
        }
      if (!is_max) continue;
      Keypoint kp;
      kp.x = x;
      kp.y = y;
      kp.response = r;
      kp.orientation = intensity_centroid_angle(gray, x, y);
      kps.push_back(kp);
    }
  }

  std::sort(kps.begin(), kps.end(), [](const Keypoint& a, const Keypoint& b) {
    if (a.response != b.response) return a.response > b.response;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  if (static_cast<int>(kps.size()) > max_keypoints) kps.resize(max_keypoints);
  return kps;
}

namespace {

struct TestPair {
  int px, py, qx, qy;
};

// Fixed seeded pattern: Gaussian offsets (sigma 5) inside a radius-14 disc,
// hand-rolled Box-Muller so the bits do not depend on the stdlib.
const std::array<TestPair, 256>& brief_pattern() {
  static const std::array<TestPair, 256> pattern = [] {
    std::array<TestPair, 256> pat{};
    std::uint64_t state = 0x9E3779B97F4A7C15ull;
    auto next = [&state] {
      state += 0x9E3779B97F4A7C15ull;
      std::uint64_t z = state;
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
      return z ^ (z >> 31);
    };
    auto uniform01 = [&next] { return (next() >> 11) * 0x1.0p-53; };
    auto gauss_point = [&](int& ox, int& oy) {
      for (;;) {
        double u1 = uniform01(), u2 = uniform01();
        if (u1 <= 0.0) continue;
        double r = std::sqrt(-2.0 * std::log(u1)) * 5.0;
        double a = 2.0 * M_PI * u2;
        int x = static_cast<int>(std::lround(r * std::cos(a)));
        int y = static_cast<int>(std::lround(r * std::sin(a)));
        if (x * x + y * y <= 14 * 14) {
          ox = x;
          oy = y;
          return;
        }
      }
    };
    for (auto& t : pat) {
      do {
        gauss_point(t.px, t.py);
        gauss_point(t.qx, t.qy);
      } while (t.px == t.qx && t.py == t.qy);
    }
    return pat;
  }();
  return pattern;
}

}  // namespace

DescribedKeypoints compute_descriptors(const RasterImage& input,
                                       const std::vector<Keypoint>& keypoints) {
  RasterImage gray = to_gray(input);
  const auto& pattern = brief_pattern();
  DescribedKeypoints out;
  for (const Keypoint& kp : keypoints) {
    int cx = static_cast<int>(std::lround(kp.x));
    int cy = static_cast<int>(std::lround(kp.y));
    if (cx < kPatchRadius || cy < kPatchRadius || cx > gray.width - 1 - kPatchRadius ||
        cy > gray.height - 1 - kPatchRadius)
      continue;
    double c = std::cos(kp.orientation), s = std::sin(kp.orientation);
    Descriptor d;
    for (int i = 0; i < 256; ++i) {
      const TestPair& t = pattern[i];
      int rpx = static_cast<int>(std::lround(c * t.px - s * t.py));
      int rpy = static_cast<int>(std::lround(s * t.px + c * t.py));
      int rqx = static_cast<int>(std::lround(c * t.qx - s * t.qy));
      int rqy = static_cast<int>(std::lround(s * t.qx + c * t.qy));
      if (gray.at(cx + rpx, cy + rpy) < gray.at(cx + rqx, cy + rqy))
        d.bits[i >> 6] |= std::uint64_t{1} << (i & 63);
    }
    out.keypoints.push_back(kp);
    out.descriptors.push_back(d);
  }
  return out;
}

std::vector<Match> match_descriptors(const std::vector<Descriptor>& ref,
                                     const std::vector<Descriptor>& target, double ratio) {
  if (ratio <= 0.0 || ratio > 1.0)
    throw std::invalid_argument("match_descriptors: ratio must be in (0, 1]");
  std::vector<Match> out;
  if (ref.empty() || target.empty()) return out;

  const int nr = static_cast<int>(ref.size());
  const int nt = static_cast<int>(target.size());

  // reverse nearest neighbors for the cross-check
  std::vector<int> nn_of_target(nt, -1);
  for (int j = 0; j < nt; ++j) {
    int best = 257;
    for (int i = 0; i < nr; ++i) {
      int d = hamming(ref[i], target[j]);
      if (d < best) {
        best = d;
        nn_of_target[j] = i;
      }
    }
  }

  for (int i = 0; i < nr; ++i) {
    int d1 = 257, d2 = 257, j1 = -1;
    for (int j = 0; j < nt; ++j) {
      int d = hamming(ref[i], target[j]);
      if (d < d1) {
        d2 = d1;
        d1 = d;
        j1 = j;
      } else if (d < d2) {
        d2 = d;
      }
    }
    if (j1 < 0) continue;
    bool ratio_ok = (nt == 1) || (d2 == 257) || (double(d1) < ratio * double(d2));
    if (!ratio_ok) continue;
    if (nn_of_target[j1] != i) continue;
    out.push_back({i, j1, d1});
  }

  std::sort(out.begin(), out.end(), [](const Match& a, const Match& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.ref_idx < b.ref_idx;
  });
  return out;
}

namespace {

struct SplitMix64 {
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  // unbiased bounded draw
  std::uint64_t bounded(std::uint64_t n) {
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }
};

bool collinear3(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  Eigen::Vector2d u = b - a, v = c - a;
  return std::abs(u.x() * v.y() - u.y() * v.x()) < 1e-8;
}

bool degenerate_quad(const std::vector<Eigen::Vector2d>& p) {
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k)
        if (collinear3(p[i], p[j], p[k])) return true;
  return false;
}

Eigen::Matrix3d hartley_normalization(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= double(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= double(pts.size());
  if (mean_dist < 1e-12) throw std::runtime_error("homography: coincident points");
  double scale = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
  t(0, 0) = scale;
  t(1, 1) = scale;
  t(0, 2) = -scale * centroid.x();
  t(1, 2) = -scale * centroid.y();
  return t;
}

}  // namespace

Homography homography_dlt(const std::vector<Eigen::Vector2d>& src,
                          const std::vector<Eigen::Vector2d>& dst) {
  if (src.size() != dst.size() || src.size() < 4)
    throw std::invalid_argument("homography_dlt: need >= 4 correspondences");
  const int n = static_cast<int>(src.size());

  Eigen::Matrix3d ts = hartley_normalization(src);
  Eigen::Matrix3d td = hartley_normalization(dst);

  Eigen::MatrixXd a(2 * n, 9);
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d sp = ts * Eigen::Vector3d(src[i].x(), src[i].y(), 1.0);
    Eigen::Vector3d dp = td * Eigen::Vector3d(dst[i].x(), dst[i].y(), 1.0);
    double x = sp.x(), y = sp.y(), u = dp.x(), v = dp.y();
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  Eigen::VectorXd hv = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);

  Eigen::Matrix3d h = td.inverse() * hn * ts;
  if (std::abs(h(2, 2)) < 1e-12) throw std::runtime_error("homography: degenerate solution");
  h /= h(2, 2);
  h(2, 2) = 1.0;
  if (std::abs(h.determinant()) < 1e-12)
    throw std::runtime_error("homography: singular solution");
  Homography out;
  out.h = h;
  return out;
}

RansacResult estimate_homography_ransac(const std::vector<Match>& matches,
                                        const std::vector<Keypoint>& ref_kps,
                                        const std::vector<Keypoint>& target_kps, double inlier_px,
                                        int max_iters, std::uint64_t seed) {
  const int n = static_cast<int>(matches.size());
  if (n < 4) throw std::runtime_error("ransac: need >= 4 matches, got " + std::to_string(n));
  if (inlier_px <= 0.0) throw std::invalid_argument("ransac: inlier_px must be > 0");
  if (max_iters < 1) throw std::invalid_argument("ransac: max_iters must be >= 1");

  std::vector<Eigen::Vector2d> ref_pt(n), tgt_pt(n);
  for (int i = 0; i < n; ++i) {
    const Match& m = matches[i];
    if (m.ref_idx < 0 || m.ref_idx >= static_cast<int>(ref_kps.size()) || m.target_idx < 0 ||
        m.target_idx >= static_cast<int>(target_kps.size()))
      throw std::invalid_argument("ransac: match index out of range");
    ref_pt[i] = {ref_kps[m.ref_idx].x, ref_kps[m.ref_idx].y};
    tgt_pt[i] = {target_kps[m.target_idx].x, target_kps[m.target_idx].y};
  }

  // canonical sampling order, independent of the input permutation
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (matches[a].ref_idx != matches[b].ref_idx) return matches[a].ref_idx < matches[b].ref_idx;
    return matches[a].target_idx < matches[b].target_idx;
  });

  SplitMix64 rng(seed ^ 0xA5A5A5A5DEADBEEFull);
  auto count_inliers = [&](const Homography& h, std::vector<bool>* flags) {
    int count = 0;
    for (int i = 0; i < n; ++i) {
      Eigen::Vector2d proj = h.apply(tgt_pt[i].x(), tgt_pt[i].y());
      bool in = (proj - ref_pt[i]).norm() < inlier_px;
      if (flags) (*flags)[i] = in;
      count += in;
    }
    return count;
  };

  bool found_valid = false;
  int best_count = -1;
  Homography best_h;
  std::vector<Eigen::Vector2d> s4(4), d4(4);
  for (int iter = 0; iter < max_iters; ++iter) {
    int pick[4];
    for (int k = 0; k < 4; ++k) {
      bool dup;
      do {
        pick[k] = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(n)));
        dup = false;
        for (int j = 0; j < k; ++j) dup |= (pick[j] == pick[k]);
      } while (dup);
    }
    for (int k = 0; k < 4; ++k) {
      int idx = order[pick[k]];
      s4[k] = tgt_pt[idx];
      d4[k] = ref_pt[idx];
    }
    if (degenerate_quad(s4) || degenerate_quad(d4)) continue;

    Homography h;
    try {
      h = homography_dlt(s4, d4);
    } catch (const std::exception&) {
      continue;
    }
    found_valid = true;
    int count = count_inliers(h, nullptr);
    if (count > best_count) {
      best_count = count;
      best_h = h;
      if (best_count == n) break;
    }
  }

  if (!found_valid)
    throw std::runtime_error("ransac: estimation failed, all minimal samples degenerate after " +
                             std::to_string(max_iters) + " iterations");

  RansacResult result;
  result.inliers.assign(n, false);
  count_inliers(best_h, &result.inliers);

  // canonical order keeps the refit identical under input permutation
  std::vector<Eigen::Vector2d> in_src, in_dst;
  for (int k = 0; k < n; ++k) {
    int i = order[k];
    if (result.inliers[i]) {
      in_src.push_back(tgt_pt[i]);
      in_dst.push_back(ref_pt[i]);
    }
  }
  Homography final_h = best_h;
  if (in_src.size() >= 4) {
    try {
      final_h = homography_dlt(in_src, in_dst);
    } catch (const std::exception&) {
      final_h = best_h;  // keep the consensus model
    }
  }
  result.h = final_h;
  result.inlier_count = count_inliers(final_h, &result.inliers);
  return result;
}

RasterImage warp(const RasterImage& img, const Homography& h, int out_w, int out_h) {
  require_valid(img, "warp");
  if (out_w < 1 || out_h < 1) throw std::invalid_argument("warp: bad output dimensions");
  if (std::abs(h.h.determinant()) < 1e-12) throw std::runtime_error("warp: singular homography");
  Eigen::Matrix3d inv = h.h.inverse();

  RasterImage out = RasterImage::make(out_w, out_h, img.channels);
  const int w = img.width, hh = img.height, ch = img.channels;
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      Eigen::Vector3d s = inv * Eigen::Vector3d(x, y, 1.0);
      if (std::abs(s.z()) < 1e-12) continue;
      double sx = s.x() / s.z(), sy = s.y() / s.z();
      if (sx < 0.0 || sy < 0.0 || sx > w - 1 || sy > hh - 1) continue;
      int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
      int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, hh - 1);
      double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < ch; ++c) {
        double v00 = img.at(x0, y0, c), v10 = img.at(x1, y0, c);
        double v01 = img.at(x0, y1, c), v11 = img.at(x1, y1, c);
        double v = v00 * (1 - fx) * (1 - fy) + v10 * fx * (1 - fy) + v01 * (1 - fx) * fy +
                   v11 * fx * fy;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(v));
      }
    }
  }
  return out;
}

Homography register_images(const RasterImage& reference, const RasterImage& target,
                           const RegisterConfig& cfg) {
  RasterImage ref_gray = to_gray(reference);
  RasterImage tgt_gray = to_gray(target);

  auto ref_kps = detect_keypoints(ref_gray, cfg.fast_threshold, cfg.max_keypoints);
  auto tgt_kps = detect_keypoints(tgt_gray, cfg.fast_threshold, cfg.max_keypoints);
  auto ref_desc = compute_descriptors(ref_gray, ref_kps);
  auto tgt_desc = compute_descriptors(tgt_gray, tgt_kps);
  if (ref_desc.keypoints.size() < 4 || tgt_desc.keypoints.size() < 4)
    throw std::runtime_error("registration: too few keypoints (reference=" +
                             std::to_string(ref_desc.keypoints.size()) +
                             ", target=" + std::to_string(tgt_desc.keypoints.size()) + ")");

  auto matches = match_descriptors(ref_desc.descriptors, tgt_desc.descriptors, cfg.match_ratio);
  if (matches.size() < 4)
    throw std::runtime_error("registration: too few matches (" + std::to_string(matches.size()) +
                             " from " + std::to_string(ref_desc.keypoints.size()) + "/" +
                             std::to_string(tgt_desc.keypoints.size()) + " keypoints)");

  auto result = estimate_homography_ransac(matches, ref_desc.keypoints, tgt_desc.keypoints,
                                           cfg.inlier_px, cfg.max_iters, cfg.seed);
  return result.h;
}

std::string format_match_table(const std::vector<Match>& matches,
                               const std::vector<Keypoint>& ref_kps,
                               const std::vector<Keypoint>& target_kps,
                               const std::vector<bool>& inliers) {
  std::string out = "ref_x,ref_y,tgt_x,tgt_y,distance,inlier\n";
  char buf[160];
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const Match& m = matches[i];
    const Keypoint& r = ref_kps[m.ref_idx];
    const Keypoint& t = target_kps[m.target_idx];
    int in = (i < inliers.size() && inliers[i]) ? 1 : 0;
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f,%.2f,%.2f,%d,%d\n", r.x, r.y, t.x, t.y, m.distance,
                  in);
    out += buf;
  }
  return out;
}

}  // namespace cyto
