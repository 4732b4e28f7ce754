#pragma once

#include <Eigen/Dense>
#include <array>
#include <bit>
#include <cstdint>
#include <vector>

#include "cyto/raster.hpp"

// Feature-based alignment of an inked slide to its clean reference:
// oriented FAST-9 corners ranked by Harris response, steered 256-bit binary
// descriptors from a fixed seeded test pattern, ratio-test + cross-check
// Hamming matching, RANSAC homography (normalized DLT) and bilinear warping.

namespace cyto {

struct Keypoint {
  double x = 0, y = 0;
  double response = 0;     // Harris corner measure
  double orientation = 0;  // radians, intensity-centroid, in [-pi, pi]
};

struct Descriptor {
  std::array<std::uint64_t, 4> bits{};  // 256 binary tests
};

inline int hamming(const Descriptor& a, const Descriptor& b) {
  int d = 0;
  for (int i = 0; i < 4; ++i) d += std::popcount(a.bits[i] ^ b.bits[i]);
  return d;
}

struct Match {
  int ref_idx = 0;
  int target_idx = 0;
  int distance = 0;  // Hamming, 0..256
};

struct Homography {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();  // h(2,2) == 1

  // project a point through the transform
  Eigen::Vector2d apply(double x, double y) const {
    Eigen::Vector3d p = h * Eigen::Vector3d(x, y, 1.0);
    return {p.x() / p.z(), p.y() / p.z()};
  }
};

// FAST-9 corners (>= 9 contiguous circle pixels all brighter/darker than
// center +- threshold), 3x3 non-max suppressed on the Harris response,
// ranked by response and truncated. Requires a 31x31 image or larger.
std::vector<Keypoint> detect_keypoints(const RasterImage& gray, int fast_threshold,
                                       int max_keypoints);

struct DescribedKeypoints {
  std::vector<Keypoint> keypoints;  // inputs at least 15 px from the border, order kept
  std::vector<Descriptor> descriptors;
};

DescribedKeypoints compute_descriptors(const RasterImage& gray,
                                       const std::vector<Keypoint>& keypoints);

// Ratio test (nearest < ratio * second-nearest; a single candidate passes)
// plus mutual cross-check; output sorted by (distance, ref_idx).
std::vector<Match> match_descriptors(const std::vector<Descriptor>& ref,
                                     const std::vector<Descriptor>& target, double ratio = 0.8);

struct RansacResult {
  Homography h;                // maps target coordinates into reference coordinates
  std::vector<bool> inliers;   // one flag per input match
  int inlier_count = 0;
};

// Seeded 4-point DLT RANSAC with Hartley normalization and a final
// least-squares refit over the consensus set. Sampling draws from the match
// list sorted canonically by (ref_idx, target_idx), so the result does not
// depend on input match order.
RansacResult estimate_homography_ransac(const std::vector<Match>& matches,
                                        const std::vector<Keypoint>& ref_kps,
                                        const std::vector<Keypoint>& target_kps, double inlier_px,
                                        int max_iters, std::uint64_t seed);

// Direct linear transform mapping src[i] -> dst[i]; used by the RANSAC core
// and exposed for refits over arbitrary correspondence sets.
Homography homography_dlt(const std::vector<Eigen::Vector2d>& src,
                          const std::vector<Eigen::Vector2d>& dst);

// Inverse-mapped bilinear warp; pixels mapping outside the source are 0.
RasterImage warp(const RasterImage& img, const Homography& h, int out_w, int out_h);

struct RegisterConfig {
  int fast_threshold = 20;
  int max_keypoints = 1500;
  double match_ratio = 0.8;
  double inlier_px = 3.0;
  int max_iters = 2000;
  std::uint64_t seed = 0;
};

// detect -> describe -> match -> RANSAC. Returns the homography mapping
// target coordinates into reference coordinates.
Homography register_images(const RasterImage& reference, const RasterImage& target,
                           const RegisterConfig& cfg);

// Debug dump row: ref_x, ref_y, tgt_x, tgt_y, distance, inlier.
std::string format_match_table(const std::vector<Match>& matches,
                               const std::vector<Keypoint>& ref_kps,
                               const std::vector<Keypoint>& target_kps,
                               const std::vector<bool>& inliers);

}  // namespace cyto
