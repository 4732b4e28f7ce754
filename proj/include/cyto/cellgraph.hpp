#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cyto/raster.hpp"

// Graph-based cell detection: QuickShift superpixels, a mean-color region
// adjacency graph, a threshold cut that yields the nuclei mask, and seeded
// subgraph growth for (possibly overlapping) cell bodies.

namespace cyto {

struct SuperpixelStats {
  std::int64_t area = 0;
  double cx = 0, cy = 0;
  std::array<double, 3> mean_color{};  // 0..255 scale
};

struct SuperpixelMap {
  int width = 0, height = 0;
  std::vector<std::int32_t> labels;  // dense ids 0..count-1, each 4-connected
  std::vector<SuperpixelStats> stats;

  int count() const { return static_cast<int>(stats.size()); }
  std::int32_t label_at(int x, int y) const {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
};

struct QuickshiftConfig {
  double kernel_size = 3.0;  // Parzen bandwidth sigma
  double max_dist = 8.0;     // joint-space link cutoff; also the window radius
  double ratio = 0.5;        // spatial coordinate weight vs color
};

// Mode-seeking link forest over joint features (ratio*x, ratio*y, r, g, b):
// each pixel links to its nearest strictly-denser neighbor within max_dist
// (density ties resolve toward the smaller linear index, making the forest
// canonical). Trees are split into 4-connected components afterwards.
SuperpixelMap quickshift(const RasterImage& img, const QuickshiftConfig& cfg, int threads = 1);

// Every pixel replaced by its superpixel's mean color (round half to even).
RasterImage mean_color_image(const SuperpixelMap& sp, const RasterImage& img);

struct RegionNode {
  double cx = 0, cy = 0;
  std::array<double, 3> mean_color{};
  double color_norm = 0;  // L2 norm of mean_color
  std::int64_t area = 0;
};

struct RegionEdge {
  std::int32_t u = 0, v = 0;  // u < v
  double weight = 0;          // |norm_u - norm_v|
};

struct RegionGraph {
  std::vector<RegionNode> nodes;
  std::vector<RegionEdge> edges;                                // sorted by (u, v)
  std::vector<std::vector<std::pair<std::int32_t, double>>> adjacency;  // (neighbor, weight)
};

RegionGraph build_region_graph(const SuperpixelMap& sp);

struct NucleiMask {
  BinaryMask mask;
  std::vector<std::vector<std::int32_t>> components;  // nucleus superpixel-id sets
};

// Removes edges with weight > threshold, takes connected components of the
// remainder, and keeps components whose area-weighted mean color norm falls
// below dark_cutoff. Without an explicit cutoff, Otsu over the component
// norm distribution decides; a single-class distribution yields no nuclei.
NucleiMask nuclei_cut(const RegionGraph& g, const SuperpixelMap& sp, double threshold = 59.0,
                      std::optional<double> dark_cutoff = std::nullopt);

struct CellSubgraph {
  int nucleus_id = 0;                 // index into NucleiMask::components
  std::vector<std::int32_t> members;  // sorted; includes the nucleus nodes
  BinaryMask mask;
};

// Breadth-first growth from each nucleus component; a neighbor joins when
// the connecting edge weight is <= grow_threshold and its color norm is
// below background_norm. Nodes may belong to several subgraphs. Without an
// explicit background_norm, Otsu over the area-weighted node-norm
// distribution decides.
std::vector<CellSubgraph> cell_subgraphs(const RegionGraph& g, const SuperpixelMap& sp,
                                         const NucleiMask& nuclei, double grow_threshold = 59.0,
                                         std::optional<double> background_norm = std::nullopt);

// Debug emissions: 16-bit label raster data and the delimited edge list
// (u,v,weight to 4 decimals).
std::vector<std::uint16_t> label_map_16bit(const SuperpixelMap& sp);
std::string format_edge_list(const RegionGraph& g);

}  // namespace cyto
