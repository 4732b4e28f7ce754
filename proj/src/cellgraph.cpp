#include "cyto/cellgraph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "cyto/parallel.hpp"

namespace cyto {

namespace {

constexpr double kMaxColorNorm = 441.6729559300637;  // ||(255,255,255)||

struct UnionFind {
  std::vector<std::int32_t> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::int32_t find(std::int32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a > b) std::swap(a, b);  // keep the smaller id as root
    parent[b] = a;
  }
};

// Otsu over arbitrary weighted samples binned onto [0, kMaxColorNorm].
// Returns the cutoff value, or nullopt for a single-class distribution.
std::optional<double> otsu_norm_cutoff(const std::vector<double>& values,
                                       const std::vector<double>& weights) {
  std::array<std::uint64_t, 256> hist{};
  for (std::size_t i = 0; i < values.size(); ++i) {
    int bin = static_cast<int>(values[i] / kMaxColorNorm * 256.0);
    bin = std::clamp(bin, 0, 255);
    // quantize weights so the integer histogram keeps relative mass
    std::uint64_t w = weights.empty() ? 1 : static_cast<std::uint64_t>(weights[i]);
    hist[bin] += std::max<std::uint64_t>(1, w);
  }
  int t = otsu_threshold_histogram(hist);
  if (t < 0) return std::nullopt;
  return (double(t) + 1.0) / 256.0 * kMaxColorNorm;
}

}  // namespace

SuperpixelMap quickshift(const RasterImage& img, const QuickshiftConfig& cfg, int threads) {
  require_valid(img, "quickshift");
  if (cfg.kernel_size <= 0.0) throw std::invalid_argument("quickshift: kernel_size must be > 0");
  if (cfg.max_dist < cfg.kernel_size)
    throw std::invalid_argument("quickshift: max_dist must be >= kernel_size");
  if (cfg.ratio <= 0.0 || cfg.ratio > 1.0)
    throw std::invalid_argument("quickshift: ratio must be in (0, 1]");

  const int w = img.width, h = img.height;
  const std::int64_t n = std::int64_t(w) * h;
  const int win = static_cast<int>(std::floor(cfg.max_dist));
  const double sigma2x2 = 2.0 * cfg.kernel_size * cfg.kernel_size;
  const double max_d2 = cfg.max_dist * cfg.max_dist;
  // exp(-x) below ~1e-18 contributes nothing to the density
  const double skip_d2 = 42.0 * sigma2x2;

  // joint color features, grayscale replicated across channels
  std::vector<float> col(static_cast<std::size_t>(n) * 3);
  for (std::int64_t i = 0; i < n; ++i) {
    if (img.channels == 3) {
      col[i * 3 + 0] = img.pixels[i * 3 + 0];
      col[i * 3 + 1] = img.pixels[i * 3 + 1];
      col[i * 3 + 2] = img.pixels[i * 3 + 2];
    } else {
      col[i * 3 + 0] = col[i * 3 + 1] = col[i * 3 + 2] = img.pixels[i];
    }
  }
  const double r2 = cfg.ratio * cfg.ratio;
  auto joint_d2 = [&](std::int64_t p, int px, int py, std::int64_t q, int qx, int qy) {
    double dx = px - qx, dy = py - qy;
    double dr = col[p * 3] - col[q * 3];
    double dg = col[p * 3 + 1] - col[q * 3 + 1];
    double db = col[p * 3 + 2] - col[q * 3 + 2];
    return r2 * (dx * dx + dy * dy) + dr * dr + dg * dg + db * db;
  };

  std::vector<double> density(static_cast<std::size_t>(n), 0.0);
  parallel_for(h, threads, [&](std::int64_t yb, std::int64_t ye) {
    for (std::int64_t y = yb; y < ye; ++y) {
      for (int x = 0; x < w; ++x) {
        std::int64_t p = y * w + x;
        double acc = 0.0;
        int y0 = std::max<std::int64_t>(0, y - win), y1 = std::min<std::int64_t>(h - 1, y + win);
        int x0 = std::max(0, x - win), x1 = std::min(w - 1, x + win);
        for (int qy = y0; qy <= y1; ++qy)
          for (int qx = x0; qx <= x1; ++qx) {
            std::int64_t q = std::int64_t(qy) * w + qx;
            double d2 = joint_d2(p, x, int(y), q, qx, qy);
            if (d2 > skip_d2) continue;
            acc += std::exp(-d2 / sigma2x2);
          }
        density[p] = acc;
      }
    }
  });

  // link each pixel to its nearest admissible denser neighbor
  std::vector<std::int64_t> parent(static_cast<std::size_t>(n));
  parallel_for(h, threads, [&](std::int64_t yb, std::int64_t ye) {
    for (std::int64_t y = yb; y < ye; ++y) {
      for (int x = 0; x < w; ++x) {
        std::int64_t p = y * w + x;
        std::int64_t best = p;
        double best_d2 = std::numeric_limits<double>::infinity();
        int y0 = std::max<std::int64_t>(0, y - win), y1 = std::min<std::int64_t>(h - 1, y + win);
        int x0 = std::max(0, x - win), x1 = std::min(w - 1, x + win);
        for (int qy = y0; qy <= y1; ++qy)
          for (int qx = x0; qx <= x1; ++qx) {
            std::int64_t q = std::int64_t(qy) * w + qx;
            if (q == p) continue;
            bool denser = density[q] > density[p] || (density[q] == density[p] && q < p);
            if (!denser) continue;
            double d2 = joint_d2(p, x, int(y), q, qx, qy);
            if (d2 > max_d2) continue;
            if (d2 < best_d2) {  // scan order breaks exact ties toward smaller q
              best_d2 = d2;
              best = q;
            }
          }
        parent[p] = best;
      }
    }
  });

  // resolve forest roots
  std::vector<std::int64_t> root(static_cast<std::size_t>(n), -1);
  std::vector<std::int64_t> path;
  for (std::int64_t i = 0; i < n; ++i) {
    if (root[i] >= 0) continue;
    path.clear();
    std::int64_t cur = i;
    while (root[cur] < 0 && parent[cur] != cur) {
      path.push_back(cur);
      cur = parent[cur];
    }
    std::int64_t r = root[cur] >= 0 ? root[cur] : cur;
    for (std::int64_t v : path) root[v] = r;
    root[cur] = r;
  }

  // split trees into 4-connected components, relabel densely in scan order
  SuperpixelMap sp;
  sp.width = w;
  sp.height = h;
  sp.labels.assign(static_cast<std::size_t>(n), -1);
  std::vector<std::int64_t> stack;
  std::int32_t next_label = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    if (sp.labels[i] >= 0) continue;
    std::int32_t lab = next_label++;
    stack.clear();
    stack.push_back(i);
    sp.labels[i] = lab;
    while (!stack.empty()) {
      std::int64_t p = stack.back();
      stack.pop_back();
      int px = static_cast<int>(p % w), py = static_cast<int>(p / w);
      const int dx4[] = {1, -1, 0, 0}, dy4[] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        int nx = px + dx4[k], ny = py + dy4[k];
        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
        std::int64_t q = std::int64_t(ny) * w + nx;
        if (sp.labels[q] < 0 && root[q] == root[p]) {
          sp.labels[q] = lab;
          stack.push_back(q);
        }
      }
    }
  }

  sp.stats.assign(next_label, SuperpixelStats{});
  std::vector<std::array<double, 3>> csum(next_label, {0, 0, 0});
  for (std::int64_t i = 0; i < n; ++i) {
    std::int32_t lab = sp.labels[i];
    SuperpixelStats& st = sp.stats[lab];
    st.area += 1;
    st.cx += double(i % w);
    st.cy += double(i / w);
    csum[lab][0] += col[i * 3];
    csum[lab][1] += col[i * 3 + 1];
    csum[lab][2] += col[i * 3 + 2];
  }
  for (std::int32_t lab = 0; lab < next_label; ++lab) {
    SuperpixelStats& st = sp.stats[lab];
    st.cx /= double(st.area);
    st.cy /= double(st.area);
    for (int c = 0; c < 3; ++c) st.mean_color[c] = csum[lab][c] / double(st.area);
  }
  return sp;
}

RasterImage mean_color_image(const SuperpixelMap& sp, const RasterImage& img) {
  require_valid(img, "mean_color_image");
  if (img.width != sp.width || img.height != sp.height)
    throw std::invalid_argument("mean_color_image: dimension mismatch");
  RasterImage out = RasterImage::make(sp.width, sp.height, 3);
  std::vector<std::array<std::uint8_t, 3>> rounded(sp.stats.size());
  for (std::size_t i = 0; i < sp.stats.size(); ++i)
    for (int c = 0; c < 3; ++c)
      rounded[i][c] = static_cast<std::uint8_t>(std::nearbyint(sp.stats[i].mean_color[c]));
  const std::int64_t n = std::int64_t(sp.width) * sp.height;
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& rc = rounded[sp.labels[i]];
    out.pixels[i * 3] = rc[0];
    out.pixels[i * 3 + 1] = rc[1];
    out.pixels[i * 3 + 2] = rc[2];
  }
  return out;
}

RegionGraph build_region_graph(const SuperpixelMap& sp) {
  RegionGraph g;
  g.nodes.resize(sp.stats.size());
  for (std::size_t i = 0; i < sp.stats.size(); ++i) {
    const SuperpixelStats& st = sp.stats[i];
    RegionNode& nd = g.nodes[i];
    nd.cx = st.cx;
    nd.cy = st.cy;
    nd.mean_color = st.mean_color;
    nd.color_norm = std::sqrt(st.mean_color[0] * st.mean_color[0] +
                              st.mean_color[1] * st.mean_color[1] +
                              st.mean_color[2] * st.mean_color[2]);
    nd.area = st.area;
  }

  std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
  for (int y = 0; y < sp.height; ++y)
    for (int x = 0; x < sp.width; ++x) {
      std::int32_t a = sp.label_at(x, y);
      if (x + 1 < sp.width) {
        std::int32_t b = sp.label_at(x + 1, y);
        if (a != b) pairs.emplace_back(std::min(a, b), std::max(a, b));
      }
      if (y + 1 < sp.height) {
        std::int32_t b = sp.label_at(x, y + 1);
        if (a != b) pairs.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  g.edges.reserve(pairs.size());
  g.adjacency.assign(g.nodes.size(), {});
  for (auto [u, v] : pairs) {
    double wgt = std::abs(g.nodes[u].color_norm - g.nodes[v].color_norm);
    g.edges.push_back({u, v, wgt});
    g.adjacency[u].emplace_back(v, wgt);
    g.adjacency[v].emplace_back(u, wgt);
  }
  for (auto& adj : g.adjacency) std::sort(adj.begin(), adj.end());
  return g;
}

NucleiMask nuclei_cut(const RegionGraph& g, const SuperpixelMap& sp, double threshold,
                      std::optional<double> dark_cutoff) {
  if (threshold < 0.0) throw std::invalid_argument("nuclei_cut: threshold must be >= 0");
  const int n = static_cast<int>(g.nodes.size());

  UnionFind uf(n);
  for (const RegionEdge& e : g.edges)
    if (e.weight <= threshold) uf.unite(e.u, e.v);

  // gather components keyed by root, ordered by smallest member id
  std::vector<std::vector<std::int32_t>> comps;
  std::vector<std::int32_t> comp_of(n, -1);
  for (std::int32_t i = 0; i < n; ++i) {
    std::int32_t r = uf.find(i);
    if (comp_of[r] < 0) {
      comp_of[r] = static_cast<std::int32_t>(comps.size());
      comps.emplace_back();
    }
    comps[comp_of[r]].push_back(i);
  }

  std::vector<double> comp_norm(comps.size(), 0.0), comp_area(comps.size(), 0.0);
  for (std::size_t c = 0; c < comps.size(); ++c) {
    double wsum = 0.0, nsum = 0.0;
    for (std::int32_t id : comps[c]) {
      wsum += double(g.nodes[id].area);
      nsum += double(g.nodes[id].area) * g.nodes[id].color_norm;
    }
    comp_area[c] = wsum;
    comp_norm[c] = wsum > 0 ? nsum / wsum : 0.0;
  }

  std::optional<double> cutoff = dark_cutoff;
  if (!cutoff) cutoff = otsu_norm_cutoff(comp_norm, {});  // one sample per component

  NucleiMask out;
  out.mask = BinaryMask::make(sp.width, sp.height, false);
  if (!cutoff) return out;  // degenerate single-class distribution: no nuclei

  std::vector<char> is_nucleus_node(n, 0);
  for (std::size_t c = 0; c < comps.size(); ++c) {
    if (comp_norm[c] < *cutoff) {
      out.components.push_back(comps[c]);
      for (std::int32_t id : comps[c]) is_nucleus_node[id] = 1;
    }
  }
  const std::int64_t npx = std::int64_t(sp.width) * sp.height;
  for (std::int64_t i = 0; i < npx; ++i)
    if (is_nucleus_node[sp.labels[i]]) out.mask.bits[i] = 1;
  return out;
}

std::vector<CellSubgraph> cell_subgraphs(const RegionGraph& g, const SuperpixelMap& sp,
                                         const NucleiMask& nuclei, double grow_threshold,
                                         std::optional<double> background_norm) {
  if (grow_threshold < 0.0)
    throw std::invalid_argument("cell_subgraphs: grow_threshold must be >= 0");
  const int n = static_cast<int>(g.nodes.size());

  std::optional<double> bg = background_norm;
  if (!bg) {
    std::vector<double> norms(n), areas(n);
    for (int i = 0; i < n; ++i) {
      norms[i] = g.nodes[i].color_norm;
      areas[i] = double(g.nodes[i].area);
    }
    bg = otsu_norm_cutoff(norms, areas);
    if (!bg) bg = std::numeric_limits<double>::infinity();  // single-class: nothing is background
  }

  std::vector<CellSubgraph> out;
  for (std::size_t k = 0; k < nuclei.components.size(); ++k) {
    std::vector<char> visited(n, 0);
    std::deque<std::int32_t> frontier;
    std::vector<std::int32_t> seeds = nuclei.components[k];
    std::sort(seeds.begin(), seeds.end());
    for (std::int32_t s : seeds) {
      visited[s] = 1;
      frontier.push_back(s);
    }
    while (!frontier.empty()) {
      std::int32_t u = frontier.front();
      frontier.pop_front();
      for (auto [v, wgt] : g.adjacency[u]) {  // ascending node order
        if (visited[v]) continue;
        if (wgt > grow_threshold) continue;
        if (!(g.nodes[v].color_norm < *bg)) continue;
        visited[v] = 1;
        frontier.push_back(v);
      }
    }
    CellSubgraph cs;
    cs.nucleus_id = static_cast<int>(k);
    for (std::int32_t i = 0; i < n; ++i)
      if (visited[i]) cs.members.push_back(i);
    cs.mask = BinaryMask::make(sp.width, sp.height, false);
    const std::int64_t npx = std::int64_t(sp.width) * sp.height;
    for (std::int64_t i = 0; i < npx; ++i)
      if (visited[sp.labels[i]]) cs.mask.bits[i] = 1;
    out.push_back(std::move(cs));
  }
  return out;
}

std::vector<std::uint16_t> label_map_16bit(const SuperpixelMap& sp) {
  if (sp.count() > 65536)
    throw std::runtime_error("label_map_16bit: more than 65536 superpixels");
  std::vector<std::uint16_t> out(sp.labels.size());
  for (std::size_t i = 0; i < sp.labels.size(); ++i)
    out[i] = static_cast<std::uint16_t>(sp.labels[i]);
  return out;
}

std::string format_edge_list(const RegionGraph& g) {
  std::string out = "u,v,weight\n";
  char buf[96];
  for (const RegionEdge& e : g.edges) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.4f\n", e.u, e.v, e.weight);
    out += buf;
  }
  return out;
}

}  // namespace cyto
