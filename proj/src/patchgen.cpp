#include "cyto/patchgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cyto/parallel.hpp"

namespace cyto {

std::vector<PatchWindow> sliding_patches(const RasterImage& roi, int size, int stride) {
  require_valid(roi, "sliding_patches");
  if (size < 1 || stride < 1) throw std::invalid_argument("sliding_patches: bad size/stride");
  std::vector<PatchWindow> out;
  if (roi.width < size || roi.height < size) return out;  // empty, caller warns
  for (int y = 0; y + size <= roi.height; y += stride)
    for (int x = 0; x + size <= roi.width; x += stride) {
      PatchWindow w;
      w.x = x;
      w.y = y;
      w.image = RasterImage::make(size, size, roi.channels);
      const std::size_t row_bytes = static_cast<std::size_t>(size) * roi.channels;
      for (int r = 0; r < size; ++r) {
        const std::uint8_t* s = &roi.pixels[roi.index(x, y + r)];
        std::copy(s, s + row_bytes, &w.image.pixels[w.image.index(0, r)]);
      }
      out.push_back(std::move(w));
    }
  return out;
}

double background_fraction(const RasterImage& patch, int white_cutoff) {
  require_valid(patch, "background_fraction");
  const std::size_t n = patch.pixel_count();
  std::size_t bg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    int mn = patch.pixels[i * patch.channels];
    for (int c = 1; c < patch.channels; ++c)
      mn = std::min(mn, int(patch.pixels[i * patch.channels + c]));
    if (mn >= white_cutoff) ++bg;
  }
  return double(bg) / double(n);
}

LabelResult label_patch(int origin_x, int origin_y, int size, const BinaryMask& abnormal_mask,
                        double abn_threshold) {
  if (origin_x < 0 || origin_y < 0 || origin_x + size > abnormal_mask.width ||
      origin_y + size > abnormal_mask.height)
    throw std::out_of_range("label_patch: window outside mask bounds");
  std::int64_t set = 0;
  for (int y = origin_y; y < origin_y + size; ++y)
    for (int x = origin_x; x < origin_x + size; ++x) set += abnormal_mask.test(x, y) ? 1 : 0;
  LabelResult r;
  r.abn_fraction = double(set) / (double(size) * double(size));
  r.label = r.abn_fraction > abn_threshold ? ClassLabel::Abnormal : ClassLabel::Normal;
  return r;
}

std::vector<PatchRecord> extract_patches(const RasterImage& roi, const BinaryMask* abnormal_mask,
                                         int roi_id, const PatchConfig& cfg, int threads) {
  if (abnormal_mask &&
      (abnormal_mask->width != roi.width || abnormal_mask->height != roi.height))
    throw std::invalid_argument("extract_patches: mask dimensions do not match the ROI");

  std::vector<PatchWindow> windows = sliding_patches(roi, cfg.size, cfg.stride);
  std::vector<PatchRecord> all(windows.size());
  parallel_for(static_cast<std::int64_t>(windows.size()), threads,
               [&](std::int64_t b, std::int64_t e) {
                 for (std::int64_t i = b; i < e; ++i) {
                   PatchRecord& r = all[i];
                   r.roi_id = roi_id;
                   r.x = windows[i].x;
                   r.y = windows[i].y;
                   r.size = cfg.size;
                   r.bg_fraction = background_fraction(windows[i].image, cfg.white_cutoff);
                   if (abnormal_mask) {
                     LabelResult lr =
                         label_patch(r.x, r.y, cfg.size, *abnormal_mask, cfg.abn_threshold);
                     r.abn_fraction = lr.abn_fraction;
                     r.label = lr.label;
                   }
                   r.image = std::move(windows[i].image);
                 }
               });

  std::vector<PatchRecord> kept;
  kept.reserve(all.size());
  for (PatchRecord& r : all)
    if (r.bg_fraction <= cfg.bg_discard) kept.push_back(std::move(r));
  return kept;
}

std::vector<PatchRecord> centroid_patches(const BinaryMask& abnormal_mask, const RasterImage& roi,
                                          int roi_id, const PatchConfig& cfg) {
  if (abnormal_mask.width != roi.width || abnormal_mask.height != roi.height)
    throw std::invalid_argument("centroid_patches: mask dimensions do not match the ROI");
  if (roi.width < cfg.size || roi.height < cfg.size)
    throw std::invalid_argument("centroid_patches: ROI smaller than the window");

  std::vector<PatchRecord> out;
  for (const Component& c : connected_components(abnormal_mask)) {
    int ox = static_cast<int>(std::lround(c.cx)) - cfg.size / 2;
    int oy = static_cast<int>(std::lround(c.cy)) - cfg.size / 2;
    ox = std::clamp(ox, 0, roi.width - cfg.size);
    oy = std::clamp(oy, 0, roi.height - cfg.size);

    PatchRecord r;
    r.roi_id = roi_id;
    r.x = ox;
    r.y = oy;
    r.size = cfg.size;
    r.image = RasterImage::make(cfg.size, cfg.size, roi.channels);
    const std::size_t row_bytes = static_cast<std::size_t>(cfg.size) * roi.channels;
    for (int row = 0; row < cfg.size; ++row) {
      const std::uint8_t* s = &roi.pixels[roi.index(ox, oy + row)];
      std::copy(s, s + row_bytes, &r.image.pixels[r.image.index(0, row)]);
    }
    r.bg_fraction = background_fraction(r.image, cfg.white_cutoff);
    r.abn_fraction = label_patch(ox, oy, cfg.size, abnormal_mask, cfg.abn_threshold).abn_fraction;
    r.label = ClassLabel::Abnormal;
    out.push_back(std::move(r));
  }
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
  std::uint64_t bounded(std::uint64_t n) {
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }
};

template <typename T>
void fisher_yates(std::vector<T>& v, SplitMix64& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng.bounded(i)]);
}

}  // namespace

DatasetSplit balance_and_split(const std::vector<LabeledId>& patches,
                               const std::vector<LabeledId>& external, const SplitConfig& cfg,
                               std::uint64_t seed) {
  std::vector<LabeledId> abn, nrm, ext_n, ext_a;
  for (const auto& p : patches) (p.label == ClassLabel::Abnormal ? abn : nrm).push_back(p);
  for (const auto& e : external) (e.label == ClassLabel::Abnormal ? ext_a : ext_n).push_back(e);

  const std::size_t a = abn.size();
  if (nrm.size() < a)
    throw std::runtime_error("balance_and_split: " + std::to_string(nrm.size()) +
                             " normal patches cannot balance " + std::to_string(a) + " abnormal");

  const std::size_t per_class =
      std::size_t(cfg.train_per_class) + cfg.val_per_class + cfg.test_per_class;
  if (per_class != a)
    throw std::runtime_error("balance_and_split: per-class counts sum to " +
                             std::to_string(per_class) + " but the balanced pool has " +
                             std::to_string(a) + " records per class");
  if (std::size_t(cfg.ext_train_normal) + cfg.ext_val_normal != ext_n.size())
    throw std::runtime_error("balance_and_split: external normal counts sum to " +
                             std::to_string(cfg.ext_train_normal + cfg.ext_val_normal) +
                             " but " + std::to_string(ext_n.size()) + " records were given");
  if (std::size_t(cfg.ext_train_abnormal) + cfg.ext_val_abnormal != ext_a.size())
    throw std::runtime_error("balance_and_split: external abnormal counts sum to " +
                             std::to_string(cfg.ext_train_abnormal + cfg.ext_val_abnormal) +
                             " but " + std::to_string(ext_a.size()) + " records were given");

  SplitMix64 rng(seed ^ 0x5EEDC0DEB00B5ull);
  fisher_yates(nrm, rng);
  nrm.resize(a);  // uniform sample without replacement
  fisher_yates(abn, rng);
  fisher_yates(nrm, rng);
  fisher_yates(ext_n, rng);
  fisher_yates(ext_a, rng);

  DatasetSplit out;
  out.seed = seed;
  auto take = [](std::vector<LabeledId>& pool, std::size_t& cursor, int count, bool external,
                 std::vector<SplitEntry>& dest) {
    for (int i = 0; i < count; ++i, ++cursor)
      dest.push_back({pool[cursor].id, pool[cursor].label, external});
  };

  std::size_t ca = 0, cn = 0, cen = 0, cea = 0;
  take(nrm, cn, cfg.train_per_class, false, out.train);
  take(abn, ca, cfg.train_per_class, false, out.train);
  take(ext_n, cen, cfg.ext_train_normal, true, out.train);
  take(ext_a, cea, cfg.ext_train_abnormal, true, out.train);

  take(nrm, cn, cfg.val_per_class, false, out.validation);
  take(abn, ca, cfg.val_per_class, false, out.validation);
  take(ext_n, cen, cfg.ext_val_normal, true, out.validation);
  take(ext_a, cea, cfg.ext_val_abnormal, true, out.validation);

  take(nrm, cn, cfg.test_per_class, false, out.test);
  take(abn, ca, cfg.test_per_class, false, out.test);

  fisher_yates(out.train, rng);
  fisher_yates(out.validation, rng);
  fisher_yates(out.test, rng);
  return out;
}

std::string patch_file_name(int roi_id, int x, int y) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "roi%d_x%d_y%d.png", roi_id, x, y);
  return buf;
}

std::string patch_manifest_header() {
  return "patch_path,roi_id,origin_x,origin_y,label,abn_fraction,bg_fraction\n";
}

std::string format_patch_manifest_row(const std::string& path, const PatchRecord& r) {
  char buf[320];
  std::snprintf(buf, sizeof(buf), "%s,%d,%d,%d,%s,%.5f,%.5f\n", path.c_str(), r.roi_id, r.x, r.y,
                to_string(r.label), r.abn_fraction, r.bg_fraction);
  return buf;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::vector<PatchManifestRow> read_patch_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_patch_manifest: cannot open " + path);
  std::vector<PatchManifestRow> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("patch_path,", 0) == 0) continue;
    auto cols = split_csv(line);
    if (cols.size() != 7)
      throw std::runtime_error("read_patch_manifest: " + path + ": malformed line " +
                               std::to_string(lineno));
    PatchManifestRow r;
    r.path = cols[0];
    try {
      r.roi_id = std::stoi(cols[1]);
      r.x = std::stoi(cols[2]);
      r.y = std::stoi(cols[3]);
      r.label = parse_label(cols[4]);
      r.abn_fraction = std::stod(cols[5]);
      r.bg_fraction = std::stod(cols[6]);
    } catch (const std::exception& e) {
      throw std::runtime_error("read_patch_manifest: " + path + ": line " +
                               std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<LabeledId> read_labeled_ids(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_labeled_ids: cannot open " + path);
  std::vector<LabeledId> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("id,", 0) == 0) continue;
    auto cols = split_csv(line);
    if (cols.size() != 2)
      throw std::runtime_error("read_labeled_ids: " + path + ": malformed line " +
                               std::to_string(lineno));
    try {
      out.push_back({cols[0], parse_label(cols[1])});
    } catch (const std::exception& e) {
      throw std::runtime_error("read_labeled_ids: " + path + ": line " + std::to_string(lineno) +
                               ": " + e.what());
    }
  }
  return out;
}

void write_split_manifest(const std::string& path, const std::vector<SplitEntry>& entries) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_split_manifest: cannot open " + path);
  f << "id,label,source\n";
  for (const SplitEntry& e : entries)
    f << e.id << ',' << to_string(e.label) << ',' << (e.external ? "external" : "patch") << '\n';
}

std::vector<SplitEntry> read_split_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_split_manifest: cannot open " + path);
  std::vector<SplitEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("id,", 0) == 0) continue;
    auto cols = split_csv(line);
    if (cols.size() != 3)
      throw std::runtime_error("read_split_manifest: " + path + ": malformed line " +
                               std::to_string(lineno));
    SplitEntry e;
    e.id = cols[0];
    e.label = parse_label(cols[1]);
    if (cols[2] == "external")
      e.external = true;
    else if (cols[2] == "patch")
      e.external = false;
    else
      throw std::runtime_error("read_split_manifest: " + path + ": unknown source on line " +
                               std::to_string(lineno));
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace cyto
