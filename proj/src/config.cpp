#include "cyto/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace cyto {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    std::int64_t r = std::stoll(v, &used);
    if (used != v.size()) throw std::runtime_error("trailing characters");
    return r;
  } catch (const std::exception&) {
    throw std::runtime_error("config: " + key + ": expected integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double r = std::stod(v, &used);
    if (used != v.size()) throw std::runtime_error("trailing characters");
    return r;
  } catch (const std::exception&) {
    throw std::runtime_error("config: " + key + ": expected number, got '" + v + "'");
  }
}

}  // namespace

void apply_override(PipelineConfig& c, const std::string& key, const std::string& value) {
  auto i = [&] { return parse_int(key, value); };
  auto d = [&] { return parse_double(key, value); };

  if (key == "seed")
    c.seed = static_cast<std::uint64_t>(i());
  else if (key == "threads")
    c.threads = static_cast<int>(i());
  else if (key == "fast_threshold")
    c.reg.fast_threshold = static_cast<int>(i());
  else if (key == "max_keypoints")
    c.reg.max_keypoints = static_cast<int>(i());
  else if (key == "match_ratio")
    c.reg.match_ratio = d();
  else if (key == "ransac_inlier_px")
    c.reg.inlier_px = d();
  else if (key == "ransac_max_iters")
    c.reg.max_iters = static_cast<int>(i());
  else if (key == "ink_close_radius")
    c.ink.close_radius = static_cast<int>(i());
  else if (key == "ink_open_radius")
    c.ink.open_radius = static_cast<int>(i());
  else if (key == "min_skeleton_px")
    c.ink.min_skeleton_px = static_cast<int>(i());
  else if (key == "roi_margin_px")
    c.ink.margin_px = static_cast<int>(i());
  else if (key == "qs_kernel_size")
    c.qs.kernel_size = d();
  else if (key == "qs_max_dist")
    c.qs.max_dist = d();
  else if (key == "qs_ratio")
    c.qs.ratio = d();
  else if (key == "cut_threshold")
    c.cut_threshold = d();
  else if (key == "grow_threshold")
    c.grow_threshold = d();
  else if (key == "dark_cutoff")
    c.dark_cutoff = d();
  else if (key == "background_norm")
    c.background_norm = d();
  else if (key == "patch_size")
    c.patch.size = static_cast<int>(i());
  else if (key == "patch_stride")
    c.patch.stride = static_cast<int>(i());
  else if (key == "white_cutoff")
    c.patch.white_cutoff = static_cast<int>(i());
  else if (key == "bg_discard_fraction")
    c.patch.bg_discard = d();
  else if (key == "abn_label_fraction")
    c.patch.abn_threshold = d();
  else if (key == "split_train_per_class")
    c.split.train_per_class = static_cast<int>(i());
  else if (key == "split_val_per_class")
    c.split.val_per_class = static_cast<int>(i());
  else if (key == "split_test_per_class")
    c.split.test_per_class = static_cast<int>(i());
  else if (key == "ext_train_normal")
    c.split.ext_train_normal = static_cast<int>(i());
  else if (key == "ext_val_normal")
    c.split.ext_val_normal = static_cast<int>(i());
  else if (key == "ext_train_abnormal")
    c.split.ext_train_abnormal = static_cast<int>(i());
  else if (key == "ext_val_abnormal")
    c.split.ext_val_abnormal = static_cast<int>(i());
  else if (key == "learning_rate")
    c.train.learning_rate = d();
  else if (key == "momentum")
    c.train.momentum = d();
  else if (key == "batch_size")
    c.train.batch_size = static_cast<int>(i());
  else if (key == "max_epochs")
    c.train.max_epochs = static_cast<int>(i());
  else if (key == "eval_threshold")
    c.eval_threshold = d();
  else
    throw std::runtime_error("config: unknown key '" + key + "'");
}

PipelineConfig load_config_text(const std::string& text, PipelineConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(lineno) + ": expected key=value");
    apply_override(base, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  validate(base);
  return base;
}

PipelineConfig load_config_file(const std::string& path, PipelineConfig base) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return load_config_text(ss.str(), base);
}

void validate(const PipelineConfig& c) {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw std::runtime_error(std::string("config: ") + msg);
  };
  require(c.threads >= 0, "threads must be >= 0");
  require(c.reg.fast_threshold >= 1, "fast_threshold must be >= 1");
  require(c.reg.max_keypoints >= 4, "max_keypoints must be >= 4");
  require(c.reg.match_ratio > 0.0 && c.reg.match_ratio <= 1.0, "match_ratio must be in (0,1]");
  require(c.reg.inlier_px > 0.0, "ransac_inlier_px must be > 0");
  require(c.reg.max_iters >= 1, "ransac_max_iters must be >= 1");
  require(c.ink.close_radius >= 1, "ink_close_radius must be >= 1");
  require(c.ink.open_radius >= 1, "ink_open_radius must be >= 1");
  require(c.ink.min_skeleton_px >= 0, "min_skeleton_px must be >= 0");
  require(c.ink.margin_px >= 0, "roi_margin_px must be >= 0");
  require(c.qs.kernel_size > 0.0, "qs_kernel_size must be > 0");
  require(c.qs.max_dist >= c.qs.kernel_size, "qs_max_dist must be >= qs_kernel_size");
  require(c.qs.ratio > 0.0 && c.qs.ratio <= 1.0, "qs_ratio must be in (0,1]");
  require(c.cut_threshold >= 0.0, "cut_threshold must be >= 0");
  require(c.grow_threshold >= 0.0, "grow_threshold must be >= 0");
  require(c.patch.size >= 1, "patch_size must be >= 1");
  require(c.patch.stride >= 1, "patch_stride must be >= 1");
  require(c.patch.white_cutoff >= 0 && c.patch.white_cutoff <= 255,
          "white_cutoff must be in [0,255]");
  require(c.patch.bg_discard >= 0.0 && c.patch.bg_discard <= 1.0,
          "bg_discard_fraction must be in [0,1]");
  require(c.patch.abn_threshold >= 0.0 && c.patch.abn_threshold < 1.0,
          "abn_label_fraction must be in [0,1)");
  require(c.split.train_per_class >= 0 && c.split.val_per_class >= 0 &&
              c.split.test_per_class >= 0,
          "split counts must be >= 0");
  require(c.split.ext_train_normal >= 0 && c.split.ext_val_normal >= 0 &&
              c.split.ext_train_abnormal >= 0 && c.split.ext_val_abnormal >= 0,
          "external split counts must be >= 0");
  require(c.train.learning_rate > 0.0, "learning_rate must be > 0");
  require(c.train.momentum >= 0.0 && c.train.momentum < 1.0, "momentum must be in [0,1)");
  require(c.train.batch_size >= 1, "batch_size must be >= 1");
  require(c.train.max_epochs >= 1, "max_epochs must be >= 1");
  require(c.eval_threshold >= 0.0 && c.eval_threshold <= 1.0,
          "eval_threshold must be in [0,1]");
}

std::map<std::string, std::string> config_snapshot(const PipelineConfig& c) {
  std::map<std::string, std::string> m;
  char buf[64];
  auto put_i = [&](const char* k, std::int64_t v) { m[k] = std::to_string(v); };
  auto put_d = [&](const char* k, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    m[k] = buf;
  };
  put_i("seed", static_cast<std::int64_t>(c.seed));
  put_i("threads", c.threads);
  put_i("fast_threshold", c.reg.fast_threshold);
  put_i("max_keypoints", c.reg.max_keypoints);
  put_d("match_ratio", c.reg.match_ratio);
  put_d("ransac_inlier_px", c.reg.inlier_px);
  put_i("ransac_max_iters", c.reg.max_iters);
  put_i("ink_close_radius", c.ink.close_radius);
  put_i("ink_open_radius", c.ink.open_radius);
  put_i("min_skeleton_px", c.ink.min_skeleton_px);
  put_i("roi_margin_px", c.ink.margin_px);
  put_d("qs_kernel_size", c.qs.kernel_size);
  put_d("qs_max_dist", c.qs.max_dist);
  put_d("qs_ratio", c.qs.ratio);
  put_d("cut_threshold", c.cut_threshold);
  put_d("grow_threshold", c.grow_threshold);
  put_d("dark_cutoff", c.dark_cutoff);
  put_d("background_norm", c.background_norm);
  put_i("patch_size", c.patch.size);
  put_i("patch_stride", c.patch.stride);
  put_i("white_cutoff", c.patch.white_cutoff);
  put_d("bg_discard_fraction", c.patch.bg_discard);
  put_d("abn_label_fraction", c.patch.abn_threshold);
  put_i("split_train_per_class", c.split.train_per_class);
  put_i("split_val_per_class", c.split.val_per_class);
  put_i("split_test_per_class", c.split.test_per_class);
  put_i("ext_train_normal", c.split.ext_train_normal);
  put_i("ext_val_normal", c.split.ext_val_normal);
  put_i("ext_train_abnormal", c.split.ext_train_abnormal);
  put_i("ext_val_abnormal", c.split.ext_val_abnormal);
  put_d("learning_rate", c.train.learning_rate);
  put_d("momentum", c.train.momentum);
  put_i("batch_size", c.train.batch_size);
  put_i("max_epochs", c.train.max_epochs);
  put_d("eval_threshold", c.eval_threshold);
  return m;
}

}  // namespace cyto
