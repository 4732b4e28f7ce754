// cyto: command-line pipeline for inked/clean slide pairs.
//
// Subcommands: import, register, roi, cellgraph, patchify, split, train,
// predict, eval, report. Every stage reads/writes the documented file
// formats and drops a run_manifest.json (config snapshot + CRC32 digests +
// timings) next to its outputs.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cyto/cellgraph.hpp"
#include "cyto/config.hpp"
#include "cyto/eval.hpp"
#include "cyto/inkroi.hpp"
#include "cyto/parallel.hpp"
#include "cyto/patchgen.hpp"
#include "cyto/png_io.hpp"
#include "cyto/pyramid.hpp"
#include "cyto/raster.hpp"
#include "cyto/registration.hpp"
#include "cyto/runmeta.hpp"

namespace fs = std::filesystem;
using namespace cyto;

namespace {

struct StageTimer {
  std::map<std::string, std::int64_t>& sink;
  std::string stage;
  std::chrono::steady_clock::time_point start;
  StageTimer(std::map<std::string, std::int64_t>& s, std::string name)
      : sink(s), stage(std::move(name)), start(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - start)
                  .count();
    sink[stage] = ms;
  }
};

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::int64_t> seed;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "key=value config file");
  cmd->add_option("--set", opts.sets, "config override key=value (repeatable)");
  cmd->add_option("--seed", opts.seed, "global seed (expands to per-stage seeds)");
  cmd->add_option("--threads", opts.threads, "worker thread cap (0 = hardware)");
}

PipelineConfig resolve_config(const CommonOpts& opts) {
  PipelineConfig cfg;
  if (!opts.config_path.empty()) cfg = load_config_file(opts.config_path, cfg);
  for (const std::string& s : opts.sets) {
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("--set expects key=value, got '" + s + "'");
    apply_override(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (opts.seed) cfg.seed = static_cast<std::uint64_t>(*opts.seed);
  if (opts.threads) cfg.threads = *opts.threads;
  validate(cfg);
  return cfg;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << content;
}

void write_homography(const std::string& path, const Homography& h) {
  char buf[256];
  std::string out;
  for (int r = 0; r < 3; ++r) {
    std::snprintf(buf, sizeof(buf), "%.12e %.12e %.12e\n", h.h(r, 0), h.h(r, 1), h.h(r, 2));
    out += buf;
  }
  write_text(path, out);
}

Homography read_homography(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open homography file " + path);
  Homography h;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (!(f >> h.h(r, c))) throw std::runtime_error("malformed homography file " + path);
  if (std::abs(h.h(2, 2)) < 1e-12) throw std::runtime_error("degenerate homography in " + path);
  h.h /= h.h(2, 2);
  h.h(2, 2) = 1.0;
  return h;
}

std::vector<FileDigest> digest_pyramid_dir(const std::string& dir) {
  std::vector<FileDigest> out;
  out.push_back(digest_file((fs::path(dir) / "meta.txt").string()));
  for (int k = 0;; ++k) {
    fs::path p = fs::path(dir) / ("level_" + std::to_string(k) + ".png");
    if (!fs::exists(p)) break;
    out.push_back(digest_file(p.string()));
  }
  return out;
}

void finish_manifest(RunManifest& rm, const PipelineConfig& cfg, const std::string& dir) {
  rm.config = config_snapshot(cfg);
  write_run_manifest((fs::path(dir) / "run_manifest.json").string(), rm);
}

// ---------------------------------------------------------------------------

int cmd_import(const std::string& input, const std::string& out_dir, int levels, int factor,
               double pixel_um, const PipelineConfig& cfg) {
  RunManifest rm;
  rm.command = "import";
  rm.inputs.push_back(digest_file(input));
  {
    StageTimer t(rm.timings_ms, "import");
    RasterImage img = read_png(input);
    ImagePyramid p = build_pyramid(img, levels, factor);
    p.pixel_um = pixel_um;
    save_pyramid(p, out_dir);
  }
  rm.outputs = digest_pyramid_dir(out_dir);
  finish_manifest(rm, cfg, out_dir);
  std::cout << "import: wrote " << levels << " levels to " << out_dir << "\n";
  return 0;
}

int cmd_register(const std::string& clean_dir, const std::string& inked_dir, int level,
                 const std::string& out_dir, const std::string& dump_matches,
                 const PipelineConfig& cfg) {
  fs::create_directories(out_dir);
  RunManifest rm;
  rm.command = "register";
  for (auto& d : digest_pyramid_dir(clean_dir)) rm.inputs.push_back(d);
  for (auto& d : digest_pyramid_dir(inked_dir)) rm.inputs.push_back(d);

  ImagePyramid clean, inked;
  {
    StageTimer t(rm.timings_ms, "load");
    clean = load_pyramid(clean_dir);
    inked = load_pyramid(inked_dir);
  }
  const RasterImage& ref = clean.level(level);
  const RasterImage& tgt = inked.level(level);

  Homography h;
  {
    StageTimer t(rm.timings_ms, "register");
    RasterImage ref_gray = to_gray(ref);
    RasterImage tgt_gray = to_gray(tgt);
    auto ref_kps = detect_keypoints(ref_gray, cfg.reg.fast_threshold, cfg.reg.max_keypoints);
    auto tgt_kps = detect_keypoints(tgt_gray, cfg.reg.fast_threshold, cfg.reg.max_keypoints);
    auto ref_d = compute_descriptors(ref_gray, ref_kps);
    auto tgt_d = compute_descriptors(tgt_gray, tgt_kps);
    if (ref_d.keypoints.size() < 4 || tgt_d.keypoints.size() < 4)
      throw std::runtime_error("register: too few keypoints (reference=" +
                               std::to_string(ref_d.keypoints.size()) +
                               ", target=" + std::to_string(tgt_d.keypoints.size()) + ")");
    auto matches = match_descriptors(ref_d.descriptors, tgt_d.descriptors, cfg.reg.match_ratio);
    if (matches.size() < 4)
      throw std::runtime_error("register: too few matches (" + std::to_string(matches.size()) +
                               " from " + std::to_string(ref_d.keypoints.size()) + "/" +
                               std::to_string(tgt_d.keypoints.size()) + " keypoints)");
    auto res = estimate_homography_ransac(matches, ref_d.keypoints, tgt_d.keypoints,
                                          cfg.reg.inlier_px, cfg.reg.max_iters,
                                          cfg.ransac_seed());
    h = res.h;
    std::cout << "register: " << matches.size() << " matches, " << res.inlier_count
              << " inliers\n";
    if (!dump_matches.empty()) {
      write_text(dump_matches,
                 format_match_table(matches, ref_d.keypoints, tgt_d.keypoints, res.inliers));
      rm.outputs.push_back(digest_file(dump_matches));
    }
  }

  std::string hpath = (fs::path(out_dir) / "homography.txt").string();
  write_homography(hpath, h);
  std::string ppath = (fs::path(out_dir) / "preview.png").string();
  {
    StageTimer t(rm.timings_ms, "warp_preview");
    write_png(ppath, warp(tgt, h, ref.width, ref.height));
  }
  rm.outputs.push_back(digest_file(hpath));
  rm.outputs.push_back(digest_file(ppath));
  finish_manifest(rm, cfg, out_dir);
  return 0;
}

int cmd_roi(const std::string& clean_dir, const std::string& inked_dir,
            const std::string& homography_path, int detect_level, int crop_level,
            const std::string& out_dir, const std::string& dump_mask,
            const PipelineConfig& cfg) {
  fs::create_directories(out_dir);
  RunManifest rm;
  rm.command = "roi";
  for (auto& d : digest_pyramid_dir(clean_dir)) rm.inputs.push_back(d);
  for (auto& d : digest_pyramid_dir(inked_dir)) rm.inputs.push_back(d);
  rm.inputs.push_back(digest_file(homography_path));

  ImagePyramid clean = load_pyramid(clean_dir);
  ImagePyramid inked = load_pyramid(inked_dir);
  Homography h = read_homography(homography_path);

  RoiSet rois;
  {
    StageTimer t(rm.timings_ms, "detect");
    const RasterImage& ref = clean.level(detect_level);
    RasterImage aligned = warp(inked.level(detect_level), h, ref.width, ref.height);
    BinaryMask ink = detect_ink_mask(aligned, &ref, cfg.ink);
    if (!dump_mask.empty()) {
      write_mask_png(dump_mask, ink);
      rm.outputs.push_back(digest_file(dump_mask));
    }
    rois = extract_roi_boxes(ink, detect_level, clean, cfg.ink);
  }

  std::string mpath = (fs::path(out_dir) / "roi_manifest.csv").string();
  write_roi_manifest(mpath, rois);
  rm.outputs.push_back(digest_file(mpath));
  if (rois.boxes.empty()) std::cerr << "warning: no ROIs detected, manifest is empty\n";

  {
    StageTimer t(rm.timings_ms, "crop");
    RoiCrops crops = crop_rois(clean, rois, crop_level);
    for (const std::string& w : crops.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& [box, img] : crops.crops) {
      std::string cpath = (fs::path(out_dir) / ("roi" + std::to_string(box.id) + ".png")).string();
      write_png(cpath, img);
      rm.outputs.push_back(digest_file(cpath));
    }
    std::cout << "roi: " << rois.boxes.size() << " boxes, " << crops.crops.size() << " crops\n";
  }
  finish_manifest(rm, cfg, out_dir);
  return 0;
}

int cmd_cellgraph(const std::string& input, const std::string& out_dir,
                  const PipelineConfig& cfg) {
  fs::create_directories(out_dir);
  RunManifest rm;
  rm.command = "cellgraph";
  rm.inputs.push_back(digest_file(input));

  RasterImage img = read_png(input);
  SuperpixelMap sp;
  {
    StageTimer t(rm.timings_ms, "quickshift");
    sp = quickshift(img, cfg.qs, cfg.threads);
  }
  RegionGraph g = build_region_graph(sp);
  std::optional<double> dark =
      cfg.dark_cutoff >= 0.0 ? std::optional<double>(cfg.dark_cutoff) : std::nullopt;
  std::optional<double> bg =
      cfg.background_norm >= 0.0 ? std::optional<double>(cfg.background_norm) : std::nullopt;
  NucleiMask nuclei;
  std::vector<CellSubgraph> cells;
  {
    StageTimer t(rm.timings_ms, "graph");
    nuclei = nuclei_cut(g, sp, cfg.cut_threshold, dark);
    cells = cell_subgraphs(g, sp, nuclei, cfg.grow_threshold, bg);
  }

  auto out = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };
  write_png16(out("labels.png"), label_map_16bit(sp), sp.width, sp.height);
  write_png(out("meancolor.png"), mean_color_image(sp, img));
  write_text(out("edges.csv"), format_edge_list(g));
  write_mask_png(out("nuclei.png"), nuclei.mask);
  {
    std::string s = "nucleus_id,node_count,nodes\n";
    for (const CellSubgraph& cs : cells) {
      s += std::to_string(cs.nucleus_id) + "," + std::to_string(cs.members.size()) + ",";
      for (std::size_t i = 0; i < cs.members.size(); ++i) {
        if (i) s += ' ';
        s += std::to_string(cs.members[i]);
      }
      s += '\n';
    }
    write_text(out("subgraphs.csv"), s);
  }
  for (const char* f : {"labels.png", "meancolor.png", "edges.csv", "nuclei.png", "subgraphs.csv"})
    rm.outputs.push_back(digest_file(out(f)));
  finish_manifest(rm, cfg, out_dir);
  std::cout << "cellgraph: " << sp.count() << " superpixels, " << nuclei.components.size()
            << " nuclei, " << cells.size() << " subgraphs\n";
  return 0;
}

int cmd_patchify(const std::string& crops_dir, const std::string& out_dir,
                 const PipelineConfig& cfg) {
  fs::create_directories(fs::path(out_dir) / "patches");
  RunManifest rm;
  rm.command = "patchify";

  // roi<k>.png with optional roi<k>_mask.png alongside
  std::vector<std::pair<int, fs::path>> crops;
  std::regex pat("^roi([0-9]+)\\.png$");
  for (const auto& e : fs::directory_iterator(crops_dir)) {
    std::smatch m;
    std::string name = e.path().filename().string();
    if (std::regex_match(name, m, pat)) crops.emplace_back(std::stoi(m[1].str()), e.path());
  }
  std::sort(crops.begin(), crops.end());
  if (crops.empty()) std::cerr << "warning: no roi<k>.png crops found in " << crops_dir << "\n";

  std::string manifest = patch_manifest_header();
  std::size_t total = 0, abnormal = 0;
  StageTimer t(rm.timings_ms, "patchify");
  for (const auto& [roi_id, path] : crops) {
    rm.inputs.push_back(digest_file(path.string()));
    RasterImage roi = read_png(path.string());
    fs::path mask_path = fs::path(crops_dir) / ("roi" + std::to_string(roi_id) + "_mask.png");
    BinaryMask mask;
    bool has_mask = fs::exists(mask_path);
    if (has_mask) {
      rm.inputs.push_back(digest_file(mask_path.string()));
      mask = read_mask_png(mask_path.string());
    }
    auto records = extract_patches(roi, has_mask ? &mask : nullptr, roi_id, cfg.patch,
                                   cfg.threads);
    if (records.empty() && (roi.width < cfg.patch.size || roi.height < cfg.patch.size))
      std::cerr << "warning: roi" << roi_id << " smaller than one window, no patches\n";
    for (const PatchRecord& r : records) {
      std::string name = patch_file_name(r.roi_id, r.x, r.y);
      write_png((fs::path(out_dir) / "patches" / name).string(), r.image);
      manifest += format_patch_manifest_row("patches/" + name, r);
      ++total;
      abnormal += r.label == ClassLabel::Abnormal;
    }
  }
  std::string mpath = (fs::path(out_dir) / "patch_manifest.csv").string();
  write_text(mpath, manifest);
  rm.outputs.push_back(digest_file(mpath));
  finish_manifest(rm, cfg, out_dir);
  std::cout << "patchify: " << total << " patches (" << abnormal << " abnormal) from "
            << crops.size() << " crops\n";
  return 0;
}

int cmd_split(const std::string& manifest_path, const std::string& external_path,
              const std::string& out_dir, const PipelineConfig& cfg) {
  fs::create_directories(out_dir);
  RunManifest rm;
  rm.command = "split";
  rm.inputs.push_back(digest_file(manifest_path));

  std::vector<LabeledId> patches;
  for (const PatchManifestRow& r : read_patch_manifest(manifest_path))
    patches.push_back({r.path, r.label});
  std::vector<LabeledId> external;
  if (!external_path.empty()) {
    rm.inputs.push_back(digest_file(external_path));
    external = read_labeled_ids(external_path);
  }

  DatasetSplit split;
  {
    StageTimer t(rm.timings_ms, "split");
    split = balance_and_split(patches, external, cfg.split, cfg.split_seed());
  }

  auto report = [](const char* name, const std::vector<SplitEntry>& v) {
    std::size_t n = 0, a = 0;
    for (const SplitEntry& e : v) (e.label == ClassLabel::Abnormal ? a : n)++;
    std::cout << name << ": " << n << " normal, " << a << " abnormal\n";
  };
  auto out = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };
  write_split_manifest(out("split_train.csv"), split.train);
  write_split_manifest(out("split_val.csv"), split.validation);
  write_split_manifest(out("split_test.csv"), split.test);
  report("train", split.train);
  report("validation", split.validation);
  report("test", split.test);
  for (const char* f : {"split_train.csv", "split_val.csv", "split_test.csv"})
    rm.outputs.push_back(digest_file(out(f)));
  finish_manifest(rm, cfg, out_dir);
  return 0;
}

FeatureDataset load_features(const std::vector<SplitEntry>& entries,
                             const std::string& patches_dir, int threads,
                             std::size_t* skipped_external) {
  std::vector<const SplitEntry*> usable;
  for (const SplitEntry& e : entries) {
    if (e.external) {
      if (skipped_external) ++*skipped_external;
      continue;
    }
    usable.push_back(&e);
  }
  FeatureDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(usable.size()), 6);
  ds.labels.resize(usable.size());
  parallel_for(static_cast<std::int64_t>(usable.size()), threads,
               [&](std::int64_t b, std::int64_t e) {
                 for (std::int64_t i = b; i < e; ++i) {
                   RasterImage img = read_png((fs::path(patches_dir) / usable[i]->id).string());
                   ds.features.row(i) = extract_features(img).transpose();
                   ds.labels[i] = usable[i]->label;
                 }
               });
  return ds;
}

int cmd_train(const std::string& train_path, const std::string& val_path,
              const std::string& patches_dir, const std::string& out_dir,
              const PipelineConfig& cfg) {
  fs::create_directories(out_dir);
  RunManifest rm;
  rm.command = "train";
  rm.inputs.push_back(digest_file(train_path));
  if (!val_path.empty()) rm.inputs.push_back(digest_file(val_path));

  std::size_t skipped = 0;
  FeatureDataset train_ds, val_ds;
  {
    StageTimer t(rm.timings_ms, "features");
    train_ds = load_features(read_split_manifest(train_path), patches_dir, cfg.threads, &skipped);
    if (!val_path.empty())
      val_ds = load_features(read_split_manifest(val_path), patches_dir, cfg.threads, &skipped);
  }
  if (skipped > 0)
    std::cerr << "warning: skipped " << skipped << " external records (no pixel data)\n";

  TrainConfig tc = cfg.train;
  tc.seed = cfg.train_seed();
  LogisticModel model;
  {
    StageTimer t(rm.timings_ms, "train");
    model = train_logistic(train_ds, val_ds, tc);
  }
  std::string mpath = (fs::path(out_dir) / "model.txt").string();
  save_model(mpath, model);
  rm.outputs.push_back(digest_file(mpath));
  finish_manifest(rm, cfg, out_dir);
  std::cout << "train: " << train_ds.labels.size() << " samples, model written to " << mpath
            << "\n";
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& manifest_path,
                const std::string& patches_dir, const std::string& out_dir,
                const PipelineConfig& cfg) {
  fs::create_directories(out_dir);
  RunManifest rm;
  rm.command = "predict";
  rm.inputs.push_back(digest_file(model_path));
  rm.inputs.push_back(digest_file(manifest_path));

  LogisticModel model = load_model(model_path);
  std::vector<SplitEntry> entries = read_split_manifest(manifest_path);
  std::vector<ScoreRecord> scores;
  std::size_t skipped = 0;
  {
    StageTimer t(rm.timings_ms, "predict");
    std::vector<const SplitEntry*> usable;
    for (const SplitEntry& e : entries) {
      if (e.external) {
        ++skipped;
        continue;
      }
      usable.push_back(&e);
    }
    scores.resize(usable.size());
    parallel_for(static_cast<std::int64_t>(usable.size()), cfg.threads,
                 [&](std::int64_t b, std::int64_t e) {
                   for (std::int64_t i = b; i < e; ++i) {
                     RasterImage img =
                         read_png((fs::path(patches_dir) / usable[i]->id).string());
                     scores[i] = {usable[i]->id, usable[i]->label,
                                  predict(model, extract_features(img))};
                   }
                 });
  }
  if (skipped > 0)
    std::cerr << "warning: skipped " << skipped << " external records (no pixel data)\n";

  std::string spath = (fs::path(out_dir) / "scores.csv").string();
  write_scores_file(spath, scores);
  rm.outputs.push_back(digest_file(spath));
  finish_manifest(rm, cfg, out_dir);
  std::cout << "predict: " << scores.size() << " scores written to " << spath << "\n";
  return 0;
}

int cmd_eval(const std::string& scores_path, const std::string& out_dir,
             const PipelineConfig& cfg) {
  fs::create_directories(out_dir);
  RunManifest rm;
  rm.command = "eval";
  rm.inputs.push_back(digest_file(scores_path));

  std::vector<ScoreRecord> records = ingest_scores_file(scores_path);
  if (records.empty()) {
    std::cerr << "warning: empty scores file, nothing to evaluate\n";
    finish_manifest(rm, cfg, out_dir);
    return 0;
  }
  ConfusionMatrix cm = confusion(records, cfg.eval_threshold);
  MetricsReport m = metrics(cm);
  RocCurve curve = roc(records);
  RocPoint q = q_point(curve);

  auto out = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };
  write_text(out("report.txt"), format_metrics_report(cm, m, curve, q));
  write_text(out("roc.csv"), format_roc_table(curve));
  rm.outputs.push_back(digest_file(out("report.txt")));
  rm.outputs.push_back(digest_file(out("roc.csv")));
  finish_manifest(rm, cfg, out_dir);

  char line[256];
  std::snprintf(line, sizeof(line),
                "eval: acc %.4f prec %.4f rec %.4f f1 %.4f mcc %.4f auc %.6f\n", m.acc, m.prec,
                m.rec, m.f1, m.mcc, curve.auc);
  std::cout << line;
  return 0;
}

int cmd_report(const std::string& manifest_path) {
  RunManifest m = read_run_manifest(manifest_path);
  std::cout << "command: " << m.command << "\n";
  std::cout << "inputs: " << m.inputs.size() << ", outputs: " << m.outputs.size() << "\n";
  for (const auto& [stage, ms] : m.timings_ms)
    std::cout << "  " << stage << ": " << ms << " ms\n";
  std::vector<std::string> problems = verify_run_manifest(m);
  if (problems.empty()) {
    std::cout << "digests: all " << (m.inputs.size() + m.outputs.size()) << " files validate\n";
    return 0;
  }
  for (const std::string& p : problems) std::cerr << "error: " << p << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cervical cytology slide pipeline"};
  app.require_subcommand(1);

  // import
  auto* imp = app.add_subcommand("import", "build a pyramid directory from a lossless raster");
  std::string imp_in, imp_out;
  int imp_levels = 4, imp_factor = 2;
  double imp_um = 0.0;
  CommonOpts imp_c;
  imp->add_option("input", imp_in, "input PNG")->required();
  imp->add_option("out_dir", imp_out, "output pyramid directory")->required();
  imp->add_option("--levels", imp_levels, "pyramid levels including level 0")->required();
  imp->add_option("--factor", imp_factor, "downsample factor per level");
  imp->add_option("--pixel-um", imp_um, "physical pixel size at level 0");
  add_common(imp, imp_c);

  // register
  auto* reg = app.add_subcommand("register", "align the inked slide to the clean reference");
  std::string reg_clean, reg_inked, reg_out, reg_dump;
  int reg_level = 7;
  CommonOpts reg_c;
  reg->add_option("clean_pyramid", reg_clean)->required();
  reg->add_option("inked_pyramid", reg_inked)->required();
  reg->add_option("--level", reg_level, "pyramid level used for alignment");
  reg->add_option("--out-dir", reg_out)->required();
  reg->add_option("--dump-matches", reg_dump, "write the match/inlier table");
  add_common(reg, reg_c);

  // roi
  auto* roi = app.add_subcommand("roi", "detect ink-marked ROIs and crop the clean slide");
  std::string roi_clean, roi_inked, roi_h, roi_out, roi_dump;
  int roi_detect = 7, roi_crop = 1;
  CommonOpts roi_c;
  roi->add_option("clean_pyramid", roi_clean)->required();
  roi->add_option("inked_pyramid", roi_inked)->required();
  roi->add_option("--homography", roi_h)->required();
  roi->add_option("--detect-level", roi_detect);
  roi->add_option("--crop-level", roi_crop);
  roi->add_option("--out-dir", roi_out)->required();
  roi->add_option("--dump-mask", roi_dump, "write the detected ink mask");
  add_common(roi, roi_c);

  // cellgraph
  auto* cg = app.add_subcommand("cellgraph", "superpixel graph, nuclei mask and cell subgraphs");
  std::string cg_in, cg_out;
  CommonOpts cg_c;
  cg->add_option("input", cg_in, "ROI crop PNG")->required();
  cg->add_option("--out-dir", cg_out)->required();
  add_common(cg, cg_c);

  // patchify
  auto* pf = app.add_subcommand("patchify", "sliding-window patches from ROI crops");
  std::string pf_crops, pf_out;
  CommonOpts pf_c;
  pf->add_option("--crops-dir", pf_crops, "directory with roi<k>.png (+ roi<k>_mask.png)")
      ->required();
  pf->add_option("--out-dir", pf_out)->required();
  add_common(pf, pf_c);

  // split
  auto* sp = app.add_subcommand("split", "balanced train/validation/test split");
  std::string sp_manifest, sp_external, sp_out;
  CommonOpts sp_c;
  sp->add_option("--manifest", sp_manifest, "patch manifest")->required();
  sp->add_option("--external", sp_external, "external records (id,label)");
  sp->add_option("--out-dir", sp_out)->required();
  add_common(sp, sp_c);

  // train
  auto* tr = app.add_subcommand("train", "train the logistic baseline");
  std::string tr_train, tr_val, tr_patches, tr_out;
  CommonOpts tr_c;
  tr->add_option("--train", tr_train, "training split manifest")->required();
  tr->add_option("--val", tr_val, "validation split manifest");
  tr->add_option("--patches-dir", tr_patches)->required();
  tr->add_option("--out-dir", tr_out)->required();
  add_common(tr, tr_c);

  // predict
  auto* pr = app.add_subcommand("predict", "score a split manifest with a trained model");
  std::string pr_model, pr_manifest, pr_patches, pr_out;
  CommonOpts pr_c;
  pr->add_option("--model", pr_model)->required();
  pr->add_option("--manifest", pr_manifest)->required();
  pr->add_option("--patches-dir", pr_patches)->required();
  pr->add_option("--out-dir", pr_out)->required();
  add_common(pr, pr_c);

  // eval
  auto* ev = app.add_subcommand("eval", "metrics report and ROC table from a scores file");
  std::string ev_scores, ev_out;
  CommonOpts ev_c;
  ev->add_option("--scores", ev_scores)->required();
  ev->add_option("--out-dir", ev_out)->required();
  add_common(ev, ev_c);

  // report
  auto* rp = app.add_subcommand("report", "summarize and verify a run manifest");
  std::string rp_manifest;
  rp->add_option("--manifest", rp_manifest, "run_manifest.json")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*imp)
      return cmd_import(imp_in, imp_out, imp_levels, imp_factor, imp_um, resolve_config(imp_c));
    if (*reg)
      return cmd_register(reg_clean, reg_inked, reg_level, reg_out, reg_dump,
                          resolve_config(reg_c));
    if (*roi)
      return cmd_roi(roi_clean, roi_inked, roi_h, roi_detect, roi_crop, roi_out, roi_dump,
                     resolve_config(roi_c));
    if (*cg) return cmd_cellgraph(cg_in, cg_out, resolve_config(cg_c));
    if (*pf) return cmd_patchify(pf_crops, pf_out, resolve_config(pf_c));
    if (*sp) return cmd_split(sp_manifest, sp_external, sp_out, resolve_config(sp_c));
    if (*tr) return cmd_train(tr_train, tr_val, tr_patches, tr_out, resolve_config(tr_c));
    if (*pr)
      return cmd_predict(pr_model, pr_manifest, pr_patches, pr_out, resolve_config(pr_c));
    if (*ev) return cmd_eval(ev_scores, ev_out, resolve_config(ev_c));
    if (*rp) return cmd_report(rp_manifest);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
