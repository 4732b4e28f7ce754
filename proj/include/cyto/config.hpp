#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cyto/cellgraph.hpp"
#include "cyto/eval.hpp"
#include "cyto/inkroi.hpp"
#include "cyto/patchgen.hpp"
#include "cyto/registration.hpp"

// One flat key=value configuration covering every pipeline stage. A single
// global seed is expanded into per-stage seeds by fixed offsets so one knob
// reproduces a whole run.

namespace cyto {

struct PipelineConfig {
  std::uint64_t seed = 42;
  int threads = 0;  // 0 = hardware concurrency

  RegisterConfig reg;
  InkConfig ink;
  QuickshiftConfig qs;
  double cut_threshold = 59.0;
  double grow_threshold = 59.0;
  double dark_cutoff = -1.0;      // < 0: Otsu over component norms
  double background_norm = -1.0;  // < 0: Otsu over node norms
  PatchConfig patch;
  SplitConfig split;
  TrainConfig train;
  double eval_threshold = 0.5;

  // per-stage seed streams derived from the global seed
  std::uint64_t ransac_seed() const { return seed + 101; }
  std::uint64_t split_seed() const { return seed + 202; }
  std::uint64_t train_seed() const { return seed + 303; }
};

// key=value lines, '#' comments; unknown keys and malformed values raise.
PipelineConfig load_config_text(const std::string& text, PipelineConfig base = {});
PipelineConfig load_config_file(const std::string& path, PipelineConfig base = {});
void apply_override(PipelineConfig& cfg, const std::string& key, const std::string& value);

// every module precondition checked up front
void validate(const PipelineConfig& cfg);

// sorted key=value snapshot (the run manifest embeds this)
std::map<std::string, std::string> config_snapshot(const PipelineConfig& cfg);

}  // namespace cyto
