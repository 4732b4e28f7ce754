#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

// Run manifest: config snapshot, input/output digests and per-stage timings.
// Timings vary run to run, so this file sits outside the byte-identical
// determinism contract; the digests tie it to the data artifacts.

namespace cyto {

struct FileDigest {
  std::string path;
  std::uint32_t crc32 = 0;
  std::uint64_t bytes = 0;
};

FileDigest digest_file(const std::string& path);

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  std::map<std::string, std::int64_t> timings_ms;
};

void write_run_manifest(const std::string& path, const RunManifest& m);
RunManifest read_run_manifest(const std::string& path);

// Re-digests every recorded file; returns human-readable mismatch lines
// (empty = everything validates).
std::vector<std::string> verify_run_manifest(const RunManifest& m);

}  // namespace cyto
