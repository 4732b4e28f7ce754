#include "cyto/runmeta.hpp"

#include <zlib.h>

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace cyto {

FileDigest digest_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("digest: cannot open " + path);
  FileDigest d;
  d.path = path;
  uLong crc = crc32(0L, Z_NULL, 0);
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof(buf));
    std::streamsize got = f.gcount();
    if (got > 0) {
      crc = crc32(crc, reinterpret_cast<const Bytef*>(buf), static_cast<uInt>(got));
      d.bytes += static_cast<std::uint64_t>(got);
    }
  }
  d.crc32 = static_cast<std::uint32_t>(crc);
  return d;
}

namespace {

nlohmann::json digests_to_json(const std::vector<FileDigest>& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (const FileDigest& d : v)
    arr.push_back({{"path", d.path}, {"crc32", d.crc32}, {"bytes", d.bytes}});
  return arr;
}

std::vector<FileDigest> digests_from_json(const nlohmann::json& arr) {
  std::vector<FileDigest> v;
  for (const auto& e : arr) {
    FileDigest d;
    d.path = e.at("path").get<std::string>();
    d.crc32 = e.at("crc32").get<std::uint32_t>();
    d.bytes = e.at("bytes").get<std::uint64_t>();
    v.push_back(std::move(d));
  }
  return v;
}

}  // namespace

void write_run_manifest(const std::string& path, const RunManifest& m) {
  nlohmann::json j;
  j["command"] = m.command;
  j["config"] = m.config;
  j["inputs"] = digests_to_json(m.inputs);
  j["outputs"] = digests_to_json(m.outputs);
  j["timings_ms"] = m.timings_ms;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("run manifest: cannot open " + path);
  f << j.dump(2) << "\n";
}

RunManifest read_run_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("run manifest: cannot open " + path);
  nlohmann::json j;
  f >> j;
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.config = j.at("config").get<std::map<std::string, std::string>>();
  m.inputs = digests_from_json(j.at("inputs"));
  m.outputs = digests_from_json(j.at("outputs"));
  if (j.contains("timings_ms"))
    m.timings_ms = j.at("timings_ms").get<std::map<std::string, std::int64_t>>();
  return m;
}

std::vector<std::string> verify_run_manifest(const RunManifest& m) {
  std::vector<std::string> problems;
  auto check = [&](const FileDigest& want, const char* kind) {
    try {
      FileDigest got = digest_file(want.path);
      if (got.crc32 != want.crc32 || got.bytes != want.bytes)
        problems.push_back(std::string(kind) + " " + want.path + ": digest mismatch");
    } catch (const std::exception&) {
      problems.push_back(std::string(kind) + " " + want.path + ": missing");
    }
  };
  for (const FileDigest& d : m.inputs) check(d, "input");
  for (const FileDigest& d : m.outputs) check(d, "output");
  return problems;
}

}  // namespace cyto
