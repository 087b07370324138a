#include "deskdoc/run_manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <vector>

#include "json.hpp"

#ifndef DESKDOC_BUILD_ID
#define DESKDOC_BUILD_ID "unknown"
#endif

namespace deskdoc {

void write_run_manifest(const RunManifest& manifest, const std::string& path) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["flags"] = manifest.flags;
  j["seed"] = manifest.seed;
  j["build"] = manifest.build_id.empty() ? build_id_string() : manifest.build_id;
  if (!manifest.corpus_digest.empty()) j["corpus_digest"] = manifest.corpus_digest;
  j["started_utc"] = manifest.started_utc.empty() ? utc_timestamp() : manifest.started_utc;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_run_manifest: cannot open " + path);
  out << j.dump(2) << "\n";
}

std::string file_digest_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("file_digest_hex: cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
  return buf;
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string build_id_string() { return DESKDOC_BUILD_ID; }

}  // namespace deskdoc
