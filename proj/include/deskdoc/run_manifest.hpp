#pragma once

#include <map>
#include <string>

#include "deskdoc/common.hpp"

namespace deskdoc {

// Reproducibility record written before a command starts working: rerunning
// with the recorded flags and seed reproduces every output byte for byte
// (the manifest itself carries the only timestamp).
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> flags;
  std::uint64_t seed = 0;
  std::string build_id;
  std::string corpus_digest;  // fnv1a-64 of the input corpus, empty when none
  std::string started_utc;
};

void write_run_manifest(const RunManifest& manifest, const std::string& path);

std::string file_digest_hex(const std::string& path);
std::string utc_timestamp();
std::string build_id_string();

}  // namespace deskdoc
