#pragma once

// Run manifest: records the effective config, tool version, per-stage seeds
// and wall-clock, and a checksum inventory of every artifact a stage wrote.
// `verify` recomputes the checksums so a finished output directory can be
// audited; together with single-threaded determinism the manifest is enough
// to reproduce a run bit-for-bit.

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace ranklab {

inline constexpr const char* kToolVersion = "ranklab 1.0.0";
inline constexpr const char* kManifestFileName = "manifest.json";

std::uint64_t fnv1a64_file(const std::string& path);
std::string hex_u64(std::uint64_t v);

struct StageRecord {
  std::string name;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::vector<std::string> files;  // paths relative to the output directory
};

struct FileRecord {
  std::uint64_t checksum = 0;
  std::uint64_t bytes = 0;
};

class RunManifest {
 public:
  // Reads dir/manifest.json when present, otherwise starts empty.
  static RunManifest load_or_create(const std::string& dir);
  // Throws IoError when the manifest is missing.
  static RunManifest load(const std::string& dir);

  void set_config(const std::string& effective_json);

  // Checksums `files` (relative to dir) and replaces any previous record of
  // this stage, dropping inventory entries the stage no longer produces.
  void record_stage(const std::string& dir, const std::string& name,
                    std::uint64_t seed, double wall_seconds,
                    const std::vector<std::string>& files);

  bool has_stage(const std::string& name) const;
  const std::vector<StageRecord>& stages() const { return stages_; }
  const std::map<std::string, FileRecord>& files() const { return files_; }

  void save(const std::string& dir) const;

  // Recomputes every checksum; logs one line per problem. True when clean.
  bool verify(const std::string& dir, std::ostream& log) const;

 private:
  std::string config_json_;  // pretty-printed effective config, may be empty
  std::vector<StageRecord> stages_;
  std::map<std::string, FileRecord> files_;
};

}  // namespace ranklab
