#include "ranklab/harness/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "ranklab/core/error.hpp"

namespace ranklab {

namespace {

using nlohmann::json;

std::string join_path(const std::string& dir, const std::string& rel) {
  if (dir.empty()) return rel;
  if (dir.back() == '/') return dir + rel;
  return dir + "/" + rel;
}

std::uint64_t parse_hex_u64(const std::string& s) {
  if (s.rfind("0x", 0) != 0) throw IoError("manifest checksum not hex: " + s);
  std::uint64_t v = 0;
  for (std::size_t i = 2; i < s.size(); ++i) {
    const char c = s[i];
    v <<= 4;
    if (c >= '0' && c <= '9')
      v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f')
      v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else
      throw IoError("manifest checksum not hex: " + s);
  }
  return v;
}

}  // namespace

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for checksumming");
  std::uint64_t h = 14695981039346656037ULL;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::string hex_u64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "0x%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

RunManifest RunManifest::load_or_create(const std::string& dir) {
  std::ifstream probe(join_path(dir, kManifestFileName));
  if (!probe) return RunManifest{};
  probe.close();
  return load(dir);
}

RunManifest RunManifest::load(const std::string& dir) {
  const std::string path = join_path(dir, kManifestFileName);
  std::ifstream in(path);
  if (!in) throw IoError("no manifest at '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError("manifest '" + path + "' is not valid JSON: " + e.what());
  }
  RunManifest m;
  if (doc.contains("config")) m.config_json_ = doc.at("config").dump(2) + "\n";
  if (doc.contains("stages")) {
    for (const json& s : doc.at("stages")) {
      StageRecord rec;
      rec.name = s.at("name").get<std::string>();
      rec.seed = parse_hex_u64(s.at("seed").get<std::string>());
      rec.wall_seconds = s.at("wall_seconds").get<double>();
      rec.files = s.at("files").get<std::vector<std::string>>();
      m.stages_.push_back(std::move(rec));
    }
  }
  if (doc.contains("files")) {
    for (const auto& [rel, entry] : doc.at("files").items()) {
      FileRecord fr;
      fr.checksum = parse_hex_u64(entry.at("fnv1a64").get<std::string>());
      fr.bytes = entry.at("bytes").get<std::uint64_t>();
      m.files_[rel] = fr;
    }
  }
  return m;
}

void RunManifest::set_config(const std::string& effective_json) {
  config_json_ = effective_json;
}

void RunManifest::record_stage(const std::string& dir, const std::string& name,
                               std::uint64_t seed, double wall_seconds,
                               const std::vector<std::string>& files) {
  auto it = std::find_if(stages_.begin(), stages_.end(),
                         [&](const StageRecord& s) { return s.name == name; });
  if (it != stages_.end()) {
    for (const std::string& old : it->files) {
      if (std::find(files.begin(), files.end(), old) != files.end()) continue;
      const bool shared = std::any_of(
          stages_.begin(), stages_.end(), [&](const StageRecord& s) {
            return s.name != name &&
                   std::find(s.files.begin(), s.files.end(), old) !=
                       s.files.end();
          });
      if (!shared) files_.erase(old);
    }
    stages_.erase(it);
  }
  StageRecord rec;
  rec.name = name;
  rec.seed = seed;
  rec.wall_seconds = wall_seconds;
  rec.files = files;
  for (const std::string& rel : files) {
    const std::string path = join_path(dir, rel);
    FileRecord fr;
    fr.checksum = fnv1a64_file(path);
    std::ifstream probe(path, std::ios::binary | std::ios::ate);
    fr.bytes = static_cast<std::uint64_t>(probe.tellg());
    files_[rel] = fr;
  }
  stages_.push_back(std::move(rec));
}

bool RunManifest::has_stage(const std::string& name) const {
  return std::any_of(stages_.begin(), stages_.end(),
                     [&](const StageRecord& s) { return s.name == name; });
}

void RunManifest::save(const std::string& dir) const {
  json doc;
  doc["tool"] = kToolVersion;
  if (!config_json_.empty()) {
    try {
      doc["config"] = json::parse(config_json_);
    } catch (const json::exception& e) {
      throw IoError(std::string("manifest config snapshot is not JSON: ") +
                    e.what());
    }
  }
  doc["stages"] = json::array();
  for (const StageRecord& s : stages_) {
    json rec;
    rec["name"] = s.name;
    rec["seed"] = hex_u64(s.seed);
    rec["wall_seconds"] = s.wall_seconds;
    rec["files"] = s.files;
    doc["stages"].push_back(std::move(rec));
  }
  doc["files"] = json::object();
  for (const auto& [rel, fr] : files_) {
    doc["files"][rel] = {{"fnv1a64", hex_u64(fr.checksum)},
                         {"bytes", fr.bytes}};
  }
  const std::string path = join_path(dir, kManifestFileName);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << doc.dump(2) << "\n";
  out.flush();
  if (!out) throw IoError("write error on '" + path + "'");
}

bool RunManifest::verify(const std::string& dir, std::ostream& log) const {
  int problems = 0;
  for (const auto& [rel, fr] : files_) {
    const std::string path = join_path(dir, rel);
    std::ifstream probe(path, std::ios::binary);
    if (!probe) {
      log << "missing: " << rel << "\n";
      ++problems;
      continue;
    }
    probe.close();
    const std::uint64_t sum = fnv1a64_file(path);
    if (sum != fr.checksum) {
      log << "mismatch: " << rel << " expected " << hex_u64(fr.checksum)
          << " got " << hex_u64(sum) << "\n";
      ++problems;
    } else {
      log << "ok: " << rel << "\n";
    }
  }
  if (files_.empty()) log << "manifest lists no files\n";
  return problems == 0;
}

}  // namespace ranklab
