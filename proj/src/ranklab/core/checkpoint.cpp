#include "ranklab/core/checkpoint.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ranklab/core/error.hpp"

namespace ranklab {

namespace {
constexpr const char* kMagic = "ranklab-checkpoint";
constexpr int kFormatVersion = 1;
}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const Tensor& CheckpointDoc::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw IoError("checkpoint has no tensor named '" + name + "'");
}

bool CheckpointDoc::has_tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return true;
  return false;
}

void write_checkpoint(const std::string& path, const CheckpointDoc& doc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "arch " << doc.arch << '\n';
  out << "seed " << doc.seed << '\n';
  out << "tensors " << doc.tensors.size() << '\n';
  for (const auto& [name, t] : doc.tensors) {
    out << "tensor " << name << ' ' << t.rank();
    for (int d : t.shape) out << ' ' << d;
    out << '\n';
    for (size_t i = 0; i < t.data.size(); ++i) {
      out << format_double(t.data[i]);
      out << (((i + 1) % 8 == 0 || i + 1 == t.data.size()) ? '\n' : ' ');
    }
  }
  out.flush();
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

CheckpointDoc read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");

  auto fail = [&](const std::string& what) -> IoError {
    return IoError("malformed checkpoint '" + path + "': " + what);
  };

  std::string magic;
  int version = 0;
  if (!(in >> magic >> version)) throw fail("missing header");
  if (magic != kMagic) throw fail("bad magic '" + magic + "'");
  if (version != kFormatVersion)
    throw fail("unsupported format version " + std::to_string(version));

  std::string key;
  CheckpointDoc doc;
  if (!(in >> key) || key != "arch") throw fail("expected 'arch'");
  std::getline(in, doc.arch);
  if (!doc.arch.empty() && doc.arch.front() == ' ') doc.arch.erase(0, 1);

  if (!(in >> key >> doc.seed) || key != "seed") throw fail("expected 'seed'");

  size_t count = 0;
  if (!(in >> key >> count) || key != "tensors") throw fail("expected 'tensors'");

  doc.tensors.reserve(count);
  for (size_t k = 0; k < count; ++k) {
    std::string name;
    int rank = 0;
    if (!(in >> key >> name >> rank) || key != "tensor")
      throw fail("expected tensor header " + std::to_string(k));
    if (rank < 0 || rank > 8) throw fail("implausible rank for '" + name + "'");
    std::vector<int> shape(static_cast<size_t>(rank));
    for (int& d : shape) {
      if (!(in >> d) || d < 0) throw fail("bad shape for '" + name + "'");
    }
    int64_t n = shape_numel(shape);
    Tensor t;
    t.shape = std::move(shape);
    t.data.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      std::string tok;
      if (!(in >> tok)) throw fail("truncated values for '" + name + "'");
      char* end = nullptr;
      t.data[static_cast<size_t>(i)] = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0')
        throw fail("unparseable value '" + tok + "' in '" + name + "'");
    }
    doc.tensors.emplace_back(std::move(name), std::move(t));
  }
  return doc;
}

CheckpointDoc checkpoint_of(const ParameterSet& ps, const std::string& arch) {
  CheckpointDoc doc;
  doc.arch = arch;
  doc.seed = ps.rng_seed();
  doc.tensors.reserve(static_cast<size_t>(ps.count()));
  for (int i = 0; i < ps.count(); ++i)
    doc.tensors.emplace_back(ps.info(i).name, ps.value_tensor(i));
  return doc;
}

std::string join_widths(const std::vector<int>& widths) {
  std::string s;
  for (size_t i = 0; i < widths.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(widths[i]);
  }
  return s;
}

std::vector<int> parse_widths(const std::string& s) {
  std::vector<int> out;
  std::stringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw IoError("bad width list '" + s + "'");
    }
  }
  return out;
}

void load_into(ParameterSet& ps, const CheckpointDoc& doc) {
  if (static_cast<int>(doc.tensors.size()) != ps.count())
    throw IoError("checkpoint holds " + std::to_string(doc.tensors.size()) +
                  " tensors, parameter set expects " + std::to_string(ps.count()));
  for (const auto& [name, t] : doc.tensors) ps.set_value(name, t);
  ps.set_rng_seed(doc.seed);
  ps.zero_grads();
}

}  // namespace ranklab
