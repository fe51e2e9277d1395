#include "ranklab/harness/csv.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "ranklab/core/error.hpp"

namespace ranklab {

std::string csv_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  std::string s(buf);
  if (s == "-0") s = "0";
  return s;
}

std::string csv_num(int v) { return std::to_string(v); }
std::string csv_num(std::int64_t v) { return std::to_string(v); }
std::string csv_num(std::uint64_t v) { return std::to_string(v); }

namespace {

void check_field(const std::string& field, const std::string& path) {
  for (char c : field)
    if (c == ',' || c == '"' || c == '\n' || c == '\r')
      throw IoError("csv field containing separator or quote in '" + path +
                    "': " + field);
}

}  // namespace

CsvFile::CsvFile(const std::string& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary), path_(path), width_(header.size()) {
  if (!out_) throw IoError("cannot open '" + path + "' for writing");
  if (header.empty()) throw IoError("csv header must not be empty");
  for (std::size_t i = 0; i < header.size(); ++i) {
    check_field(header[i], path_);
    if (i) out_ << ',';
    out_ << header[i];
  }
  out_ << '\n';
}

CsvFile::~CsvFile() {
  if (!closed_) out_.close();
}

void CsvFile::row(const std::vector<std::string>& fields) {
  if (closed_) throw IoError("csv file '" + path_ + "' already closed");
  if (fields.size() != width_)
    throw IoError("csv row width " + std::to_string(fields.size()) +
                  " does not match header width " + std::to_string(width_) +
                  " in '" + path_ + "'");
  for (std::size_t i = 0; i < fields.size(); ++i) {
    check_field(fields[i], path_);
    if (i) out_ << ',';
    out_ << fields[i];
  }
  out_ << '\n';
}

void CsvFile::close() {
  if (closed_) return;
  out_.flush();
  if (!out_) throw IoError("write error on '" + path_ + "'");
  out_.close();
  closed_ = true;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    if (first) {
      table.header = fields;
      first = false;
    } else {
      if (fields.size() != table.header.size())
        throw IoError("csv row width mismatch in '" + path + "'");
      table.rows.push_back(std::move(fields));
    }
  }
  if (first) throw IoError("csv file '" + path + "' is empty");
  return table;
}

}  // namespace ranklab
