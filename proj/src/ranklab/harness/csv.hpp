#pragma once

// Deterministic CSV artifacts: fixed headers, no quoting (fields are rejected
// if they would need it), numbers formatted with a stable printf conversion so
// identical runs produce byte-identical files.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace ranklab {

// "%.10g" rendering with "-0" normalized to "0"; non-finite values are
// written as nan/inf/-inf.
std::string csv_num(double v);
std::string csv_num(int v);
std::string csv_num(std::int64_t v);
std::string csv_num(std::uint64_t v);

class CsvFile {
 public:
  CsvFile(const std::string& path, const std::vector<std::string>& header);
  ~CsvFile();
  CsvFile(const CsvFile&) = delete;
  CsvFile& operator=(const CsvFile&) = delete;

  // Field count must match the header; fields must not contain ',', '"',
  // '\n', or '\r'.
  void row(const std::vector<std::string>& fields);
  // Flushes and closes; throws IoError if the stream failed. The destructor
  // closes silently, so call close() on the success path.
  void close();

 private:
  std::ofstream out_;
  std::string path_;
  std::size_t width_ = 0;
  bool closed_ = false;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Strict reader for files written by CsvFile (no quoting, fixed width).
CsvTable read_csv(const std::string& path);

}  // namespace ranklab
