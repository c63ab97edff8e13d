#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace anthracnose {

/// Shortest round-trip-stable text used for every number in outputs (%.12g).
std::string format_number(double value);

/// Line-oriented CSV writer. Throws IoError when the file cannot be written.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<double>& values);
  void row(const std::vector<std::string>& cells);
  /// Flushes and checks the stream.
  void close();

 private:
  std::string path_;
  std::ofstream out_;
  std::size_t columns_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a header column, or -1.
  int column(const std::string& name) const;
};

/// Reads a numeric CSV with a header line. Blank lines and lines starting with
/// '#' are skipped. IoError when unreadable, ConfigError when malformed.
CsvTable read_csv(const std::string& path);

}  // namespace anthracnose
