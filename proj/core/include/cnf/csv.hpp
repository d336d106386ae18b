#pragma once

#include <string>
#include <vector>

namespace cnf {

/// Shortest text that round-trips the double; "inf", "-inf", "nan" otherwise.
std::string format_real(double v);

/// Comma-separated table with a header row. Output is byte-deterministic.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(const std::vector<double>& values);
  void add_row(const std::vector<std::string>& cells);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;
  /// Throws IoError.
  void write(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Writes text to a file, creating parent directories. Throws IoError.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace cnf
