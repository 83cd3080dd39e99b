#pragma once

#include <initializer_list>
#include <string>
#include <vector>

namespace otblab::harness {

/// Full-precision decimal ("%.17g"); NaN is written as an empty field.
std::string format_double(double value);

/// In-memory CSV with a fixed header. Rows are written with LF endings.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  class Row {
   public:
    Row& add(const std::string& text);
    Row& add(double value);
    Row& add(long long value);
    Row& add(unsigned long long value);
    Row& add(int value) { return add(static_cast<long long>(value)); }
    Row& add(std::size_t value) { return add(static_cast<unsigned long long>(value)); }
    Row& add(bool value) { return add(std::string(value ? "true" : "false")); }

   private:
    friend class CsvTable;
    std::vector<std::string> cells_;
  };

  /// Appends a row; throws if its width differs from the header.
  void append(const Row& row);

  std::size_t rows() const { return rows_.size(); }
  const std::vector<std::string>& header() const { return header_; }
  std::string to_string() const;
  void write(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Writes `text` to `path` in binary mode, creating parent directories.
void write_file(const std::string& path, const std::string& text);

}  // namespace otblab::harness
