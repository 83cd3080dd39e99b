#include "otblab/harness/csv.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "otblab/common.hpp"

namespace otblab::harness {

std::string format_double(double value) {
  if (std::isnan(value)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

namespace {

std::string quote(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable::Row& CsvTable::Row::add(const std::string& text) {
  cells_.push_back(text);
  return *this;
}

CsvTable::Row& CsvTable::Row::add(double value) { return add(format_double(value)); }

CsvTable::Row& CsvTable::Row::add(long long value) { return add(std::to_string(value)); }

CsvTable::Row& CsvTable::Row::add(unsigned long long value) { return add(std::to_string(value)); }

void CsvTable::append(const Row& row) {
  if (row.cells_.size() != header_.size()) throw Error("CSV row width does not match the header");
  rows_.push_back(row.cells_);
}

std::string CsvTable::to_string() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += quote(cells[i]);
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void CsvTable::write(const std::string& path) const { write_file(path, to_string()); }

void write_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

}  // namespace otblab::harness
