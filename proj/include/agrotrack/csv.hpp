#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace agrotrack::io {

/// Locale-independent number formatting: "." decimal separator, enough
/// digits to round-trip doubles used here.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

/// Atomic file write: temp file in the same directory, then rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
  }
  fs::rename(tmp, path);
}

/// Minimal CSV emitter: fixed column order, UTF-8, LF line endings.
class CsvBuilder {
 public:
  explicit CsvBuilder(std::vector<std::string> columns) : columns_(std::move(columns)) {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (i) body_ << ',';
      body_ << columns_[i];
    }
    body_ << '\n';
  }

  CsvBuilder& cell(double v) {
    sep();
    body_ << format_number(v);
    return *this;
  }
  CsvBuilder& cell(const std::string& v) {
    sep();
    body_ << v;
    return *this;
  }
  CsvBuilder& cell(std::uint64_t v) {
    sep();
    body_ << v;
    return *this;
  }
  void end_row() {
    body_ << '\n';
    col_ = 0;
  }

  std::size_t column_count() const { return columns_.size(); }
  std::string str() const { return body_.str(); }
  void save(const std::filesystem::path& path) const { write_file_atomic(path, body_.str()); }

 private:
  void sep() {
    if (col_) body_ << ',';
    ++col_;
  }
  std::vector<std::string> columns_;
  std::ostringstream body_;
  std::size_t col_ = 0;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

/// Parse-back used by the selfcheck path. No quoting: emitted files never
/// contain commas inside fields.
inline CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      throw std::runtime_error("CSV contains CR characters; expected LF endings");
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    if (header) {
      table.columns = fields;
      header = false;
    } else {
      if (fields.size() != table.columns.size())
        throw std::runtime_error("CSV row width mismatch");
      table.rows.push_back(fields);
    }
  }
  return table;
}

inline CsvTable parse_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

}  // namespace agrotrack::io
