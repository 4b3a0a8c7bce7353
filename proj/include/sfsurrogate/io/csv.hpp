#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "sfsurrogate/error.hpp"

namespace sfs::io {

/// Shortest decimal string that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("not a number: \"" + std::string(s) + "\"");
  }
  return v;
}

/// RFC 4180 field quoting: fields holding a comma, quote or line break are
/// wrapped in quotes with embedded quotes doubled.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

/// Rows end in CRLF, as the RFC specifies.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : path_(path), os_(path, std::ios::binary | std::ios::trunc), width_(header.size()) {
    if (!os_) throw IoError("cannot open " + path.string() + " for writing");
    row(header);
  }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != width_) {
      throw FormatError(path_.string() + ": row has " + std::to_string(fields.size()) +
                        " fields, header has " + std::to_string(width_));
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) os_ << ',';
      os_ << csv_field(fields[i]);
    }
    os_ << "\r\n";
    if (!os_) throw IoError("failed writing " + path_.string());
  }

  void close() {
    os_.close();
    if (!os_) throw IoError("failed closing " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream os_;
  std::size_t width_;
};

/// Parses RFC 4180 text into rows of fields.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    any = true;
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (ch == '\r' || ch == '\n') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += ch;
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV field");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(is), {});
}

}  // namespace sfs::io
