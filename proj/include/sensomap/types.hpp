#pragma once

#include <Eigen/Dense>

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sensomap {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point& a, const Point& b) { return a.x == b.x && a.y == b.y; }
};

// Physical tablecloth dimensions in centimetres. Origin bottom-left, y up.
struct Sheet {
  double width = 60.0;
  double height = 40.0;
};

// One row of coordinates per sample, rows aligned with `codes`.
struct Configuration {
  std::vector<std::string> codes;
  Eigen::MatrixXd coords;

  int sample_count() const { return static_cast<int>(coords.rows()); }
  int dims() const { return static_cast<int>(coords.cols()); }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line)
      : std::runtime_error(message + " (line " + std::to_string(line) + ")"), line_(line) {}

  int line() const { return line_; }

 private:
  int line_;
};

// All on-disk numeric formats carry 6 significant digits.
inline std::string format_number(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split_fields(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline double parse_number(const std::string& field, int line_no) {
  const std::string t = trim(field);
  if (t.empty()) throw ParseError("empty numeric field", line_no);
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) throw ParseError("malformed number '" + t + "'", line_no);
  return v;
}

// Strips one line, tolerating CRLF input.
inline bool get_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

inline void write_configuration(std::ostream& os, const Configuration& config,
                                const std::vector<std::string>& column_names = {},
                                const std::vector<std::string>& comments = {}) {
  std::vector<std::string> cols = column_names;
  if (cols.empty()) {
    if (config.dims() == 2) {
      cols = {"x", "y"};
    } else {
      for (int d = 0; d < config.dims(); ++d) cols.push_back("Dim" + std::to_string(d + 1));
    }
  }
  if (static_cast<int>(cols.size()) != config.dims())
    throw std::invalid_argument("column name count does not match dimension count");
  for (const auto& c : comments) os << "# " << c << "\n";
  os << "code";
  for (const auto& c : cols) os << "," << c;
  os << "\n";
  for (int i = 0; i < config.sample_count(); ++i) {
    os << config.codes[i];
    for (int d = 0; d < config.dims(); ++d) os << "," << format_number(config.coords(i, d));
    os << "\n";
  }
}

inline Configuration read_configuration(std::istream& is) {
  Configuration config;
  std::string line;
  int line_no = 0;
  int dims = -1;
  std::vector<std::vector<double>> rows;
  while (get_line(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto fields = split_fields(t);
    if (dims < 0) {
      if (fields.size() < 3 || fields[0] != "code")
        throw ParseError("expected header 'code,<axis>,...'", line_no);
      dims = static_cast<int>(fields.size()) - 1;
      continue;
    }
    if (static_cast<int>(fields.size()) != dims + 1)
      throw ParseError("expected " + std::to_string(dims + 1) + " fields", line_no);
    config.codes.push_back(fields[0]);
    std::vector<double> row;
    for (int d = 0; d < dims; ++d) row.push_back(parse_number(fields[d + 1], line_no));
    rows.push_back(std::move(row));
  }
  if (dims < 0) throw ParseError("missing header row", 1);
  if (rows.empty()) throw ParseError("no data rows", line_no);
  config.coords.resize(static_cast<int>(rows.size()), dims);
  for (int i = 0; i < static_cast<int>(rows.size()); ++i)
    for (int d = 0; d < dims; ++d) config.coords(i, d) = rows[i][d];
  return config;
}

}  // namespace sensomap
