#include "rmtshrink/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "rmtshrink/errors.hpp"

namespace rmtshrink::io {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_number(const std::string& token, const std::filesystem::path& path, std::size_t line) {
  const std::string t = trim(token);
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ValidationError(path.string() + ":" + std::to_string(line) + ": cannot parse '" + t +
                          "' as a number");
  }
  if (!std::isfinite(x)) {
    throw ValidationError(path.string() + ":" + std::to_string(line) + ": non-finite value");
  }
  return x;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Matrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string token;
    while (std::getline(ss, token, ',')) row.push_back(parse_number(token, path, line_no));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(rows.front().size()) + " columns, found " +
                            std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError(path.string() + ": empty matrix file");
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (static_cast<Eigen::Index>(rows.front().size()) != n) {
    throw ValidationError(path.string() + ": matrix is " + std::to_string(n) + "x" +
                          std::to_string(rows.front().size()) + ", expected square");
  }
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[i][j];
  }
  require_symmetric(m);
  return m;
}

void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  write_atomic(path, out);
}

std::vector<double> read_values(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    values.push_back(parse_number(line, path, line_no));
  }
  if (values.empty()) throw ValidationError(path.string() + ": no values");
  return values;
}

void write_values(const std::filesystem::path& path, const std::vector<double>& values) {
  std::string out;
  for (double v : values) {
    out += format_double(v);
    out += '\n';
  }
  write_atomic(path, out);
}

void write_series(const std::filesystem::path& path, const std::vector<Column>& columns) {
  if (columns.empty()) throw ValidationError("write_series: no columns");
  const std::size_t len = columns.front().second.size();
  for (const auto& [name, data] : columns) {
    if (data.size() != len) {
      throw ValidationError("write_series: column '" + name + "' has " +
                            std::to_string(data.size()) + " rows, expected " +
                            std::to_string(len));
    }
  }
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c > 0) out += ',';
    out += columns[c].first;
  }
  out += '\n';
  for (std::size_t r = 0; r < len; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c > 0) out += ',';
      out += format_double(columns[c].second[r]);
    }
    out += '\n';
  }
  write_atomic(path, out);
}

}  // namespace rmtshrink::io
