#pragma once

#include <charconv>
#include <fstream>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Dense>

#include "qcwass/error.hpp"
#include "qcwass/study.hpp"

namespace qcwass::io {

// Shortest decimal form that reads back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline double parse_number(std::string_view s, const std::string& where) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(where + ": '" + std::string(s) + "' is not a number");
  }
  return v;
}

inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

namespace detail {

// Non-blank lines of a file with their 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::string>> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open file");
  std::vector<std::pair<std::size_t, std::string>> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!trim(line).empty()) out.emplace_back(number, line);
  }
  return out;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(path + ": cannot open file for writing");
  return out;
}

}  // namespace detail

// One value per line; the first line is skipped when `header` is set.
inline std::vector<double> read_column_csv(const std::string& path, bool header) {
  const auto lines = detail::read_lines(path);
  std::vector<double> out;
  for (std::size_t k = header ? 1 : 0; k < lines.size(); ++k) {
    const auto& [number, text] = lines[k];
    const std::string where = path + ":" + std::to_string(number);
    const auto fields = split_fields(text);
    if (fields.size() != 1) throw ConfigError(where + ": expected a single column");
    out.push_back(parse_number(fields[0], where));
  }
  if (out.empty()) throw ConfigError(path + ": no values");
  return out;
}

// Named columns; the header row is required.
inline Dataset read_dataset_csv(const std::string& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw ConfigError(path + ": empty file");
  Dataset ds;
  ds.names = split_fields(lines[0].second);
  for (const auto& name : ds.names) {
    if (name.empty()) throw ConfigError(path + ":" + std::to_string(lines[0].first) + ": empty column name");
  }
  const auto cols = static_cast<Eigen::Index>(ds.names.size());
  ds.values.resize(static_cast<Eigen::Index>(lines.size()) - 1, cols);
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const std::string where = path + ":" + std::to_string(lines[k].first);
    const auto fields = split_fields(lines[k].second);
    if (static_cast<Eigen::Index>(fields.size()) != cols) {
      throw ConfigError(where + ": expected " + std::to_string(cols) + " fields, found " +
                        std::to_string(fields.size()));
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      ds.values(static_cast<Eigen::Index>(k) - 1, j) = parse_number(fields[static_cast<std::size_t>(j)], where);
    }
  }
  if (ds.values.rows() == 0) throw ConfigError(path + ": no data rows");
  return ds;
}

inline void write_dataset_csv(std::ostream& out, const Dataset& ds) {
  for (std::size_t j = 0; j < ds.names.size(); ++j) out << (j ? "," : "") << ds.names[j];
  out << '\n';
  for (Eigen::Index i = 0; i < ds.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.values.cols(); ++j) out << (j ? "," : "") << format_number(ds.values(i, j));
    out << '\n';
  }
}

inline void write_dataset_csv(const std::string& path, const Dataset& ds) {
  auto out = detail::open_output(path);
  write_dataset_csv(out, ds);
}

// Long format: one (theta, metric, value) row per metric and theta point.
inline void write_study_csv(std::ostream& out, const StudyResult& result) {
  out << "theta,metric,value\n";
  for (const auto& r : result.records) {
    for (const auto& [metric, value] : record_metrics(r)) {
      out << format_number(r.theta) << ',' << metric << ',' << format_number(value) << '\n';
    }
  }
}

inline void write_study_csv(const std::string& path, const StudyResult& result) {
  auto out = detail::open_output(path);
  write_study_csv(out, result);
}

// Two-column table (x, y).
inline void write_curve_csv(const std::string& path, const std::string& x_name, const std::string& y_name,
                            const std::vector<double>& x, const std::vector<double>& y) {
  auto out = detail::open_output(path);
  out << x_name << ',' << y_name << '\n';
  for (std::size_t i = 0; i < x.size(); ++i) out << format_number(x[i]) << ',' << format_number(y[i]) << '\n';
}

}  // namespace qcwass::io
