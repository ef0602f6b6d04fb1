#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "maxrank/errors.hpp"

namespace maxrank {

// n x m matrix of test statistics, column k holding the empirical null of
// test k. Stored column-major so per-test sorting and ranking touch
// contiguous memory.
class ScoreMatrix {
 public:
  ScoreMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
    if (rows == 0 || cols == 0) {
      throw ValidationError("ScoreMatrix requires at least 1 row and 1 column");
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t k) {
    return data_[k * rows_ + i];
  }
  double operator()(std::size_t i, std::size_t k) const {
    return data_[k * rows_ + i];
  }

  std::span<const double> column(std::size_t k) const {
    return {data_.data() + k * rows_, rows_};
  }
  std::span<double> column(std::size_t k) {
    return {data_.data() + k * rows_, rows_};
  }

  // All entries must be finite.
  void validate() const {
    for (double v : data_) {
      if (!std::isfinite(v)) {
        throw ValidationError("ScoreMatrix contains a non-finite entry");
      }
    }
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

// Column-wise ranks of a ScoreMatrix; every column is a permutation of
// {1..n}. Same column-major layout.
class RankMatrix {
 public:
  RankMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::int32_t& operator()(std::size_t i, std::size_t k) {
    return data_[k * rows_ + i];
  }
  std::int32_t operator()(std::size_t i, std::size_t k) const {
    return data_[k * rows_ + i];
  }

  std::span<const std::int32_t> column(std::size_t k) const {
    return {data_.data() + k * rows_, rows_};
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::int32_t> data_;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

inline double parse_double_field(const std::string& field, std::size_t lineno) {
  std::size_t a = field.find_first_not_of(" \t\r");
  if (a == std::string::npos) {
    throw ValidationError("empty numeric field on CSV line " +
                          std::to_string(lineno));
  }
  std::size_t b = field.find_last_not_of(" \t\r");
  double value = 0.0;
  const char* first = field.data() + a;
  const char* last = field.data() + b + 1;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ValidationError("bad numeric field '" + field + "' on CSV line " +
                          std::to_string(lineno));
  }
  return value;
}

}  // namespace detail

// Reads the ScoreMatrix CSV format: a header row `test_1,...,test_m`
// followed by n data rows of decimal literals. Values round-trip through
// 64-bit floating point unchanged.
inline ScoreMatrix read_score_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError("score CSV is empty");
  }
  const std::size_t m = detail::split_csv_line(line).size();

  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != m) {
      throw ValidationError("CSV line " + std::to_string(lineno) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(m));
    }
    std::vector<double> row(m);
    for (std::size_t k = 0; k < m; ++k) {
      row[k] = detail::parse_double_field(fields[k], lineno);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw ValidationError("score CSV has a header but no data rows");
  }

  ScoreMatrix s(rows.size(), m);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < m; ++k) s(i, k) = rows[i][k];
  }
  s.validate();
  return s;
}

inline ScoreMatrix read_score_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open score CSV: " + path.string());
  }
  return read_score_csv(in);
}

// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string join_semicolon(std::span<const double> values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ';';
    s += format_double(values[i]);
  }
  return s;
}

inline void write_score_csv(const ScoreMatrix& s, std::ostream& out) {
  for (std::size_t k = 0; k < s.cols(); ++k) {
    out << (k ? "," : "") << "test_" << (k + 1);
  }
  out << "\n";
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t k = 0; k < s.cols(); ++k) {
      out << (k ? "," : "") << format_double(s(i, k));
    }
    out << "\n";
  }
}

}  // namespace maxrank
