#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "liftmix/model.hpp"

namespace liftmix {

/// Shortest decimal form that round-trips a double ("%.17g" trimmed by trying
/// fewer digits first).
inline std::string format_double(double v) {
  char buf[32];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// Row-oriented CSV writer. Fields are written verbatim; callers pass plain
/// identifiers and numbers only.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
  }

  CsvWriter& field(std::string_view s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
    return *this;
  }
  CsvWriter& field(double v) { return field(format_double(v)); }
  template <class I>
    requires std::is_integral_v<I>
  CsvWriter& field(I v) {
    return field(std::string_view(std::to_string(v)));
  }

  void end_row() {
    out_ << '\n';
    first_ = true;
  }

  void row(const std::vector<std::string>& fields) {
    for (const auto& f : fields) field(f);
    end_row();
  }

  void close() {
    out_.close();
    if (!out_) throw std::runtime_error("failed writing CSV");
  }

 private:
  std::ofstream out_;
  bool first_ = true;
};

/// Reads one observation per row with comma-separated numeric columns. Blank
/// lines are skipped; with `header` the first non-blank line is skipped.
inline Dataset read_dataset_csv(const std::string& path, bool header = false) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path);
  std::vector<double> values;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  bool skipped_header = !header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || cell.find_first_not_of(" \t", used) != std::string::npos) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": not a number: '" + cell + "'");
      }
      values.push_back(v);
      ++cols;
    }
    if (dim == 0) dim = cols;
    if (cols != dim) throw std::runtime_error(path + ":" + std::to_string(line_no) + ": inconsistent column count");
  }
  if (values.empty()) throw std::runtime_error("dataset " + path + " has no rows");
  return Dataset::from_values(dim, std::move(values));
}

inline void write_dataset_csv(const std::string& path, const Dataset& data) {
  CsvWriter out(path);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.row(i)) out.field(v);
    out.end_row();
  }
  out.close();
}

}  // namespace liftmix
