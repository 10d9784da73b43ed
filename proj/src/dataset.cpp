#include "roiregress/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

#include "roiregress/errors.hpp"

namespace roiregress::data {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_cell(const std::string& cell, std::size_t line_no,
                  std::size_t col_no) {
  const std::string t = trim(cell);
  double value = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || t.empty()) {
    throw FormatError("non-numeric cell at line " + std::to_string(line_no) +
                      ", column " + std::to_string(col_no) + ": '" + t + "'");
  }
  if (!std::isfinite(value)) {
    throw FormatError("non-finite cell at line " + std::to_string(line_no) +
                      ", column " + std::to_string(col_no));
  }
  return value;
}

}  // namespace

RoiMatrix::RoiMatrix(std::vector<double> values, std::size_t rows,
                     std::size_t cols, double tr_seconds)
    : values_(std::move(values)), rows_(rows), cols_(cols),
      tr_seconds_(tr_seconds) {
  if (rows_ < 2 || cols_ < 1)
    throw ShapeError("RoiMatrix needs at least 2 rows and 1 column, got " +
                     std::to_string(rows_) + "x" + std::to_string(cols_));
  if (values_.size() != rows_ * cols_)
    throw ShapeError("RoiMatrix value count does not match dimensions");
  if (!(tr_seconds_ > 0.0)) throw ParamError("tr_seconds must be positive");
  for (double v : values_)
    if (!std::isfinite(v)) throw ParamError("RoiMatrix entries must be finite");
}

std::vector<double> RoiMatrix::column(std::size_t j) const {
  std::vector<double> out(rows_);
  for (std::size_t t = 0; t < rows_; ++t) out[t] = at(t, j);
  return out;
}

std::string to_string(RunLabel label) {
  switch (label) {
    case RunLabel::Loc1: return "Loc1";
    case RunLabel::Loc2: return "Loc2";
    case RunLabel::Rest: return "Rest";
  }
  return "?";
}

RunLabel parse_run_label(const std::string& text) {
  std::string low;
  for (char c : text) low.push_back(static_cast<char>(std::tolower(c)));
  if (low == "loc1") return RunLabel::Loc1;
  if (low == "loc2") return RunLabel::Loc2;
  if (low == "rest") return RunLabel::Rest;
  throw ParamError("unknown run label '" + text + "' (want Loc1, Loc2 or Rest)");
}

bool RunDescriptor::operator<(const RunDescriptor& other) const {
  return std::tie(subject_id, run_label, atlas_label) <
         std::tie(other.subject_id, other.run_label, other.atlas_label);
}

bool RunDescriptor::operator==(const RunDescriptor& other) const {
  return std::tie(subject_id, run_label, atlas_label) ==
         std::tie(other.subject_id, other.run_label, other.atlas_label);
}

std::string RunDescriptor::display() const {
  return subject_id + ":" + to_string(run_label);
}

RoiMatrix load_run(const std::string& path, double tr_seconds,
                   bool skip_header) {
  if (!(tr_seconds > 0.0)) throw ParamError("tr_seconds must be positive");
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");

  std::vector<double> values;
  std::size_t rows = 0, cols = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_header && line_no == 1) continue;
    if (trim(line).empty()) continue;

    std::size_t col_no = 0;
    std::stringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) {
      ++col_no;
      values.push_back(parse_cell(cell, line_no, col_no));
    }
    if (cols == 0) {
      cols = col_no;
    } else if (col_no != cols) {
      throw FormatError("ragged row at line " + std::to_string(line_no) +
                        " of '" + path + "': expected " + std::to_string(cols) +
                        " columns, got " + std::to_string(col_no));
    }
    ++rows;
  }
  if (rows == 0) throw FormatError("empty input: '" + path + "'");
  return RoiMatrix(std::move(values), rows, cols, tr_seconds);
}

void save_run(const RoiMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  char buf[40];
  for (std::size_t t = 0; t < m.rows(); ++t) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m.at(t, j));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
}

RoiMatrix zscore_columns(const RoiMatrix& m) {
  const std::size_t T = m.rows(), N = m.cols();
  std::vector<double> out(T * N, 0.0);
  for (std::size_t j = 0; j < N; ++j) {
    double mean = 0.0;
    for (std::size_t t = 0; t < T; ++t) mean += m.at(t, j);
    mean /= static_cast<double>(T);
    double ss = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double d = m.at(t, j) - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(T - 1));
    if (sd > 0.0) {
      for (std::size_t t = 0; t < T; ++t)
        out[t * N + j] = (m.at(t, j) - mean) / sd;
    }
    // sd == 0: constant column stays all-zero
  }
  return RoiMatrix(std::move(out), T, N, m.tr_seconds());
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest '" + path + "'");
  std::string dir;
  if (const auto slash = path.find_last_of('/'); slash != std::string::npos)
    dir = path.substr(0, slash + 1);

  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto c1 = t.find(':');
    const auto c2 = c1 == std::string::npos ? std::string::npos
                                            : t.find(':', c1 + 1);
    if (c2 == std::string::npos)
      throw FormatError("manifest line " + std::to_string(line_no) +
                        ": want subject:label:path, got '" + t + "'");
    ManifestEntry e;
    e.run.subject_id = trim(t.substr(0, c1));
    e.run.run_label = parse_run_label(trim(t.substr(c1 + 1, c2 - c1 - 1)));
    std::string p = trim(t.substr(c2 + 1));
    if (e.run.subject_id.empty() || p.empty())
      throw FormatError("manifest line " + std::to_string(line_no) +
                        ": empty subject or path");
    e.path = (!p.empty() && p[0] != '/') ? dir + p : p;
    entries.push_back(std::move(e));
  }
  return entries;
}

RunCollection load_runs(const std::vector<ManifestEntry>& entries,
                        double tr_seconds, bool zscore) {
  RunCollection runs;
  for (const auto& e : entries) {
    if (runs.count(e.run))
      throw FormatError("duplicate manifest run " + e.run.display());
    RoiMatrix m = load_run(e.path, tr_seconds);
    runs.emplace(e.run, zscore ? zscore_columns(m) : std::move(m));
  }
  return runs;
}

}  // namespace roiregress::data
