#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace roiregress::data {

// T x N matrix of ROI-averaged samples, one row per TR, one column per ROI.
// Immutable after construction; safe to share across threads.
class RoiMatrix {
 public:
  RoiMatrix(std::vector<double> values, std::size_t rows, std::size_t cols,
            double tr_seconds);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double tr_seconds() const { return tr_seconds_; }

  double at(std::size_t t, std::size_t j) const {
    return values_[t * cols_ + j];
  }
  const double* row(std::size_t t) const { return values_.data() + t * cols_; }
  const std::vector<double>& values() const { return values_; }

  std::vector<double> column(std::size_t j) const;

 private:
  std::vector<double> values_;  // row-major
  std::size_t rows_;
  std::size_t cols_;
  double tr_seconds_;
};

enum class RunLabel { Loc1, Loc2, Rest };

std::string to_string(RunLabel label);
RunLabel parse_run_label(const std::string& text);

// (subject_id, run_label, atlas_label) uniquely identifies a run.
struct RunDescriptor {
  std::string subject_id;
  RunLabel run_label = RunLabel::Loc1;
  std::string atlas_label;

  bool operator<(const RunDescriptor& other) const;
  bool operator==(const RunDescriptor& other) const;
  std::string display() const;  // "subject:label"
};

using RunCollection = std::map<RunDescriptor, RoiMatrix>;

// Parse a headerless numeric CSV into a RoiMatrix. Errors name the
// offending line (ragged rows) or row/column (bad cell). `skip_header`
// drops the first line before parsing.
RoiMatrix load_run(const std::string& path, double tr_seconds,
                   bool skip_header = false);

// Write back as CSV with 17 significant digits; load_run(save_run(m))
// round-trips bit-identically.
void save_run(const RoiMatrix& m, const std::string& path);

// Columnwise standardization: mean 0, sample (T-1 divisor) sd 1.
// Zero-variance columns map to all-zero columns rather than erroring.
RoiMatrix zscore_columns(const RoiMatrix& m);

// One "subject:label:path" triple per line; '#' comments and blank lines
// skipped. Relative paths resolve against the manifest's directory.
struct ManifestEntry {
  RunDescriptor run;
  std::string path;
};

std::vector<ManifestEntry> load_manifest(const std::string& path);

RunCollection load_runs(const std::vector<ManifestEntry>& entries,
                        double tr_seconds, bool zscore = false);

}  // namespace roiregress::data
