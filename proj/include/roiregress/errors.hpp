#pragma once

#include <stdexcept>
#include <string>

namespace roiregress {

// Malformed file contents (ragged CSV, bad header, unparseable cell).
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dimension mismatch between operands (matrix width vs model width, ...).
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument or configuration value.
struct ParamError : std::runtime_error {
  explicit ParamError(const std::string& msg) : std::runtime_error(msg) {}
};

// Evaluation-protocol precondition unmet (missing runs, subject overlap,
// too few subjects).
struct ProtocolError : std::runtime_error {
  explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

// Pearson correlation requested on a constant series.
struct UndefinedCorrelation : std::runtime_error {
  explicit UndefinedCorrelation(const std::string& msg)
      : std::runtime_error(msg) {}
};

}  // namespace roiregress
