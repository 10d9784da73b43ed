#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "roiregress/dataset.hpp"

namespace roiregress::synth {

// target = intercept + sum_j weights[j] * x[signal_rois[j]]
struct LinearMixture {
  std::vector<double> weights;
  double intercept = 0.0;
};

// target = <expression over signal ROI variables>. Columns are constructed
// by inverting the expression, so only invertible shapes are supported:
//   - "xJ"                      identity
//   - "(sin xJ)"                target must lie in [-1, 1]
//   - "(+ A xJ)" / "(+ A (* c xJ))"   with xJ absent from A
// The balancing variable's column is solved so the plant reproduces the
// target exactly before noise.
struct NonLinearPlant {
  std::string expression;
};

struct SynthSpec {
  int n_subjects = 10;
  std::vector<data::RunLabel> runs_per_subject = {data::RunLabel::Loc1,
                                                  data::RunLabel::Loc2};
  int n_rois = 8;
  int n_timepoints = 0;  // must equal the target length
  std::variant<LinearMixture, NonLinearPlant> generator;
  std::vector<int> signal_rois;
  double noise_sd = 0.0;
  double subject_jitter_sd = 0.0;  // perturbs generator weights per subject
  std::uint64_t seed = 0;
  std::string subject_prefix = "s";
  std::string atlas_label;  // carried metadata; empty keeps manifest keys aligned
  double tr_seconds = 1.0;
};

// Deterministic multi-subject dataset where the planted generator applied
// to each run's matrix reproduces `target` up to noise_sd. Non-signal ROIs
// are independent Gaussian noise.
data::RunCollection generate(const SynthSpec& spec,
                             const std::vector<double>& target);

// Task-free stand-in: i.i.d. Gaussian columns with no target relationship.
data::RoiMatrix resting_noise(std::size_t n_rois, std::size_t n_timepoints,
                              double sd, std::uint64_t seed);

// Writes one CSV per run into `dir`, a manifest ("subject:label:file" per
// line) and a JSON sidecar recording the planted generator.
void write_dataset(const SynthSpec& spec, const data::RunCollection& runs,
                   const std::string& dir,
                   const std::string& manifest_name = "manifest.txt");

}  // namespace roiregress::synth
