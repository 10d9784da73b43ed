#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "roiregress/dataset.hpp"

namespace roiregress::design {

enum class Category { Faces, Hands, Bodies, Scrambled, Baseline };

std::string to_string(Category c);
Category parse_category(const std::string& text);

struct Block {
  Category category = Category::Baseline;
  double onset_seconds = 0.0;
  double duration_seconds = 0.0;
};

// Non-overlapping blocks sorted by onset, covering [0, total_duration)
// exactly; baseline fills every gap.
struct StimulusSchedule {
  std::vector<Block> blocks;
  double total_duration_seconds = 0.0;

  void validate() const;  // throws ParamError on overlap/gap/order
};

// The built-in localizer: 21 blocks of 16 s (336 s total), baseline at
// positions 1, 6, 11, 16 and 21, four cycles of the four stimulus
// categories in between. Loc1 cycles the order faces/hands/bodies/scrambled;
// Loc2 uses the reversed within-cycle order. Both are Latin squares over
// cycle position, so every category appears once in each quarter of a cycle.
StimulusSchedule builtin_localizer_schedule(data::RunLabel order);

// 3-column CSV: category,onset_seconds,duration_seconds. Baseline rows are
// optional; gaps are filled automatically.
StimulusSchedule load_schedule(const std::string& path,
                               double total_duration_seconds = 0.0);

// Either all stimulus categories or one specific category. Baseline is
// never in scope.
struct CategoryScope {
  std::optional<Category> category;  // nullopt = all stimulus categories

  static CategoryScope all() { return {}; }
  static CategoryScope single(Category c) { return {c}; }
  bool contains(Category c) const {
    if (c == Category::Baseline) return false;
    return !category || *category == c;
  }
  std::string display() const { return category ? to_string(*category) : "AllStims"; }
};

// Sample t (0-indexed) is 1 iff time t*tr falls inside an in-scope block.
std::vector<double> boxcar(const StimulusSchedule& schedule,
                           const CategoryScope& scope, double tr_seconds,
                           std::size_t n_samples);

struct HrfParams {
  double peak_delay_seconds = 5.0;
  double undershoot_delay_seconds = 15.0;
  double peak_dispersion = 1.0;
  double undershoot_dispersion = 1.0;
  double undershoot_ratio = 1.0 / 6.0;
};

// Difference-of-gamma-densities kernel sampled at TR resolution and scaled
// so its peak value is exactly 1.
struct Hrf {
  std::vector<double> kernel;
  double tr_seconds = 1.0;
};

Hrf two_gamma_hrf(double tr_seconds, double length_seconds = 32.0,
                  const HrfParams& params = {});

// Regression target: predicted response series in arbitrary units.
struct HrTarget {
  std::vector<double> values;
  CategoryScope scope;
};

// Causal discrete convolution of a boxcar with the HRF kernel, truncated to
// the boxcar's length.
HrTarget convolve_hr(const std::vector<double>& box, const Hrf& hrf,
                     const CategoryScope& scope = CategoryScope::all());

HrTarget single_category_target(const StimulusSchedule& schedule, Category c,
                                const Hrf& hrf, double tr_seconds,
                                std::size_t n_samples);

// Elementwise sum of the four single-category targets.
HrTarget all_stims_target(const StimulusSchedule& schedule, const Hrf& hrf,
                          double tr_seconds, std::size_t n_samples);

HrTarget make_target(const StimulusSchedule& schedule,
                     const CategoryScope& scope, const Hrf& hrf,
                     double tr_seconds, std::size_t n_samples);

// Zero mean, unit sample variance copy; used as the GP fitness target so
// MSE magnitudes are comparable across targets. Throws on constant input.
std::vector<double> standardize(const std::vector<double>& values);

// Single-column CSV with 17 significant digits.
void save_target(const HrTarget& target, const std::string& path);
std::vector<double> load_series(const std::string& path);

}  // namespace roiregress::design
