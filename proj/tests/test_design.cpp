#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

#include "roiregress/design.hpp"
#include "roiregress/errors.hpp"
#include "roiregress/rng.hpp"

using namespace roiregress;
using design::Category;

TEST_SUITE("design") {

TEST_CASE("built-in localizer layout") {
  const auto s1 = design::builtin_localizer_schedule(data::RunLabel::Loc1);
  CHECK(s1.blocks.size() == 21);
  CHECK(s1.total_duration_seconds == 336.0);

  std::map<Category, int> counts;
  for (const auto& b : s1.blocks) {
    CHECK(b.duration_seconds == 16.0);
    ++counts[b.category];
  }
  CHECK(counts[Category::Baseline] == 5);
  for (Category c : {Category::Faces, Category::Hands, Category::Bodies,
                     Category::Scrambled})
    CHECK(counts[c] == 4);

  // Baseline at block positions 1, 6, 11, 16, 21 (1-indexed).
  for (std::size_t pos : {0u, 5u, 10u, 15u, 20u})
    CHECK(s1.blocks[pos].category == Category::Baseline);
  CHECK(s1.blocks[0].onset_seconds == 0.0);
}

TEST_CASE("Loc1 and Loc2 share the block multiset but differ in order") {
  const auto s1 = design::builtin_localizer_schedule(data::RunLabel::Loc1);
  const auto s2 = design::builtin_localizer_schedule(data::RunLabel::Loc2);
  auto cats = [](const design::StimulusSchedule& s) {
    std::vector<Category> v;
    for (const auto& b : s.blocks) v.push_back(b.category);
    return v;
  };
  auto c1 = cats(s1), c2 = cats(s2);
  CHECK(c1 != c2);
  std::sort(c1.begin(), c1.end());
  std::sort(c2.begin(), c2.end());
  CHECK(c1 == c2);
}

TEST_CASE("each category appears once in each quarter of a cycle") {
  for (const auto order : {data::RunLabel::Loc1, data::RunLabel::Loc2}) {
    const auto s = design::builtin_localizer_schedule(order);
    // Slot k of cycle c is block 1 + 5c + k.
    for (std::size_t slot = 0; slot < 4; ++slot) {
      std::vector<Category> seen;
      for (std::size_t cycle = 0; cycle < 4; ++cycle)
        seen.push_back(s.blocks[1 + 5 * cycle + slot].category);
      std::sort(seen.begin(), seen.end());
      CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
    }
  }
}

TEST_CASE("boxcar sample counts over the built-in schedules") {
  for (const auto order : {data::RunLabel::Loc1, data::RunLabel::Loc2}) {
    const auto s = design::builtin_localizer_schedule(order);
    const auto all = design::boxcar(s, design::CategoryScope::all(), 1.0, 336);
    CHECK(std::accumulate(all.begin(), all.end(), 0.0) == 256.0);
    for (Category c : {Category::Faces, Category::Hands, Category::Bodies,
                       Category::Scrambled}) {
      const auto one =
          design::boxcar(s, design::CategoryScope::single(c), 1.0, 336);
      CHECK(std::accumulate(one.begin(), one.end(), 0.0) == 64.0);
    }
  }
}

TEST_CASE("boxcar pads beyond the schedule and rejects empty output") {
  const auto s = design::builtin_localizer_schedule(data::RunLabel::Loc1);
  const auto box = design::boxcar(s, design::CategoryScope::all(), 1.0, 340);
  for (std::size_t t = 336; t < 340; ++t) CHECK(box[t] == 0.0);
  CHECK_THROWS_AS(design::boxcar(s, design::CategoryScope::all(), 1.0, 0),
                  ParamError);
}

TEST_CASE("baseline is never in scope") {
  design::StimulusSchedule s;
  s.blocks = {{Category::Baseline, 0.0, 32.0}};
  s.total_duration_seconds = 32.0;
  const auto box = design::boxcar(s, design::CategoryScope::all(), 1.0, 32);
  CHECK(std::accumulate(box.begin(), box.end(), 0.0) == 0.0);
}

TEST_CASE("two-gamma kernel peaks at 1 near the peak delay") {
  const auto hrf = design::two_gamma_hrf(1.0);
  const auto peak_it = std::max_element(hrf.kernel.begin(), hrf.kernel.end());
  CHECK(*peak_it == doctest::Approx(1.0).epsilon(1e-12));
  const auto peak_t = std::distance(hrf.kernel.begin(), peak_it);
  CHECK(peak_t == 5);                 // default peak delay, 1 s sampling
  CHECK(hrf.kernel.size() == 33);     // 32 s support at 1 s resolution
  CHECK(std::fabs(hrf.kernel[0]) < 1e-9);
}

TEST_CASE("undershoot-free kernel is nonnegative") {
  design::HrfParams p;
  p.undershoot_ratio = 0.0;
  const auto hrf = design::two_gamma_hrf(1.0, 32.0, p);
  for (double v : hrf.kernel) CHECK(v >= 0.0);
}

TEST_CASE("kernel peak is 1 for random valid parameters") {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    design::HrfParams p;
    p.peak_delay_seconds = rng.uniform(2.0, 9.0);
    p.undershoot_delay_seconds = rng.uniform(10.0, 20.0);
    p.peak_dispersion = rng.uniform(0.5, 2.0);
    p.undershoot_dispersion = rng.uniform(0.5, 2.0);
    p.undershoot_ratio = rng.uniform(0.0, 0.5);
    const auto hrf = design::two_gamma_hrf(0.5, 40.0, p);
    CHECK(*std::max_element(hrf.kernel.begin(), hrf.kernel.end()) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
  design::HrfParams bad;
  bad.peak_dispersion = 0.0;
  CHECK_THROWS_AS(design::two_gamma_hrf(1.0, 32.0, bad), ParamError);
}

TEST_CASE("convolution identity, zero and linearity") {
  const auto hrf = design::two_gamma_hrf(1.0);

  std::vector<double> impulse(40, 0.0);
  impulse[0] = 1.0;
  const auto ident = design::convolve_hr(impulse, hrf);
  for (std::size_t t = 0; t < 40; ++t)
    CHECK(ident.values[t] ==
          doctest::Approx(t < hrf.kernel.size() ? hrf.kernel[t] : 0.0));

  const auto zero = design::convolve_hr(std::vector<double>(40, 0.0), hrf);
  for (double v : zero.values) CHECK(v == 0.0);

  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(60), b(60), sum(60);
    for (std::size_t t = 0; t < 60; ++t) {
      a[t] = rng.chance(0.3) ? 1.0 : 0.0;
      b[t] = rng.chance(0.3) ? 1.0 : 0.0;
      sum[t] = a[t] + b[t];
    }
    const auto ca = design::convolve_hr(a, hrf);
    const auto cb = design::convolve_hr(b, hrf);
    const auto csum = design::convolve_hr(sum, hrf);
    for (std::size_t t = 0; t < 60; ++t)
      CHECK(csum.values[t] ==
            doctest::Approx(ca.values[t] + cb.values[t]).epsilon(1e-10));
  }
}

TEST_CASE("all-stims target equals the sum of the category targets") {
  const auto s = design::builtin_localizer_schedule(data::RunLabel::Loc1);
  const auto hrf = design::two_gamma_hrf(1.0);
  const auto all = design::all_stims_target(s, hrf, 1.0, 340);
  std::vector<double> sum(340, 0.0);
  for (Category c : {Category::Faces, Category::Hands, Category::Bodies,
                     Category::Scrambled}) {
    const auto part = design::single_category_target(s, c, hrf, 1.0, 340);
    for (std::size_t t = 0; t < 340; ++t) sum[t] += part.values[t];
  }
  for (std::size_t t = 0; t < 340; ++t)
    CHECK(std::fabs(all.values[t] - sum[t]) < 1e-12);
}

TEST_CASE("single-category schedule collapses all-stims to that category") {
  design::StimulusSchedule s;
  s.blocks = {{Category::Faces, 0.0, 16.0}, {Category::Baseline, 16.0, 16.0}};
  s.total_duration_seconds = 32.0;
  const auto hrf = design::two_gamma_hrf(1.0);
  const auto all = design::all_stims_target(s, hrf, 1.0, 32);
  const auto faces =
      design::single_category_target(s, Category::Faces, hrf, 1.0, 32);
  for (std::size_t t = 0; t < 32; ++t)
    CHECK(all.values[t] == doctest::Approx(faces.values[t]).epsilon(1e-12));
}

TEST_CASE("schedule CSV loading fills gaps with baseline") {
  const auto path = std::filesystem::temp_directory_path() / "rr_sched.csv";
  {
    std::ofstream out(path);
    out << "Faces,16,16\nHands,48,16\n";
  }
  const auto s = design::load_schedule(path.string(), 80.0);
  CHECK(s.total_duration_seconds == 80.0);
  CHECK(s.blocks.size() == 5);  // base, faces, base, hands, base
  CHECK(s.blocks[0].category == Category::Baseline);
  CHECK(s.blocks[1].category == Category::Faces);
  CHECK(s.blocks[4].duration_seconds == 16.0);
}

TEST_CASE("target CSV round-trip and standardization") {
  const auto s = design::builtin_localizer_schedule(data::RunLabel::Loc1);
  const auto hrf = design::two_gamma_hrf(1.0);
  const auto target = design::all_stims_target(s, hrf, 1.0, 340);
  const auto path = (std::filesystem::temp_directory_path() / "rr_target.csv").string();
  design::save_target(target, path);
  const auto back = design::load_series(path);
  REQUIRE(back.size() == target.values.size());
  for (std::size_t t = 0; t < back.size(); ++t)
    CHECK(back[t] == target.values[t]);

  const auto z = design::standardize(target.values);
  double mean = std::accumulate(z.begin(), z.end(), 0.0) / z.size();
  double ss = 0.0;
  for (double v : z) ss += (v - mean) * (v - mean);
  CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ss / (z.size() - 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(design::standardize(std::vector<double>(5, 2.0)), ParamError);
}

}  // TEST_SUITE
