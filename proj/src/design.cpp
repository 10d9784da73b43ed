#include "roiregress/design.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "roiregress/errors.hpp"

namespace roiregress::design {

namespace {

constexpr double kBlockSeconds = 16.0;
constexpr std::size_t kCycles = 4;

// Cyclic Latin square: cycle k presents the categories rotated by k.
const Category kLoc1Base[4] = {Category::Faces, Category::Hands,
                               Category::Bodies, Category::Scrambled};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string to_string(Category c) {
  switch (c) {
    case Category::Faces: return "Faces";
    case Category::Hands: return "Hands";
    case Category::Bodies: return "Bodies";
    case Category::Scrambled: return "Scrambled";
    case Category::Baseline: return "Baseline";
  }
  return "?";
}

Category parse_category(const std::string& text) {
  std::string low;
  for (char c : text) low.push_back(static_cast<char>(std::tolower(c)));
  if (low == "faces") return Category::Faces;
  if (low == "hands") return Category::Hands;
  if (low == "bodies") return Category::Bodies;
  if (low == "scrambled") return Category::Scrambled;
  if (low == "baseline") return Category::Baseline;
  throw ParamError("unknown stimulus category '" + text + "'");
}

void StimulusSchedule::validate() const {
  double cursor = 0.0;
  for (const auto& b : blocks) {
    if (!(b.duration_seconds > 0.0))
      throw ParamError("block duration must be positive");
    if (b.onset_seconds < cursor - 1e-9)
      throw ParamError("blocks overlap or are out of order at onset " +
                       std::to_string(b.onset_seconds));
    if (b.onset_seconds > cursor + 1e-9)
      throw ParamError("schedule gap before onset " +
                       std::to_string(b.onset_seconds) +
                       " (baseline must fill gaps)");
    cursor = b.onset_seconds + b.duration_seconds;
  }
  if (std::abs(cursor - total_duration_seconds) > 1e-9)
    throw ParamError("blocks do not cover [0, total_duration)");
}

StimulusSchedule builtin_localizer_schedule(data::RunLabel order) {
  if (order == data::RunLabel::Rest)
    throw ParamError("no stimulus schedule for a resting run");

  StimulusSchedule s;
  double t = 0.0;
  auto push = [&](Category c) {
    s.blocks.push_back({c, t, kBlockSeconds});
    t += kBlockSeconds;
  };

  push(Category::Baseline);
  for (std::size_t cycle = 0; cycle < kCycles; ++cycle) {
    for (std::size_t k = 0; k < 4; ++k) {
      // Loc2 reverses the within-cycle order; both stay Latin squares.
      const std::size_t slot = order == data::RunLabel::Loc1 ? k : 3 - k;
      push(kLoc1Base[(cycle + slot) % 4]);
    }
    push(Category::Baseline);
  }
  s.total_duration_seconds = t;
  s.validate();
  return s;
}

StimulusSchedule load_schedule(const std::string& path,
                               double total_duration_seconds) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open schedule '" + path + "'");
  std::vector<Block> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::stringstream fields(t);
    std::string cat, onset, dur;
    if (!std::getline(fields, cat, ',') || !std::getline(fields, onset, ',') ||
        !std::getline(fields, dur, ','))
      throw FormatError("schedule line " + std::to_string(line_no) +
                        ": want category,onset_seconds,duration_seconds");
    Block b;
    b.category = parse_category(trim(cat));
    try {
      b.onset_seconds = std::stod(onset);
      b.duration_seconds = std::stod(dur);
    } catch (const std::exception&) {
      throw FormatError("schedule line " + std::to_string(line_no) +
                        ": bad number");
    }
    raw.push_back(b);
  }
  std::sort(raw.begin(), raw.end(), [](const Block& a, const Block& b) {
    return a.onset_seconds < b.onset_seconds;
  });

  // Fill gaps with baseline so the coverage invariant holds.
  StimulusSchedule s;
  double cursor = 0.0;
  for (const auto& b : raw) {
    if (b.onset_seconds > cursor + 1e-9)
      s.blocks.push_back({Category::Baseline, cursor, b.onset_seconds - cursor});
    s.blocks.push_back(b);
    cursor = b.onset_seconds + b.duration_seconds;
  }
  if (total_duration_seconds > cursor + 1e-9) {
    s.blocks.push_back(
        {Category::Baseline, cursor, total_duration_seconds - cursor});
    cursor = total_duration_seconds;
  }
  s.total_duration_seconds = cursor;
  s.validate();
  return s;
}

std::vector<double> boxcar(const StimulusSchedule& schedule,
                           const CategoryScope& scope, double tr_seconds,
                           std::size_t n_samples) {
  if (n_samples == 0) throw ParamError("boxcar needs at least one sample");
  if (!(tr_seconds > 0.0)) throw ParamError("tr_seconds must be positive");
  std::vector<double> box(n_samples, 0.0);
  for (std::size_t t = 0; t < n_samples; ++t) {
    const double time = static_cast<double>(t) * tr_seconds;
    for (const auto& b : schedule.blocks) {
      if (time >= b.onset_seconds &&
          time < b.onset_seconds + b.duration_seconds) {
        if (scope.contains(b.category)) box[t] = 1.0;
        break;
      }
    }
  }
  return box;
}

Hrf two_gamma_hrf(double tr_seconds, double length_seconds,
                  const HrfParams& params) {
  if (!(tr_seconds > 0.0) || !(length_seconds > 0.0))
    throw ParamError("tr_seconds and length_seconds must be positive");
  if (!(params.peak_dispersion > 0.0) || !(params.undershoot_dispersion > 0.0))
    throw ParamError("HRF dispersions must be positive");
  if (!(params.peak_delay_seconds > 0.0) ||
      !(params.undershoot_delay_seconds > 0.0))
    throw ParamError("HRF delays must be positive");
  if (params.undershoot_ratio < 0.0)
    throw ParamError("HRF undershoot ratio must be nonnegative");

  // Gamma density with scale s and mode d: shape a = d/s + 1.
  auto gamma_pdf = [](double t, double delay, double dispersion) {
    const double shape = delay / dispersion + 1.0;
    const double rate = 1.0 / dispersion;
    if (t <= 0.0) return 0.0;
    return std::exp(shape * std::log(rate) + (shape - 1.0) * std::log(t) -
                    rate * t - std::lgamma(shape));
  };

  const auto n = static_cast<std::size_t>(
                     std::floor(length_seconds / tr_seconds + 1e-9)) + 1;
  Hrf hrf;
  hrf.tr_seconds = tr_seconds;
  hrf.kernel.resize(n);
  double peak = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * tr_seconds;
    hrf.kernel[k] =
        gamma_pdf(t, params.peak_delay_seconds, params.peak_dispersion) -
        params.undershoot_ratio * gamma_pdf(t, params.undershoot_delay_seconds,
                                            params.undershoot_dispersion);
    peak = std::max(peak, hrf.kernel[k]);
  }
  if (!(peak > 0.0))
    throw ParamError("HRF has no positive peak; check parameters");
  for (double& v : hrf.kernel) v /= peak;
  return hrf;
}

HrTarget convolve_hr(const std::vector<double>& box, const Hrf& hrf,
                     const CategoryScope& scope) {
  if (box.empty()) throw ParamError("cannot convolve an empty boxcar");
  const std::size_t T = box.size(), K = hrf.kernel.size();
  HrTarget target;
  target.scope = scope;
  target.values.assign(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    double acc = 0.0;
    const std::size_t kmax = std::min(t + 1, K);
    for (std::size_t k = 0; k < kmax; ++k)
      acc += hrf.kernel[k] * box[t - k];
    target.values[t] = acc;
  }
  return target;
}

HrTarget single_category_target(const StimulusSchedule& schedule, Category c,
                                const Hrf& hrf, double tr_seconds,
                                std::size_t n_samples) {
  const auto scope = CategoryScope::single(c);
  return convolve_hr(boxcar(schedule, scope, tr_seconds, n_samples), hrf,
                     scope);
}

HrTarget all_stims_target(const StimulusSchedule& schedule, const Hrf& hrf,
                          double tr_seconds, std::size_t n_samples) {
  HrTarget target;
  target.scope = CategoryScope::all();
  target.values.assign(n_samples, 0.0);
  for (Category c : {Category::Faces, Category::Hands, Category::Bodies,
                     Category::Scrambled}) {
    const HrTarget part =
        single_category_target(schedule, c, hrf, tr_seconds, n_samples);
    for (std::size_t t = 0; t < n_samples; ++t)
      target.values[t] += part.values[t];
  }
  return target;
}

HrTarget make_target(const StimulusSchedule& schedule,
                     const CategoryScope& scope, const Hrf& hrf,
                     double tr_seconds, std::size_t n_samples) {
  if (!scope.category)
    return all_stims_target(schedule, hrf, tr_seconds, n_samples);
  return single_category_target(schedule, *scope.category, hrf, tr_seconds,
                                n_samples);
}

std::vector<double> standardize(const std::vector<double>& values) {
  if (values.size() < 2)
    throw ParamError("standardize needs at least two samples");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  if (!(sd > 0.0)) throw ParamError("cannot standardize a constant series");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = (values[i] - mean) / sd;
  return out;
}

void save_target(const HrTarget& target, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  char buf[40];
  for (double v : target.values) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf << '\n';
  }
}

std::vector<double> load_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v))
      throw FormatError("bad value at line " + std::to_string(line_no) +
                        " of '" + path + "'");
    values.push_back(v);
  }
  if (values.empty()) throw FormatError("empty input: '" + path + "'");
  return values;
}

}  // namespace roiregress::design
