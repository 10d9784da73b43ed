#pragma once

#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "roiregress/dataset.hpp"
#include "roiregress/genome.hpp"
#include "roiregress/gp.hpp"
#include "roiregress/ridge.hpp"

namespace roiregress::eval {

// Pearson product-moment correlation, clamped to [-1, 1] against rounding.
// Throws UndefinedCorrelation on constant input rather than zeroing it.
double pearson_r(const std::vector<double>& a, const std::vector<double>& b);

// Uniform apply interface over the two model families.
struct Model {
  std::variant<ridge::LinearModel, gp::ExpressionGenome> impl;

  std::vector<double> apply(const data::RoiMatrix& x) const;
  bool is_linear() const {
    return std::holds_alternative<ridge::LinearModel>(impl);
  }
};

enum class Protocol { SelfFit, WithinSubject, PairwiseBetween, AverageModel, Resting };

std::string to_string(Protocol p);
Protocol parse_protocol(const std::string& text);

struct ScoreEntry {
  std::string source;  // run the model was fit on (or "average<...>")
  std::string target;  // run the model was applied to
  double r = 0.0;
  bool excluded = false;  // constant model output, correlation undefined
};

// Raw score list plus summary statistics. The full list is persisted so any
// later statistic can be recomputed from the report alone.
struct EvalReport {
  Protocol protocol = Protocol::SelfFit;
  std::string run_label;  // context tag, may be empty
  std::vector<ScoreEntry> entries;
  double mean = 0.0;
  double sd = 0.0;  // sample (n-1) standard deviation; 0 when n < 2

  std::vector<double> scores() const;  // non-excluded, in entry order
  std::size_t excluded_count() const;
  void finalize();  // recompute mean/sd from entries
};

// CSV: one "# roiregress-report v1 ..." header comment, a column header,
// score rows, and one trailing "@summary,<mean>,<sd>" row.
void save_report(const EvalReport& report, const std::string& path);
EvalReport load_report(const std::string& path);

using ModelMap = std::map<data::RunDescriptor, Model>;
using TargetMap = std::map<data::RunLabel, std::vector<double>>;

// Each model applied to its own training run.
EvalReport self_fit(const ModelMap& models, const data::RunCollection& data,
                    const TargetMap& targets);

// Each model applied to the same subject's other localizer run, both
// directions. Subjects missing a counterpart raise a coverage error that
// lists every missing run.
EvalReport within_subject(const ModelMap& models,
                          const data::RunCollection& data,
                          const TargetMap& targets);

// Every ordered subject pair (i != j) for one run label.
EvalReport pairwise_between(const ModelMap& models,
                            const data::RunCollection& data,
                            const TargetMap& targets, data::RunLabel run_label);

// Leave-one-out output averaging: the held-out subject is scored against
// the mean output of everyone else's model on its data.
EvalReport average_model_loo(const ModelMap& models,
                             const data::RunCollection& data,
                             const TargetMap& targets,
                             data::RunLabel run_label);

// Models applied to withheld subjects (must be disjoint from the modelled
// ones): all pairwise scores plus leave-none-out average-model scores.
std::pair<EvalReport, EvalReport> apply_to_validation(
    const ModelMap& models, const data::RunCollection& validation_data,
    const TargetMap& targets);

struct RestingFit {
  double r_linear = 0.0;
  double r_gp = 0.0;
  ridge::LinearModel linear;
  gp::ExpressionGenome genome;
};

// Fits one linear and one GP model to task-free data against an unrelated
// target and reports each self-fit R: an estimate of the propensity to
// overfit. The GP fitness target is standardized (Pearson R is unaffected).
RestingFit resting_overfit(const data::RoiMatrix& x_rest,
                           const std::vector<double>& target, double lambda,
                           const gp::GpConfig& gp_config, int gp_runs = 1);

}  // namespace roiregress::eval
