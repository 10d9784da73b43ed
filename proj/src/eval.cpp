#include "roiregress/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "roiregress/design.hpp"
#include "roiregress/errors.hpp"

namespace roiregress::eval {

double pearson_r(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw ShapeError("pearson_r: need equal lengths >= 2, got " +
                     std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  const auto n = static_cast<double>(a.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= n;
  mean_b /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    sxy += da * db;
    sxx += da * da;
    syy += db * db;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw UndefinedCorrelation("pearson_r: constant input series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> Model::apply(const data::RoiMatrix& x) const {
  if (const auto* linear = std::get_if<ridge::LinearModel>(&impl))
    return ridge::predict_linear(*linear, x);
  return gp::eval_series(std::get<gp::ExpressionGenome>(impl), x);
}

std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::SelfFit: return "SelfFit";
    case Protocol::WithinSubject: return "WithinSubject";
    case Protocol::PairwiseBetween: return "PairwiseBetween";
    case Protocol::AverageModel: return "AverageModel";
    case Protocol::Resting: return "Resting";
  }
  return "?";
}

Protocol parse_protocol(const std::string& text) {
  if (text == "SelfFit") return Protocol::SelfFit;
  if (text == "WithinSubject") return Protocol::WithinSubject;
  if (text == "PairwiseBetween") return Protocol::PairwiseBetween;
  if (text == "AverageModel") return Protocol::AverageModel;
  if (text == "Resting") return Protocol::Resting;
  throw ParamError("unknown protocol '" + text + "'");
}

std::vector<double> EvalReport::scores() const {
  std::vector<double> out;
  for (const auto& e : entries)
    if (!e.excluded) out.push_back(e.r);
  return out;
}

std::size_t EvalReport::excluded_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.excluded ? 1 : 0;
  return n;
}

void EvalReport::finalize() {
  const auto s = scores();
  mean = 0.0;
  sd = 0.0;
  if (s.empty()) return;
  for (double v : s) mean += v;
  mean /= static_cast<double>(s.size());
  if (s.size() < 2) return;
  double ss = 0.0;
  for (double v : s) ss += (v - mean) * (v - mean);
  sd = std::sqrt(ss / static_cast<double>(s.size() - 1));
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const std::vector<double>& target_for(const TargetMap& targets,
                                      data::RunLabel label) {
  const auto it = targets.find(label);
  if (it == targets.end())
    throw ProtocolError("no target supplied for run label " +
                        data::to_string(label));
  return it->second;
}

const data::RoiMatrix& matrix_for(const data::RunCollection& data,
                                  const data::RunDescriptor& run) {
  const auto it = data.find(run);
  if (it == data.end())
    throw ProtocolError("no data loaded for run " + run.display());
  return it->second;
}

void push_score(EvalReport& report, const std::string& source,
                const std::string& target_name,
                const std::vector<double>& output,
                const std::vector<double>& target) {
  ScoreEntry e;
  e.source = source;
  e.target = target_name;
  try {
    e.r = pearson_r(output, target);
  } catch (const UndefinedCorrelation&) {
    e.excluded = true;
  }
  report.entries.push_back(std::move(e));
}

// Subjects that own a model with the given label, sorted.
std::vector<std::string> subjects_with_label(const ModelMap& models,
                                             data::RunLabel label) {
  std::vector<std::string> subjects;
  for (const auto& [run, model] : models)
    if (run.run_label == label) subjects.push_back(run.subject_id);
  return subjects;
}

data::RunDescriptor run_key(const ModelMap& models, const std::string& subject,
                            data::RunLabel label) {
  for (const auto& [run, model] : models)
    if (run.subject_id == subject && run.run_label == label) return run;
  throw ProtocolError("no model for " + subject + ":" + data::to_string(label));
}

}  // namespace

EvalReport self_fit(const ModelMap& models, const data::RunCollection& data,
                    const TargetMap& targets) {
  if (models.empty()) throw ProtocolError("self_fit: no models");
  EvalReport report;
  report.protocol = Protocol::SelfFit;
  for (const auto& [run, model] : models) {
    const auto& x = matrix_for(data, run);
    push_score(report, run.display(), run.display(), model.apply(x),
               target_for(targets, run.run_label));
  }
  report.finalize();
  return report;
}

EvalReport within_subject(const ModelMap& models,
                          const data::RunCollection& data,
                          const TargetMap& targets) {
  // Coverage first: every subject needs models and data for both runs.
  std::set<std::string> subjects;
  for (const auto& [run, model] : models)
    if (run.run_label != data::RunLabel::Rest) subjects.insert(run.subject_id);
  if (subjects.empty()) throw ProtocolError("within_subject: no models");

  std::vector<std::string> missing;
  for (const auto& s : subjects)
    for (const auto label : {data::RunLabel::Loc1, data::RunLabel::Loc2}) {
      const bool has_model = std::any_of(
          models.begin(), models.end(), [&](const auto& kv) {
            return kv.first.subject_id == s && kv.first.run_label == label;
          });
      const bool has_data = std::any_of(
          data.begin(), data.end(), [&](const auto& kv) {
            return kv.first.subject_id == s && kv.first.run_label == label;
          });
      if (!has_model) missing.push_back(s + ":" + data::to_string(label) + " (model)");
      if (!has_data) missing.push_back(s + ":" + data::to_string(label) + " (data)");
    }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ProtocolError("within_subject: missing counterpart runs: " + list);
  }

  EvalReport report;
  report.protocol = Protocol::WithinSubject;
  for (const auto& s : subjects) {
    for (const auto [fit, other] :
         {std::pair{data::RunLabel::Loc1, data::RunLabel::Loc2},
          std::pair{data::RunLabel::Loc2, data::RunLabel::Loc1}}) {
      const auto fit_key = run_key(models, s, fit);
      data::RunDescriptor other_key = fit_key;
      other_key.run_label = other;
      const auto& model = models.at(fit_key);
      push_score(report, fit_key.display(), other_key.display(),
                 model.apply(matrix_for(data, other_key)),
                 target_for(targets, other));
    }
  }
  report.finalize();
  return report;
}

EvalReport pairwise_between(const ModelMap& models,
                            const data::RunCollection& data,
                            const TargetMap& targets,
                            data::RunLabel run_label) {
  const auto subjects = subjects_with_label(models, run_label);
  if (subjects.size() < 2)
    throw ProtocolError("pairwise_between: need at least 2 subjects with " +
                        data::to_string(run_label) + " models, have " +
                        std::to_string(subjects.size()));
  const auto& target = target_for(targets, run_label);

  EvalReport report;
  report.protocol = Protocol::PairwiseBetween;
  report.run_label = data::to_string(run_label);
  for (const auto& si : subjects) {
    const auto model_key = run_key(models, si, run_label);
    const auto& model = models.at(model_key);
    for (const auto& sj : subjects) {
      if (si == sj) continue;
      data::RunDescriptor data_key = model_key;
      data_key.subject_id = sj;
      push_score(report, model_key.display(), data_key.display(),
                 model.apply(matrix_for(data, data_key)), target);
    }
  }
  report.finalize();
  return report;
}

namespace {

std::vector<double> mean_output(const std::vector<const Model*>& group,
                                const data::RoiMatrix& x) {
  std::vector<double> acc(x.rows(), 0.0);
  for (const Model* m : group) {
    const auto out = m->apply(x);
    for (std::size_t t = 0; t < acc.size(); ++t) acc[t] += out[t];
  }
  for (double& v : acc) v /= static_cast<double>(group.size());
  return acc;
}

}  // namespace

EvalReport average_model_loo(const ModelMap& models,
                             const data::RunCollection& data,
                             const TargetMap& targets,
                             data::RunLabel run_label) {
  const auto subjects = subjects_with_label(models, run_label);
  if (subjects.size() < 2)
    throw ProtocolError("average_model_loo: need at least 2 subjects, have " +
                        std::to_string(subjects.size()));
  const auto& target = target_for(targets, run_label);

  EvalReport report;
  report.protocol = Protocol::AverageModel;
  report.run_label = data::to_string(run_label);
  for (const auto& held_out : subjects) {
    std::vector<const Model*> group;
    for (const auto& s : subjects)
      if (s != held_out) group.push_back(&models.at(run_key(models, s, run_label)));
    data::RunDescriptor data_key = run_key(models, held_out, run_label);
    push_score(report, "average[-" + held_out + "]", data_key.display(),
               mean_output(group, matrix_for(data, data_key)), target);
  }
  report.finalize();
  return report;
}

std::pair<EvalReport, EvalReport> apply_to_validation(
    const ModelMap& models, const data::RunCollection& validation_data,
    const TargetMap& targets) {
  if (models.empty()) throw ProtocolError("apply_to_validation: no models");
  if (validation_data.empty())
    throw ProtocolError("apply_to_validation: empty validation set");

  std::set<std::string> model_subjects;
  for (const auto& [run, model] : models) model_subjects.insert(run.subject_id);
  for (const auto& [run, x] : validation_data)
    if (model_subjects.count(run.subject_id))
      throw ProtocolError("apply_to_validation: subject " + run.subject_id +
                          " appears in both the models and the validation set");

  EvalReport pairwise;
  pairwise.protocol = Protocol::PairwiseBetween;
  pairwise.run_label = "validation";
  EvalReport averaged;
  averaged.protocol = Protocol::AverageModel;
  averaged.run_label = "validation";

  for (const auto& [val_run, x] : validation_data) {
    std::vector<const Model*> group;
    for (const auto& [model_run, model] : models) {
      if (model_run.run_label != val_run.run_label) continue;
      push_score(pairwise, model_run.display(), val_run.display(),
                 model.apply(x), target_for(targets, val_run.run_label));
      group.push_back(&model);
    }
    if (!group.empty())
      push_score(averaged, "average", val_run.display(), mean_output(group, x),
                 target_for(targets, val_run.run_label));
  }
  if (pairwise.entries.empty())
    throw ProtocolError("apply_to_validation: no model/validation run-label overlap");
  pairwise.finalize();
  averaged.finalize();
  return {std::move(pairwise), std::move(averaged)};
}

RestingFit resting_overfit(const data::RoiMatrix& x_rest,
                           const std::vector<double>& target, double lambda,
                           const gp::GpConfig& gp_config, int gp_runs) {
  RestingFit fit;
  fit.linear = ridge::fit_ridge(x_rest, target, lambda);
  fit.r_linear = pearson_r(ridge::predict_linear(fit.linear, x_rest), target);

  const auto gp_target = design::standardize(target);
  const auto results = gp::run_batch(x_rest, gp_target, gp_config, gp_runs);
  fit.genome = gp::select_best(results, x_rest, gp_target);
  fit.r_gp = pearson_r(gp::eval_series(fit.genome, x_rest), target);
  return fit;
}

void save_report(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << "# roiregress-report v1 protocol=" << to_string(report.protocol);
  if (!report.run_label.empty()) out << " run=" << report.run_label;
  out << " n=" << report.scores().size()
      << " excluded=" << report.excluded_count() << '\n';
  out << "source,target,score\n";
  for (const auto& e : report.entries) {
    out << e.source << ',' << e.target << ','
        << (e.excluded ? "excluded" : fmt(e.r)) << '\n';
  }
  out << "@summary," << fmt(report.mean) << ',' << fmt(report.sd) << '\n';
}

EvalReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open report '" + path + "'");
  EvalReport report;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# roiregress-report v1", 0) == 0) {
      std::stringstream ss(line);
      std::string tok;
      while (ss >> tok) {
        if (tok.rfind("protocol=", 0) == 0)
          report.protocol = parse_protocol(tok.substr(9));
        else if (tok.rfind("run=", 0) == 0)
          report.run_label = tok.substr(4);
      }
      header_seen = true;
      continue;
    }
    if (line[0] == '#' || line == "source,target,score") continue;
    std::stringstream ss(line);
    std::string source, target, score;
    if (!std::getline(ss, source, ',') || !std::getline(ss, target, ',') ||
        !std::getline(ss, score))
      throw FormatError("bad report row: '" + line + "'");
    if (source == "@summary") continue;  // recomputed below
    ScoreEntry e;
    e.source = source;
    e.target = target;
    if (score == "excluded") {
      e.excluded = true;
    } else {
      try {
        e.r = std::stod(score);
      } catch (const std::exception&) {
        throw FormatError("bad score '" + score + "' in report row");
      }
    }
    report.entries.push_back(std::move(e));
  }
  if (!header_seen)
    throw FormatError("'" + path + "': not a roiregress-report v1 file");
  report.finalize();
  return report;
}

}  // namespace roiregress::eval
