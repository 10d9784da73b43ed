// roiregress: fit linear (ridge) and non-linear (GP) multivariate models of
// a hypothesized haemodynamic response from ROI-averaged time series, and
// evaluate their generalizability.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "roiregress/dataset.hpp"
#include "roiregress/design.hpp"
#include "roiregress/errors.hpp"
#include "roiregress/eval.hpp"
#include "roiregress/genome.hpp"
#include "roiregress/gp.hpp"
#include "roiregress/ridge.hpp"
#include "roiregress/stats.hpp"
#include "roiregress/synth.hpp"

namespace fs = std::filesystem;
using namespace roiregress;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------- hr

struct HrArgs {
  std::string order = "loc1";
  std::string scope = "all";
  double tr = 1.0;
  std::size_t samples = 340;
  std::string out;
  std::string schedule_file;
  double total_duration = 0.0;
  design::HrfParams hrf;
  double hrf_length = 32.0;
};

design::CategoryScope parse_scope(const std::string& scope) {
  if (scope == "all") return design::CategoryScope::all();
  return design::CategoryScope::single(design::parse_category(scope));
}

design::HrTarget build_target(const HrArgs& a) {
  const auto schedule =
      a.schedule_file.empty()
          ? design::builtin_localizer_schedule(data::parse_run_label(a.order))
          : design::load_schedule(a.schedule_file, a.total_duration);
  const auto hrf = design::two_gamma_hrf(a.tr, a.hrf_length, a.hrf);
  return design::make_target(schedule, parse_scope(a.scope), hrf, a.tr,
                             a.samples);
}

int run_hr(const HrArgs& a) {
  design::save_target(build_target(a), a.out);
  return 0;
}

// ------------------------------------------------------------------- synth

struct SynthArgs {
  std::string out_dir;
  int subjects = 10;
  int validation = 0;
  int rois = 8;
  double noise_sd = 0.0;
  double jitter_sd = 0.0;
  std::uint64_t seed = 0;
  std::vector<int> signal_rois;
  std::vector<double> weights;
  double intercept = 0.0;
  std::string plant;
  std::string target_file;  // otherwise built like `hr`
  HrArgs hr;
};

int run_synth(SynthArgs& a) {
  const std::vector<double> target = a.target_file.empty()
                                         ? build_target(a.hr).values
                                         : design::load_series(a.target_file);

  synth::SynthSpec spec;
  spec.n_subjects = a.subjects;
  spec.n_rois = a.rois;
  spec.n_timepoints = static_cast<int>(target.size());
  spec.signal_rois = a.signal_rois;
  spec.noise_sd = a.noise_sd;
  spec.subject_jitter_sd = a.jitter_sd;
  spec.seed = a.seed;
  spec.tr_seconds = a.hr.tr;
  if (!a.plant.empty()) {
    spec.generator = synth::NonLinearPlant{a.plant};
  } else {
    if (a.weights.empty())
      throw ParamError("synth: need either --plant or --weights");
    spec.generator = synth::LinearMixture{a.weights, a.intercept};
  }

  synth::write_dataset(spec, synth::generate(spec, target), a.out_dir);
  if (a.validation > 0) {
    synth::SynthSpec vspec = spec;
    vspec.n_subjects = a.validation;
    vspec.subject_prefix = "v";
    vspec.seed = derive_seed(a.seed, 0x7A11DA7AULL);
    synth::write_dataset(vspec, synth::generate(vspec, target), a.out_dir,
                         "manifest_validation.txt");
  }
  design::HrTarget t;
  t.values = target;
  design::save_target(t, (fs::path(a.out_dir) / "target.csv").string());
  return 0;
}

// --------------------------------------------------------------------- fit

struct GpKnobs {
  int runs = 10;
  int islands = 7;
  int pop = 101;
  int migrations = 20;
  int generations = 1000;
  double crossover = 0.80;
  double mutation = 0.10;
  int trainers = 8;
  int predictors = 20;
  double predictor_fraction = 0.20;
  int max_nodes = 140;
  int tournament = 4;
  bool quiet = false;

  gp::GpConfig config(std::uint64_t seed) const {
    gp::GpConfig cfg;
    cfg.subpopulations = islands;
    cfg.pop_per_island = pop;
    cfg.migrations = migrations;
    cfg.generations_per_migration = generations;
    cfg.crossover_rate = crossover;
    cfg.mutation_rate = mutation;
    cfg.trainers = trainers;
    cfg.predictors = predictors;
    cfg.predictor_size_fraction = predictor_fraction;
    cfg.max_nodes = max_nodes;
    cfg.tournament_size = tournament;
    cfg.rng_seed = seed;
    return cfg;
  }
};

struct FitArgs {
  std::string manifest;
  std::vector<std::string> run_triples;
  std::string method = "linear";
  std::string target_file;
  std::string out_dir;
  double tr = 1.0;
  bool zscore = false;
  double lambda = 1.0;
  bool gcv = false;
  bool raw_gp_target = false;
  std::uint64_t seed = 0;
  GpKnobs gp;
};

std::string run_stem(const data::RunDescriptor& run) {
  return run.subject_id + "_" + data::to_string(run.run_label);
}

// Runs come either from --manifest or from repeated --run subject:label:path
// triples (or both).
std::vector<data::ManifestEntry> collect_entries(
    const std::string& manifest, const std::vector<std::string>& triples) {
  std::vector<data::ManifestEntry> entries;
  if (!manifest.empty()) entries = data::load_manifest(manifest);
  for (const auto& triple : triples) {
    const auto c1 = triple.find(':');
    const auto c2 = c1 == std::string::npos ? std::string::npos
                                            : triple.find(':', c1 + 1);
    if (c2 == std::string::npos)
      throw ParamError("--run expects subject:label:path, got '" + triple + "'");
    data::ManifestEntry e;
    e.run.subject_id = triple.substr(0, c1);
    e.run.run_label = data::parse_run_label(triple.substr(c1 + 1, c2 - c1 - 1));
    e.path = triple.substr(c2 + 1);
    entries.push_back(std::move(e));
  }
  if (entries.empty())
    throw ParamError("no runs given; use --manifest or --run");
  return entries;
}

int run_fit(const FitArgs& a) {
  const auto entries = collect_entries(a.manifest, a.run_triples);
  const auto runs = data::load_runs(entries, a.tr, a.zscore);
  const auto target = design::load_series(a.target_file);
  fs::create_directories(a.out_dir);

  if (a.method == "linear") {
    for (const auto& [run, x] : runs) {
      const double lam = a.gcv ? ridge::gcv_lambda(x, target) : a.lambda;
      const auto model = ridge::fit_ridge(x, target, lam);
      if (model.underdetermined_warning)
        std::cerr << "roiregress: warning: " << run.display()
                  << " has no more rows than columns\n";
      if (model.min_norm_fallback)
        std::cerr << "roiregress: warning: " << run.display()
                  << " was rank deficient; minimum-norm solution used\n";
      ridge::save_model(model,
                        (fs::path(a.out_dir) / (run_stem(run) + ".linmodel")).string());
    }
    return 0;
  }
  if (a.method != "gp") throw ParamError("fit: unknown method '" + a.method + "'");

  const auto gp_target = a.raw_gp_target ? target : design::standardize(target);
  std::size_t run_index = 0;
  for (const auto& [run, x] : runs) {
    const fs::path dir = fs::path(a.out_dir) / (run_stem(run) + ".gp");
    fs::create_directories(dir);
    gp::GpConfig cfg =
        a.gp.config(derive_seed(a.seed, 0xF17000ULL + run_index++));

    std::vector<std::vector<double>> traces;
    int active_run = 0;
    auto progress = [&](int migration, double best) {
      traces.back().push_back(best);
      if (!a.gp.quiet)
        std::cerr << "fit " << run.display() << " run " << active_run
                  << " migration " << migration + 1 << "/" << cfg.migrations
                  << " best_mse " << best << '\n';
    };

    std::vector<gp::GpRunResult> results;
    for (int r = 0; r < a.gp.runs; ++r) {
      active_run = r;
      traces.emplace_back();
      gp::GpConfig run_cfg = cfg;
      run_cfg.rng_seed = derive_seed(cfg.rng_seed, 0x52554E00ULL + r);
      results.push_back(gp::evolve(x, gp_target, run_cfg, progress));
    }

    for (int r = 0; r < a.gp.runs; ++r) {
      char name[48];
      std::snprintf(name, sizeof name, "candidate_%03d.gpmodel", r);
      gp::save_genome(results[r].best, (dir / name).string());
      std::snprintf(name, sizeof name, "trace_%03d.csv", r);
      std::ofstream trace(dir / name);
      trace << "migration,best_mse\n";
      for (std::size_t m = 0; m < traces[r].size(); ++m)
        trace << m << ',' << fmt17(traces[r][m]) << '\n';
    }
    const auto& best = gp::select_best(results, x, gp_target);
    gp::save_genome(best, (dir / "best.gpmodel").string());
  }
  return 0;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string protocol;
  std::string models_dir;
  std::string method = "linear";
  std::string manifest;
  std::vector<std::string> run_triples;
  std::string validation_manifest;
  std::string target_file;
  std::string target_loc1;
  std::string target_loc2;
  std::string run_label = "loc1";
  std::string gp_selection = "best";
  std::string out = "report.csv";
  std::string task_scores;
  double tr = 1.0;
  bool zscore = false;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  GpKnobs gp;
};

eval::TargetMap load_targets(const EvalArgs& a) {
  eval::TargetMap targets;
  if (!a.target_loc1.empty())
    targets[data::RunLabel::Loc1] = design::load_series(a.target_loc1);
  if (!a.target_loc2.empty())
    targets[data::RunLabel::Loc2] = design::load_series(a.target_loc2);
  if (!a.target_file.empty()) {
    const auto t = design::load_series(a.target_file);
    targets.emplace(data::RunLabel::Loc1, t);
    targets.emplace(data::RunLabel::Loc2, t);
    targets.emplace(data::RunLabel::Rest, t);
  }
  if (targets.empty())
    throw ParamError("eval: need --target or --target-loc1/--target-loc2");
  return targets;
}

eval::ModelMap load_models(const EvalArgs& a, const data::RunCollection& runs,
                           const eval::TargetMap& targets) {
  eval::ModelMap models;
  for (const auto& [run, x] : runs) {
    eval::Model m;
    if (a.method == "linear") {
      m.impl = ridge::load_model(
          (fs::path(a.models_dir) / (run_stem(run) + ".linmodel")).string());
    } else if (a.method == "gp") {
      const fs::path dir = fs::path(a.models_dir) / (run_stem(run) + ".gp");
      if (a.gp_selection == "best") {
        m.impl = gp::load_genome((dir / "best.gpmodel").string());
      } else if (a.gp_selection == "unbiased") {
        // Re-select using the same subject's other run as holdout.
        data::RunDescriptor other = run;
        other.run_label = run.run_label == data::RunLabel::Loc1
                              ? data::RunLabel::Loc2
                              : data::RunLabel::Loc1;
        const auto it = runs.find(other);
        if (it == runs.end())
          throw ProtocolError("eval: unbiased selection needs the counterpart run " +
                              other.display());
        std::vector<gp::GpRunResult> results;
        for (int r = 0;; ++r) {
          char name[48];
          std::snprintf(name, sizeof name, "candidate_%03d.gpmodel", r);
          const fs::path file = dir / name;
          if (!fs::exists(file)) break;
          gp::GpRunResult result;
          result.best = gp::load_genome(file.string());
          results.push_back(std::move(result));
        }
        if (results.empty())
          throw ParamError("eval: no candidates under " + dir.string());
        m.impl = gp::select_unbiased(results, x, targets.at(run.run_label),
                                     it->second, targets.at(other.run_label));
      } else {
        throw ParamError("eval: unknown --gp-selection '" + a.gp_selection + "'");
      }
    } else {
      throw ParamError("eval: unknown method '" + a.method + "'");
    }
    models.emplace(run, std::move(m));
  }
  return models;
}

std::vector<double> load_scores(const std::string& path) {
  // Either a roiregress report or a plain one-number-per-line list.
  std::ifstream probe(path);
  if (!probe) throw FormatError("cannot open scores '" + path + "'");
  std::string first;
  std::getline(probe, first);
  if (first.rfind("# roiregress-report", 0) == 0)
    return eval::load_report(path).scores();
  return design::load_series(path);
}

int run_eval(const EvalArgs& a) {
  const auto targets = load_targets(a);

  if (a.protocol == "resting") {
    const auto entries = collect_entries(a.manifest, a.run_triples);
    const auto runs = data::load_runs(entries, a.tr, a.zscore);
    if (runs.size() != 1)
      throw ProtocolError("eval resting: manifest must list exactly one run");
    const auto& [run, x] = *runs.begin();
    const auto& target = targets.begin()->second;
    const auto fit = eval::resting_overfit(x, target, a.lambda,
                                           a.gp.config(a.seed), a.gp.runs);

    eval::EvalReport report;
    report.protocol = eval::Protocol::Resting;
    report.entries.push_back({"linear", run.display(), fit.r_linear, false});
    report.entries.push_back({"gp", run.display(), fit.r_gp, false});
    report.finalize();
    eval::save_report(report, a.out);

    std::cout << "method,R_rest";
    if (!a.task_scores.empty()) std::cout << ",t,df,p";
    std::cout << '\n';
    for (const auto& [name, r] :
         {std::pair{"linear", fit.r_linear}, std::pair{"gp", fit.r_gp}}) {
      std::cout << name << ',' << fmt17(r);
      if (!a.task_scores.empty()) {
        const auto task = load_scores(a.task_scores);
        const auto test = stats::ttest_one_sample(task, r);
        std::cout << ',' << fmt17(test.t) << ',' << fmt17(test.df) << ','
                  << fmt17(test.p);
      }
      std::cout << '\n';
    }
    return 0;
  }

  const auto entries = collect_entries(a.manifest, a.run_triples);
  const auto runs = data::load_runs(entries, a.tr, a.zscore);
  const auto models = load_models(a, runs, targets);
  const auto label = data::parse_run_label(a.run_label);

  if (a.protocol == "self") {
    eval::save_report(eval::self_fit(models, runs, targets), a.out);
  } else if (a.protocol == "within") {
    eval::save_report(eval::within_subject(models, runs, targets), a.out);
  } else if (a.protocol == "between") {
    eval::save_report(eval::pairwise_between(models, runs, targets, label), a.out);
  } else if (a.protocol == "average") {
    eval::save_report(eval::average_model_loo(models, runs, targets, label), a.out);
  } else if (a.protocol == "validation") {
    if (a.validation_manifest.empty())
      throw ParamError("eval validation: need --validation-manifest");
    const auto ventries = data::load_manifest(a.validation_manifest);
    const auto vruns = data::load_runs(ventries, a.tr, a.zscore);
    const auto [pairwise, averaged] =
        eval::apply_to_validation(models, vruns, targets);
    const fs::path out(a.out);
    fs::path pair_path = out, avg_path = out;
    pair_path.replace_extension(".pairwise" + out.extension().string());
    avg_path.replace_extension(".average" + out.extension().string());
    eval::save_report(pairwise, pair_path.string());
    eval::save_report(averaged, avg_path.string());
  } else {
    throw ParamError("eval: unknown protocol '" + a.protocol + "'");
  }
  return 0;
}

// ------------------------------------------------------------------- stats

struct StatsArgs {
  std::string test = "welch";
  std::string a_file;
  std::string b_file;
  double mu = 0.0;
  bool have_mu = false;
};

int run_stats(const StatsArgs& a) {
  const auto sample_a = load_scores(a.a_file);
  stats::TTestResult r;
  if (a.test == "welch") {
    if (a.b_file.empty()) throw ParamError("stats welch: need --b");
    r = stats::ttest_two_sample(sample_a, load_scores(a.b_file));
  } else if (a.test == "onesample") {
    if (!a.have_mu) throw ParamError("stats onesample: need --mu");
    r = stats::ttest_one_sample(sample_a, a.mu);
  } else {
    throw ParamError("stats: unknown test '" + a.test + "'");
  }
  std::cout << fmt17(r.t) << ',' << fmt17(r.df) << ',' << fmt17(r.p) << '\n';
  return 0;
}

// ----------------------------------------------------------------- inspect

int run_inspect(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::string header;
  std::getline(in, header);
  if (header == "roiregress-linear v1") {
    const auto m = ridge::load_model(path);
    std::cout << "linear model: n=" << m.weights.size()
              << " lambda=" << fmt17(m.lambda)
              << " intercept=" << fmt17(m.intercept) << "\nweights:";
    for (double w : m.weights) std::cout << ' ' << fmt17(w);
    std::cout << '\n';
    return 0;
  }
  if (header == "roiregress-gp v1") {
    const auto g = gp::load_genome(path);
    std::cout << "gp model: nodes=" << g.nodes.size()
              << " active=" << gp::active_nodes(g).size()
              << " max_var=x" << g.max_variable() << '\n'
              << gp::to_sexpr(g) << '\n';
    return 0;
  }
  if (header.rfind("# roiregress-report v1", 0) == 0) {
    const auto r = eval::load_report(path);
    std::cout << "report: protocol=" << eval::to_string(r.protocol)
              << " n=" << r.scores().size()
              << " excluded=" << r.excluded_count()
              << " mean=" << fmt17(r.mean) << " sd=" << fmt17(r.sd) << '\n';
    return 0;
  }
  throw FormatError("'" + path + "': not a roiregress file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ROI time-series regression toolkit"};
  app.set_config("--config", "", "flat key=value configuration file");
  app.require_subcommand(1);

  // hr
  HrArgs hr;
  auto* hr_cmd = app.add_subcommand("hr", "write a hypothesized response target CSV");
  auto add_hr_options = [](CLI::App* cmd, HrArgs& a) {
    cmd->add_option("--order", a.order, "localizer order: loc1|loc2");
    cmd->add_option("--scope", a.scope,
                    "all|faces|hands|bodies|scrambled");
    cmd->add_option("--tr", a.tr, "repetition time in seconds");
    cmd->add_option("--T", a.samples, "number of samples");
    cmd->add_option("--schedule", a.schedule_file,
                    "3-column schedule CSV instead of the built-in localizer");
    cmd->add_option("--total-duration", a.total_duration,
                    "schedule duration when using --schedule");
    cmd->add_option("--hrf-peak", a.hrf.peak_delay_seconds, "HRF peak delay (s)");
    cmd->add_option("--hrf-undershoot", a.hrf.undershoot_delay_seconds,
                    "HRF undershoot delay (s)");
    cmd->add_option("--hrf-peak-dispersion", a.hrf.peak_dispersion, "");
    cmd->add_option("--hrf-undershoot-dispersion", a.hrf.undershoot_dispersion, "");
    cmd->add_option("--hrf-ratio", a.hrf.undershoot_ratio, "undershoot ratio");
    cmd->add_option("--hrf-length", a.hrf_length, "kernel support (s)");
  };
  add_hr_options(hr_cmd, hr);
  hr_cmd->add_option("--out", hr.out, "output CSV")->required();

  // synth
  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  synth_cmd->add_option("--out-dir", synth_args.out_dir)->required();
  synth_cmd->add_option("--subjects", synth_args.subjects);
  synth_cmd->add_option("--validation", synth_args.validation,
                        "extra withheld subjects (v01..)");
  synth_cmd->add_option("--rois", synth_args.rois);
  synth_cmd->add_option("--noise-sd", synth_args.noise_sd);
  synth_cmd->add_option("--jitter-sd", synth_args.jitter_sd);
  synth_cmd->add_option("--seed", synth_args.seed);
  synth_cmd->add_option("--signal-rois", synth_args.signal_rois)
      ->delimiter(',')
      ->required();
  synth_cmd->add_option("--weights", synth_args.weights)->delimiter(',');
  synth_cmd->add_option("--intercept", synth_args.intercept);
  synth_cmd->add_option("--plant", synth_args.plant, "plant expression");
  synth_cmd->add_option("--target", synth_args.target_file,
                        "target CSV; default builds the localizer target");
  add_hr_options(synth_cmd, synth_args.hr);

  // fit
  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit one model per manifest run");
  fit_cmd->add_option("--manifest", fit.manifest);
  fit_cmd->add_option("--run", fit.run_triples,
                      "subject:label:path triple, repeatable");
  fit_cmd->add_option("--method", fit.method, "linear|gp");
  fit_cmd->add_option("--target", fit.target_file)->required();
  fit_cmd->add_option("--out-dir", fit.out_dir)->required();
  fit_cmd->add_option("--tr", fit.tr);
  fit_cmd->add_flag("--zscore", fit.zscore, "z-score ROI columns before fitting");
  fit_cmd->add_option("--lambda", fit.lambda, "ridge penalty");
  fit_cmd->add_flag("--gcv", fit.gcv, "pick lambda by GCV per run");
  fit_cmd->add_flag("--raw-target", fit.raw_gp_target,
                    "skip target standardization for GP fitness");
  fit_cmd->add_option("--seed", fit.seed);
  auto add_gp_options = [](CLI::App* cmd, GpKnobs& k) {
    cmd->add_option("--gp-runs", k.runs, "independent GP runs per manifest run");
    cmd->add_option("--gp-islands", k.islands);
    cmd->add_option("--gp-pop", k.pop);
    cmd->add_option("--gp-migrations", k.migrations);
    cmd->add_option("--gp-generations", k.generations, "generations per migration");
    cmd->add_option("--gp-crossover", k.crossover);
    cmd->add_option("--gp-mutation", k.mutation);
    cmd->add_option("--gp-trainers", k.trainers);
    cmd->add_option("--gp-predictors", k.predictors);
    cmd->add_option("--gp-predictor-fraction", k.predictor_fraction);
    cmd->add_option("--gp-max-nodes", k.max_nodes);
    cmd->add_option("--gp-tournament", k.tournament);
    cmd->add_flag("--gp-quiet", k.quiet, "suppress per-migration progress");
  };
  add_gp_options(fit_cmd, fit.gp);

  // eval
  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "run a generalizability protocol");
  eval_cmd->add_option("--protocol", ev.protocol,
                       "self|within|between|average|validation|resting")
      ->required();
  eval_cmd->add_option("--models-dir", ev.models_dir);
  eval_cmd->add_option("--method", ev.method, "linear|gp");
  eval_cmd->add_option("--manifest", ev.manifest);
  eval_cmd->add_option("--run", ev.run_triples,
                       "subject:label:path triple, repeatable");
  eval_cmd->add_option("--validation-manifest", ev.validation_manifest);
  eval_cmd->add_option("--target", ev.target_file);
  eval_cmd->add_option("--target-loc1", ev.target_loc1);
  eval_cmd->add_option("--target-loc2", ev.target_loc2);
  eval_cmd->add_option("--run-label", ev.run_label, "loc1|loc2 for between/average");
  eval_cmd->add_option("--gp-selection", ev.gp_selection, "best|unbiased");
  eval_cmd->add_option("--out", ev.out, "report CSV path");
  eval_cmd->add_option("--task-scores", ev.task_scores,
                       "report or score list for resting t-tests");
  eval_cmd->add_option("--tr", ev.tr);
  eval_cmd->add_flag("--zscore", ev.zscore);
  eval_cmd->add_option("--lambda", ev.lambda, "ridge penalty (resting)");
  eval_cmd->add_option("--seed", ev.seed, "GP seed (resting)");
  add_gp_options(eval_cmd, ev.gp);

  // stats
  StatsArgs st;
  auto* stats_cmd = app.add_subcommand("stats", "t-tests over score files");
  stats_cmd->add_option("--test", st.test, "welch|onesample");
  stats_cmd->add_option("--a", st.a_file)->required();
  stats_cmd->add_option("--b", st.b_file);
  stats_cmd->add_option("--mu", st.mu);

  // inspect
  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "pretty-print a model or report");
  inspect_cmd->add_option("file", inspect_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*hr_cmd) return run_hr(hr);
    if (*synth_cmd) return run_synth(synth_args);
    if (*fit_cmd) return run_fit(fit);
    if (*eval_cmd) return run_eval(ev);
    if (*stats_cmd) {
      st.have_mu = stats_cmd->count("--mu") > 0;
      return run_stats(st);
    }
    if (*inspect_cmd) return run_inspect(inspect_path);
  } catch (const std::exception& e) {
    std::cerr << "roiregress: error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
