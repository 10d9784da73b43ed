#include "roiregress/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "roiregress/errors.hpp"
#include "roiregress/genome.hpp"
#include "roiregress/rng.hpp"

namespace roiregress::synth {

namespace {

// Inversion recipe derived from a plant expression: the balance variable's
// column is solved from target = base(x) + coefficient * x_balance, where
// the sin form first maps the target through asin.
struct PlantRecipe {
  gp::ExpressionGenome genome;      // the canonical plant
  int balance_var = -1;
  double coefficient = 1.0;         // jittered per subject
  bool arcsine = false;             // "(sin xJ)" form
  std::int32_t base_root = -1;      // node index of A in "(+ A c*xJ)", or -1
};

std::set<int> variables_of(const gp::ExpressionGenome& g, std::uint16_t root) {
  std::set<int> vars;
  std::vector<std::uint16_t> stack{root};
  std::vector<std::uint8_t> seen(g.nodes.size(), 0);
  seen[root] = 1;
  while (!stack.empty()) {
    const auto i = stack.back();
    stack.pop_back();
    const auto& n = g.nodes[i];
    if (n.kind == gp::Node::Kind::Variable) vars.insert(n.var);
    if (n.kind == gp::Node::Kind::Function) {
      if (!seen[n.lhs]) { seen[n.lhs] = 1; stack.push_back(n.lhs); }
      if (gp::is_binary(n.op) && !seen[n.rhs]) { seen[n.rhs] = 1; stack.push_back(n.rhs); }
    }
  }
  return vars;
}

// Matches xJ or (* c xJ) / (* xJ c); returns (var, coefficient) on success.
bool match_linear_term(const gp::ExpressionGenome& g, std::uint16_t idx,
                       int& var, double& coeff) {
  const auto& n = g.nodes[idx];
  if (n.kind == gp::Node::Kind::Variable) {
    var = n.var;
    coeff = 1.0;
    return true;
  }
  if (n.kind == gp::Node::Kind::Function && n.op == gp::Op::Mul) {
    const auto& a = g.nodes[n.lhs];
    const auto& b = g.nodes[n.rhs];
    if (a.kind == gp::Node::Kind::Constant && b.kind == gp::Node::Kind::Variable) {
      var = b.var;
      coeff = a.value;
      return true;
    }
    if (b.kind == gp::Node::Kind::Constant && a.kind == gp::Node::Kind::Variable) {
      var = a.var;
      coeff = b.value;
      return true;
    }
  }
  return false;
}

PlantRecipe analyze_plant(const NonLinearPlant& plant,
                          const std::vector<int>& signal_rois) {
  PlantRecipe recipe;
  recipe.genome = gp::parse_sexpr(plant.expression);

  const std::set<int> used = variables_of(recipe.genome, recipe.genome.output_node);
  const std::set<int> declared(signal_rois.begin(), signal_rois.end());
  if (used != declared)
    throw ParamError("plant variables do not match signal_rois for '" +
                     plant.expression + "'");

  const auto& root = recipe.genome.nodes[recipe.genome.output_node];

  int var = -1;
  double coeff = 1.0;
  if (match_linear_term(recipe.genome, recipe.genome.output_node, var, coeff)) {
    recipe.balance_var = var;
    recipe.coefficient = coeff;
    return recipe;  // identity / scaled identity
  }
  if (root.kind == gp::Node::Kind::Function && root.op == gp::Op::Sin &&
      recipe.genome.nodes[root.lhs].kind == gp::Node::Kind::Variable) {
    recipe.balance_var = recipe.genome.nodes[root.lhs].var;
    recipe.arcsine = true;
    return recipe;
  }
  if (root.kind == gp::Node::Kind::Function && root.op == gp::Op::Add) {
    for (const auto [term, base] : {std::pair{root.rhs, root.lhs},
                                    std::pair{root.lhs, root.rhs}}) {
      if (!match_linear_term(recipe.genome, term, var, coeff)) continue;
      if (variables_of(recipe.genome, base).count(var)) continue;
      recipe.balance_var = var;
      recipe.coefficient = coeff;
      recipe.base_root = base;
      return recipe;
    }
  }
  throw ParamError(
      "unsupported plant form '" + plant.expression +
      "'; need xJ, (sin xJ), or (+ A c*xJ) with xJ absent from A");
}

void check_spec(const SynthSpec& spec, const std::vector<double>& target) {
  if (spec.n_subjects < 1) throw ParamError("synth: n_subjects must be >= 1");
  if (spec.runs_per_subject.empty())
    throw ParamError("synth: runs_per_subject is empty");
  if (spec.n_rois < 1) throw ParamError("synth: n_rois must be >= 1");
  if (spec.n_timepoints < 2) throw ParamError("synth: n_timepoints must be >= 2");
  if (static_cast<std::size_t>(spec.n_timepoints) != target.size())
    throw ParamError("synth: target length " + std::to_string(target.size()) +
                     " does not match n_timepoints " +
                     std::to_string(spec.n_timepoints));
  if (spec.noise_sd < 0.0 || spec.subject_jitter_sd < 0.0)
    throw ParamError("synth: noise_sd and subject_jitter_sd must be >= 0");
  if (spec.signal_rois.empty())
    throw ParamError("synth: signal_rois must not be empty");
  std::set<int> unique_rois;
  for (const int r : spec.signal_rois) {
    if (r < 0 || r >= spec.n_rois)
      throw ParamError("synth: signal ROI " + std::to_string(r) +
                       " out of range");
    if (!unique_rois.insert(r).second)
      throw ParamError("synth: duplicate signal ROI " + std::to_string(r));
  }
  if (const auto* lin = std::get_if<LinearMixture>(&spec.generator)) {
    if (lin->weights.size() != spec.signal_rois.size())
      throw ParamError("synth: weight count " +
                       std::to_string(lin->weights.size()) +
                       " does not match signal_rois count " +
                       std::to_string(spec.signal_rois.size()));
  }
}

}  // namespace

data::RunCollection generate(const SynthSpec& spec,
                             const std::vector<double>& target) {
  check_spec(spec, target);
  const std::size_t T = target.size();
  const std::size_t N = spec.n_rois;

  const auto* linear = std::get_if<LinearMixture>(&spec.generator);
  PlantRecipe recipe;
  if (linear == nullptr)
    recipe = analyze_plant(std::get<NonLinearPlant>(spec.generator),
                           spec.signal_rois);

  data::RunCollection runs;
  for (int subj = 0; subj < spec.n_subjects; ++subj) {
    char name[32];
    std::snprintf(name, sizeof name, "%s%02d", spec.subject_prefix.c_str(),
                  subj + 1);

    // Weight jitter drawn once per subject.
    Rng jitter_rng(derive_seed(spec.seed, 0xABCD0000ULL + subj));
    std::vector<double> w_subject;
    double coeff_subject = recipe.coefficient;
    if (linear != nullptr) {
      w_subject = linear->weights;
      for (double& w : w_subject) w += jitter_rng.normal(0.0, spec.subject_jitter_sd);
      if (std::fabs(w_subject.back()) < 1e-9)
        throw ParamError("synth: balancing weight is (nearly) zero for " +
                         std::string(name));
    } else if (!recipe.arcsine) {
      coeff_subject += jitter_rng.normal(0.0, spec.subject_jitter_sd);
      if (std::fabs(coeff_subject) < 1e-9)
        throw ParamError("synth: balancing coefficient is (nearly) zero for " +
                         std::string(name));
    }
    const double column_offset =
        recipe.arcsine ? jitter_rng.normal(0.0, spec.subject_jitter_sd) : 0.0;

    for (std::size_t r = 0; r < spec.runs_per_subject.size(); ++r) {
      Rng rng(derive_seed(spec.seed, 0x10000ULL * (subj + 1) + r));
      const int balance =
          linear != nullptr ? spec.signal_rois.back() : recipe.balance_var;

      // Columns first (balance column filled afterwards), column-major draw
      // order for reproducibility.
      std::vector<std::vector<double>> cols(N, std::vector<double>(T));
      for (std::size_t j = 0; j < N; ++j) {
        if (static_cast<int>(j) == balance) continue;
        for (std::size_t t = 0; t < T; ++t) cols[j][t] = rng.normal();
      }

      std::vector<double>& bal = cols[balance];
      if (linear != nullptr) {
        for (std::size_t t = 0; t < T; ++t) {
          double acc = target[t] - linear->intercept;
          for (std::size_t j = 0; j + 1 < spec.signal_rois.size(); ++j)
            acc -= w_subject[j] * cols[spec.signal_rois[j]][t];
          bal[t] = acc / w_subject.back();
        }
      } else if (recipe.arcsine) {
        for (std::size_t t = 0; t < T; ++t) {
          if (std::fabs(target[t]) > 1.0 + 1e-12)
            throw ParamError("synth: target value " + std::to_string(target[t]) +
                             " outside [-1,1]; a sin plant cannot reach it");
          bal[t] = std::asin(std::clamp(target[t], -1.0, 1.0)) + column_offset;
        }
      } else {
        gp::ExpressionGenome base = recipe.genome;
        for (std::size_t t = 0; t < T; ++t) {
          double base_value = 0.0;
          if (recipe.base_root >= 0) {
            std::vector<double> row(N);
            for (std::size_t j = 0; j < N; ++j) row[j] = cols[j][t];
            base.output_node = static_cast<std::uint16_t>(recipe.base_root);
            base_value = gp::eval_genome(base, row);
          }
          bal[t] = (target[t] - base_value) / coeff_subject;
        }
      }

      // Measurement noise after balancing, so noise_sd > 0 breaks exactness.
      if (spec.noise_sd > 0.0)
        for (std::size_t j = 0; j < N; ++j)
          for (std::size_t t = 0; t < T; ++t)
            cols[j][t] += rng.normal(0.0, spec.noise_sd);

      std::vector<double> values(T * N);
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < N; ++j) values[t * N + j] = cols[j][t];

      data::RunDescriptor run;
      run.subject_id = name;
      run.run_label = spec.runs_per_subject[r];
      run.atlas_label = spec.atlas_label;
      runs.emplace(run, data::RoiMatrix(std::move(values), T, N, spec.tr_seconds));
    }
  }
  return runs;
}

data::RoiMatrix resting_noise(std::size_t n_rois, std::size_t n_timepoints,
                              double sd, std::uint64_t seed) {
  if (n_rois < 1 || n_timepoints < 2)
    throw ParamError("resting_noise: need n_rois >= 1 and n_timepoints >= 2");
  if (sd < 0.0) throw ParamError("resting_noise: sd must be >= 0");
  Rng rng(derive_seed(seed, 0x5E57ULL));
  std::vector<double> values(n_rois * n_timepoints, 0.0);
  // Column-major draw order, matching generate().
  for (std::size_t j = 0; j < n_rois; ++j)
    for (std::size_t t = 0; t < n_timepoints; ++t)
      values[t * n_rois + j] = sd > 0.0 ? rng.normal(0.0, sd) : 0.0;
  return data::RoiMatrix(std::move(values), n_timepoints, n_rois, 1.0);
}

void write_dataset(const SynthSpec& spec, const data::RunCollection& runs,
                   const std::string& dir, const std::string& manifest_name) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::ofstream manifest(fs::path(dir) / manifest_name);
  if (!manifest) throw FormatError("cannot write manifest in '" + dir + "'");
  for (const auto& [run, matrix] : runs) {
    const std::string file =
        run.subject_id + "_" + data::to_string(run.run_label) + ".csv";
    data::save_run(matrix, (fs::path(dir) / file).string());
    manifest << run.subject_id << ':' << data::to_string(run.run_label) << ':'
             << file << '\n';
  }

  nlohmann::json sidecar;
  sidecar["n_subjects"] = spec.n_subjects;
  sidecar["n_rois"] = spec.n_rois;
  sidecar["n_timepoints"] = spec.n_timepoints;
  sidecar["signal_rois"] = spec.signal_rois;
  sidecar["noise_sd"] = spec.noise_sd;
  sidecar["subject_jitter_sd"] = spec.subject_jitter_sd;
  sidecar["seed"] = spec.seed;
  if (const auto* lin = std::get_if<LinearMixture>(&spec.generator)) {
    sidecar["generator"] = "linear";
    sidecar["weights"] = lin->weights;
    sidecar["intercept"] = lin->intercept;
  } else {
    sidecar["generator"] = "plant";
    sidecar["expression"] = std::get<NonLinearPlant>(spec.generator).expression;
  }
  std::ofstream side(fs::path(dir) / "generator.json");
  if (!side) throw FormatError("cannot write sidecar in '" + dir + "'");
  side << sidecar.dump(2) << '\n';
}

}  // namespace roiregress::synth
