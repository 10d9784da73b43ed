#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "roiregress/errors.hpp"
#include "roiregress/eval.hpp"
#include "roiregress/rng.hpp"
#include "roiregress/synth.hpp"

using namespace roiregress;

namespace {

data::RunDescriptor key(const std::string& subject, data::RunLabel label) {
  return {subject, label, ""};
}

// Fixture: per-subject linear data with a planted shared signal. Returns
// (runs, models, targets) with ridge models fit per run.
struct Fixture {
  data::RunCollection runs;
  eval::ModelMap models;
  eval::TargetMap targets;
};

Fixture make_fixture(int n_subjects, double noise_sd, double jitter_sd,
                     std::uint64_t seed, const std::string& prefix = "s",
                     double lambda = 1.0) {
  std::vector<double> target(80);
  for (std::size_t t = 0; t < 80; ++t)
    target[t] = std::sin(0.2 * t) + 0.3 * std::sin(0.05 * t + 1.0);

  synth::SynthSpec spec;
  spec.n_subjects = n_subjects;
  spec.n_rois = 6;
  spec.n_timepoints = 80;
  spec.generator = synth::LinearMixture{{1.0, -0.7}, 0.2};
  spec.signal_rois = {1, 4};
  spec.noise_sd = noise_sd;
  spec.subject_jitter_sd = jitter_sd;
  spec.seed = seed;
  spec.subject_prefix = prefix;

  Fixture f;
  f.runs = synth::generate(spec, target);
  f.targets[data::RunLabel::Loc1] = target;
  f.targets[data::RunLabel::Loc2] = target;
  for (const auto& [run, matrix] : f.runs) {
    eval::Model m;
    m.impl = ridge::fit_ridge(matrix, target, lambda);
    f.models.emplace(run, std::move(m));
  }
  return f;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("pearson_r basics and the hand-derived 0.8 case") {
  const std::vector<double> a{1, 2, 3, 4};
  CHECK(eval::pearson_r(a, a) == doctest::Approx(1.0));
  std::vector<double> neg(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) neg[i] = -a[i];
  CHECK(eval::pearson_r(a, neg) == doctest::Approx(-1.0));
  CHECK(eval::pearson_r(a, {1, 3, 2, 4}) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK_THROWS_AS(eval::pearson_r(a, {1.0, 1.0, 1.0, 1.0}), UndefinedCorrelation);
  CHECK_THROWS_AS(eval::pearson_r(a, {1.0, 2.0}), ShapeError);
}

TEST_CASE("pearson_r is affine invariant") {
  Rng rng(31);
  std::vector<double> a(50), b(50);
  for (std::size_t i = 0; i < 50; ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
  }
  const double base = eval::pearson_r(a, b);
  for (const double alpha : {0.5, 3.0, 12.5}) {
    std::vector<double> scaled(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) scaled[i] = alpha * a[i] + 7.5;
    CHECK(eval::pearson_r(scaled, b) == doctest::Approx(base).epsilon(1e-12));
    for (std::size_t i = 0; i < a.size(); ++i) scaled[i] = -alpha * a[i] + 7.5;
    CHECK(eval::pearson_r(scaled, b) == doctest::Approx(-base).epsilon(1e-12));
  }
}

TEST_CASE("model variants share one apply interface") {
  const data::RoiMatrix x({1.0, 2.0, 3.0, 4.0, 5.0, 6.0}, 3, 2, 1.0);
  eval::Model linear;
  ridge::LinearModel lm;
  lm.weights = {1.0, 0.0};
  lm.intercept = 1.0;
  linear.impl = lm;
  CHECK(linear.apply(x) == std::vector<double>{2.0, 4.0, 6.0});
  CHECK(linear.is_linear());

  eval::Model genome;
  genome.impl = gp::parse_sexpr("(* x1 2)");
  CHECK(genome.apply(x) == std::vector<double>{4.0, 8.0, 12.0});
  CHECK_FALSE(genome.is_linear());
}

TEST_CASE("within-subject scores both directions for every subject") {
  auto f = make_fixture(10, 0.05, 0.0, 42);
  const auto report = eval::within_subject(f.models, f.runs, f.targets);
  CHECK(report.entries.size() == 20);
  CHECK(report.excluded_count() == 0);
  // Planted shared signal with low noise: strong generalization.
  CHECK(report.mean >= 0.9);
}

TEST_CASE("a model that reproduces the target scores 1.0") {
  auto f = make_fixture(2, 0.0, 0.0, 43, "s", 0.0);
  const auto report = eval::within_subject(f.models, f.runs, f.targets);
  for (const auto& e : report.entries)
    CHECK(e.r == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("within-subject coverage errors list the missing runs") {
  auto f = make_fixture(2, 0.0, 0.0, 44);
  f.models.erase(key("s02", data::RunLabel::Loc2));
  CHECK_THROWS_WITH_AS(eval::within_subject(f.models, f.runs, f.targets),
                       doctest::Contains("s02:Loc2"), ProtocolError);
}

TEST_CASE("pairwise between-subject produces k(k-1) scores") {
  auto f = make_fixture(5, 0.05, 0.3, 45);
  const auto report = eval::pairwise_between(f.models, f.runs, f.targets,
                                             data::RunLabel::Loc1);
  CHECK(report.entries.size() == 5 * 4);

  auto one = make_fixture(1, 0.0, 0.0, 46);
  CHECK_THROWS_AS(eval::pairwise_between(one.models, one.runs, one.targets,
                                         data::RunLabel::Loc1),
                  ProtocolError);
}

TEST_CASE("between-subject scores are below self-fit with subject jitter") {
  auto f = make_fixture(6, 0.05, 0.5, 47);
  const auto self = eval::self_fit(f.models, f.runs, f.targets);
  const auto between = eval::pairwise_between(f.models, f.runs, f.targets,
                                              data::RunLabel::Loc1);
  CHECK(self.mean > between.mean);
}

TEST_CASE("average model equals the mean of the individual outputs") {
  auto f = make_fixture(4, 0.1, 0.2, 48);
  const auto report = eval::average_model_loo(f.models, f.runs, f.targets,
                                              data::RunLabel::Loc1);
  CHECK(report.entries.size() == 4);

  // Recompute the first held-out subject's averaged output by hand.
  const auto held_out = key("s01", data::RunLabel::Loc1);
  const auto& x = f.runs.at(held_out);
  std::vector<double> mean_out(x.rows(), 0.0);
  int n_models = 0;
  for (const auto& [run, model] : f.models) {
    if (run.run_label != data::RunLabel::Loc1 || run.subject_id == "s01")
      continue;
    const auto out = model.apply(x);
    for (std::size_t t = 0; t < out.size(); ++t) mean_out[t] += out[t];
    ++n_models;
  }
  for (double& v : mean_out) v /= n_models;
  const double expect = eval::pearson_r(mean_out, f.targets.at(data::RunLabel::Loc1));
  CHECK(report.entries[0].r == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("identical models make the average equal any single model") {
  auto f = make_fixture(3, 0.0, 0.0, 49);
  // Overwrite every Loc1 model with subject 1's.
  const auto& reference = f.models.at(key("s01", data::RunLabel::Loc1));
  for (auto& [run, model] : f.models)
    if (run.run_label == data::RunLabel::Loc1) model = reference;
  const auto avg = eval::average_model_loo(f.models, f.runs, f.targets,
                                           data::RunLabel::Loc1);
  for (const auto& e : avg.entries) {
    const auto target_run = e.target;  // "sXX:Loc1"
    const auto subject = target_run.substr(0, 3);
    const double single = eval::pearson_r(
        reference.apply(f.runs.at(key(subject, data::RunLabel::Loc1))),
        f.targets.at(data::RunLabel::Loc1));
    CHECK(e.r == doctest::Approx(single).epsilon(1e-12));
  }
}

TEST_CASE("validation rejects overlap and empty sets, then scores") {
  auto modelled = make_fixture(4, 0.05, 0.2, 50);
  auto validation = make_fixture(2, 0.05, 0.2, 51, "v");

  const auto [pairwise, averaged] = eval::apply_to_validation(
      modelled.models, validation.runs, modelled.targets);
  // 4 models x 2 validation subjects per label, both labels present.
  CHECK(pairwise.entries.size() == 4 * 2 * 2);
  // One averaged score per validation run.
  CHECK(averaged.entries.size() == validation.runs.size());

  CHECK_THROWS_AS(
      eval::apply_to_validation(modelled.models, {}, modelled.targets),
      ProtocolError);
  CHECK_THROWS_AS(eval::apply_to_validation(modelled.models, modelled.runs,
                                            modelled.targets),
                  ProtocolError);
}

TEST_CASE("constant model output is excluded, not imputed") {
  auto f = make_fixture(2, 0.05, 0.0, 52);
  eval::Model constant;
  constant.impl = gp::parse_sexpr("2.5");
  f.models.at(key("s01", data::RunLabel::Loc1)) = constant;
  const auto report = eval::self_fit(f.models, f.runs, f.targets);
  CHECK(report.excluded_count() == 1);
  CHECK(report.entries.size() == 4);
  for (const auto& e : report.entries)
    if (e.source == "s01:Loc1") CHECK(e.excluded);
}

TEST_CASE("reports round-trip through CSV") {
  auto f = make_fixture(3, 0.1, 0.1, 53);
  auto report = eval::within_subject(f.models, f.runs, f.targets);
  const auto path =
      (std::filesystem::temp_directory_path() / "rr_report.csv").string();
  eval::save_report(report, path);
  const auto back = eval::load_report(path);
  CHECK(back.protocol == report.protocol);
  REQUIRE(back.entries.size() == report.entries.size());
  for (std::size_t i = 0; i < back.entries.size(); ++i) {
    CHECK(back.entries[i].source == report.entries[i].source);
    CHECK(back.entries[i].r == report.entries[i].r);
  }
  CHECK(back.mean == doctest::Approx(report.mean).epsilon(1e-15));
  CHECK(back.sd == doctest::Approx(report.sd).epsilon(1e-15));
}

TEST_CASE("report statistics recompute from the stored scores") {
  eval::EvalReport r;
  r.entries.push_back({"a", "b", 0.5, false});
  r.entries.push_back({"a", "c", 0.7, false});
  r.entries.push_back({"a", "d", 0.0, true});  // excluded
  r.finalize();
  CHECK(r.mean == doctest::Approx(0.6));
  CHECK(r.sd == doctest::Approx(std::sqrt(0.02)).epsilon(1e-12));
  CHECK(r.scores().size() == 2);
  for (const auto& e : r.entries) {
    if (e.excluded) continue;
    CHECK(e.r >= -1.0);
    CHECK(e.r <= 1.0);
  }
}

TEST_CASE("resting overfit: unreachable target yields near-zero linear R") {
  Rng rng(54);
  const std::size_t T = 60, N = 4;
  std::vector<double> values(T * N);
  for (double& v : values) v = rng.normal();
  const data::RoiMatrix x(values, T, N, 1.0);

  // Orthogonalize a random target against span(1, X): the least-squares
  // residual is orthogonal to every centered column by construction.
  std::vector<double> y(T);
  for (double& v : y) v = rng.normal();
  const auto ls = ridge::fit_ridge(x, y, 0.0);
  const auto fitted = ridge::predict_linear(ls, x);
  for (std::size_t t = 0; t < T; ++t) y[t] -= fitted[t];

  const auto m = ridge::fit_ridge(x, y, 1e6);
  const double r = eval::pearson_r(ridge::predict_linear(m, x), y);
  CHECK(std::fabs(r) < 1e-6);
}

TEST_CASE("resting overfit fits both families and reports finite scores") {
  const auto rest = synth::resting_noise(6, 60, 1.0, 55);
  Rng trng(56);
  std::vector<double> target(60);
  for (std::size_t t = 0; t < 60; ++t) target[t] = std::sin(0.3 * t) + 1.0;

  gp::GpConfig cfg;
  cfg.subpopulations = 3;
  cfg.pop_per_island = 41;
  cfg.migrations = 5;
  cfg.generations_per_migration = 60;
  cfg.rng_seed = 5;
  const auto fit = eval::resting_overfit(rest, target, 1.0, cfg, 1);
  CHECK(std::fabs(fit.r_linear) <= 1.0);
  CHECK(std::fabs(fit.r_gp) <= 1.0);
}

}  // TEST_SUITE
