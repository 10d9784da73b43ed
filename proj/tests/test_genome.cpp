#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "roiregress/errors.hpp"
#include "roiregress/genome.hpp"
#include "roiregress/gp.hpp"
#include "roiregress/rng.hpp"

using namespace roiregress;
using gp::ExpressionGenome;
using gp::Node;
using gp::Op;

namespace {

ExpressionGenome from_text(const std::string& text) {
  return gp::parse_sexpr(text);
}

data::RoiMatrix tiny_matrix() {
  // 5 rows x 4 cols, values t*10 + j.
  std::vector<double> values;
  for (int t = 0; t < 5; ++t)
    for (int j = 0; j < 4; ++j) values.push_back(t * 10.0 + j);
  return data::RoiMatrix(values, 5, 4, 1.0);
}

}  // namespace

TEST_SUITE("genome") {

TEST_CASE("basic arithmetic evaluation") {
  CHECK(gp::eval_genome(from_text("(+ x0 x1)"), {2.0, 3.0}) == 5.0);
  CHECK(gp::eval_genome(from_text("(- x0 x1)"), {2.0, 3.0}) == -1.0);
  CHECK(gp::eval_genome(from_text("(* x0 0.5)"), {8.0}) == 4.0);
  CHECK(gp::eval_genome(from_text("(sin x0)"), {0.0}) == 0.0);
  CHECK(gp::eval_genome(from_text("(abs x0)"), {-3.0}) == 3.0);
}

TEST_CASE("protected division returns 1 on tiny denominators") {
  CHECK(gp::eval_genome(from_text("(/ x0 x1)"), {1.0, 0.0}) == 1.0);
  CHECK(gp::eval_genome(from_text("(/ x0 x1)"), {1.0, 1e-13}) == 1.0);
  CHECK(gp::eval_genome(from_text("(/ x0 x1)"), {6.0, 2.0}) == 3.0);
}

TEST_CASE("exp clamps its argument") {
  const double v = gp::eval_genome(from_text("(exp x0)"), {1000.0});
  CHECK(v == std::exp(700.0));
  CHECK(std::isfinite(v));
  CHECK(gp::eval_genome(from_text("(exp x0)"), {-1000.0}) == std::exp(-700.0));
}

TEST_CASE("tan output is clamped and overflow sanitizes to zero") {
  const double t = gp::eval_genome(from_text("(tan x0)"), {1.5707963267948966});
  CHECK(std::fabs(t) <= 1e12);
  // 1e308 * 1e308 overflows; the protected product is 0.
  CHECK(gp::eval_genome(from_text("(* x0 x0)"), {1e308}) == 0.0);
}

TEST_CASE("eval_series reconstructs per-row outputs") {
  const auto x = tiny_matrix();

  const auto constant = from_text("3");
  for (double v : gp::eval_series(constant, x)) CHECK(v == 3.0);

  const auto col2 = gp::eval_series(from_text("x2"), x);
  for (std::size_t t = 0; t < x.rows(); ++t) CHECK(col2[t] == x.at(t, 2));

  CHECK_THROWS_AS(gp::eval_series(from_text("x9"), x), ShapeError);
}

TEST_CASE("row permutation permutes outputs identically") {
  const auto x = tiny_matrix();
  const auto g = from_text("(+ (sin x0) (* x3 x1))");
  const auto out = gp::eval_series(g, x);
  // Reverse the rows.
  std::vector<double> rev;
  for (int t = 4; t >= 0; --t)
    for (std::size_t j = 0; j < 4; ++j) rev.push_back(x.at(t, j));
  const auto out_rev = gp::eval_series(g, data::RoiMatrix(rev, 5, 4, 1.0));
  for (std::size_t t = 0; t < 5; ++t) CHECK(out[t] == out_rev[4 - t]);
}

TEST_CASE("mse examples") {
  CHECK(gp::mse({1.0, 2.0}, {1.0, 2.0}) == 0.0);
  CHECK(gp::mse({0.0, 0.0}, {1.0, 1.0}) == 1.0);
  CHECK(gp::mse({1.0, 2.0, 3.0}, {2.0, 4.0, 3.0}) ==
        doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(gp::mse({1.0}, {1.0, 2.0}), ShapeError);
}

TEST_CASE("validate rejects broken graphs") {
  ExpressionGenome g;
  g.nodes.push_back(Node::variable(0));
  g.nodes.push_back(Node::function(Op::Add, 1, 0));  // self-reference
  g.output_node = 1;
  CHECK_THROWS_AS(g.validate(), ParamError);

  ExpressionGenome big;
  for (int i = 0; i < 141; ++i) big.nodes.push_back(Node::constant(1.0));
  big.output_node = 140;
  CHECK_THROWS_AS(big.validate(), ParamError);
}

TEST_CASE("serialization round-trips plain trees") {
  Rng rng(21);
  gp::GpConfig cfg;
  cfg.n_variables = 4;
  const auto x = tiny_matrix();
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = gp::random_genome(cfg, rng);
    const auto text = gp::to_sexpr(g);
    const auto back = gp::parse_sexpr(text);
    back.validate();
    const auto a = gp::eval_series(g, x);
    const auto b = gp::eval_series(back, x);
    for (std::size_t t = 0; t < a.size(); ++t) CHECK(a[t] == b[t]);
  }
}

TEST_CASE("shared graphs serialize as let-forms and round-trip") {
  // Chain of squarings: tree expansion would be astronomically large.
  ExpressionGenome g;
  g.nodes.push_back(Node::variable(0));
  for (int i = 1; i <= 60; ++i)
    g.nodes.push_back(Node::function(Op::Mul, static_cast<std::uint16_t>(i - 1),
                                     static_cast<std::uint16_t>(i - 1)));
  g.output_node = 60;
  g.validate();

  const auto text = gp::to_sexpr(g);
  CHECK(text.rfind("(let ", 0) == 0);
  const auto back = gp::parse_sexpr(text);
  back.validate();
  CHECK(back.nodes.size() == g.nodes.size());
  for (double v : {0.5, 0.999, 1.0, -1.2}) {
    const double row[1] = {v};
    CHECK(gp::eval_genome(g, row, 1) == gp::eval_genome(back, row, 1));
  }
}

TEST_CASE("parser accepts word aliases and rejects junk") {
  CHECK(gp::eval_genome(from_text("(mul x0 2)"), {3.0}) == 6.0);
  CHECK(gp::eval_genome(from_text("(add x0 (div x0 x0))"), {4.0}) == 5.0);
  CHECK_THROWS_AS(gp::parse_sexpr("(bogus x0)"), FormatError);
  CHECK_THROWS_AS(gp::parse_sexpr("(+ x0"), FormatError);
  CHECK_THROWS_AS(gp::parse_sexpr("(+ x0 x1) trailing"), FormatError);
  CHECK_THROWS_AS(gp::parse_sexpr("t0"), FormatError);
}

TEST_CASE("genome files round-trip through disk") {
  const auto g = from_text("(+ (* x3 0.5) (sin x7))");
  const auto path = (std::filesystem::temp_directory_path() / "rr_genome.txt").string();
  gp::save_genome(g, path);
  const auto back = gp::load_genome(path);
  CHECK(gp::structurally_equal(g, back));
}

TEST_CASE("totality fuzz: finite output for every finite input") {
  Rng rng(1234);
  gp::GpConfig cfg;
  cfg.n_variables = 6;
  const double exotic[] = {0.0,   1.0,    -1.0,   1e-300, -1e-300, 1e300,
                           -1e300, 3.14159, -700.0, 700.0,  1e12,   -1e12};
  int evaluated = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    const auto g = gp::random_genome(cfg, rng);
    double row[6];
    for (double& v : row)
      v = rng.chance(0.25) ? exotic[rng.index(std::size(exotic))]
                           : rng.normal(0.0, 100.0);
    const double out = gp::eval_genome(g, row, 6);
    ++evaluated;
    REQUIRE(std::isfinite(out));
  }
  CHECK(evaluated == 20000);
}

}  // TEST_SUITE
