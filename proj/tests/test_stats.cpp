#include <doctest.h>

#include <cmath>
#include <vector>

#include "roiregress/errors.hpp"
#include "roiregress/stats.hpp"

using namespace roiregress;

namespace {

double t_pdf(double x, double df) {
  return std::exp(std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
                  0.5 * std::log(df * 3.14159265358979323846)) *
         std::pow(1.0 + x * x / df, -0.5 * (df + 1.0));
}

double simpson(double a, double b, double df, int n) {
  const double h = (b - a) / n;
  double acc = t_pdf(a, df) + t_pdf(b, df);
  for (int i = 1; i < n; ++i)
    acc += t_pdf(a + i * h, df) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// Quadrature oracle for the two-sided p: p = 1 - 2*int_0^|t| pdf.
double numeric_two_sided_p(double t, double df) {
  if (t == 0.0) return 1.0;
  return 1.0 - 2.0 * simpson(0.0, std::fabs(t), df, 200000);
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("identical samples give t = 0, p = 1") {
  const std::vector<double> a{1.0, 2.0, 3.0, 4.0};
  const auto r = stats::ttest_two_sample(a, a);
  CHECK(r.t == 0.0);
  CHECK(r.p == doctest::Approx(1.0));
}

TEST_CASE("hand-derived Welch case: equal variances, shifted mean") {
  // a = 1..5, b = 2..6: means 3 and 4, both variances 2.5, n = 5 each
  // -> t = -1 exactly, Welch df = 8.
  const std::vector<double> a{1, 2, 3, 4, 5};
  const std::vector<double> b{2, 3, 4, 5, 6};
  const auto r = stats::ttest_two_sample(a, b);
  CHECK(r.t == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(r.df == doctest::Approx(8.0).epsilon(1e-9));
  CHECK(r.p == doctest::Approx(numeric_two_sided_p(-1.0, 8.0)).epsilon(1e-8));
}

TEST_CASE("well-separated samples are extremely significant") {
  const std::vector<double> a{0.0, 0.0001, 0.0, 0.0001, 0.0};
  const std::vector<double> b{10.0, 10.0001, 10.0, 10.0001, 10.0};
  const auto r = stats::ttest_two_sample(a, b);
  CHECK(r.p < 1e-6);
}

TEST_CASE("one-sample basics") {
  const std::vector<double> a{1, 2, 3, 4, 5};
  CHECK(stats::ttest_one_sample(a, 3.0).t == 0.0);
  CHECK(stats::ttest_one_sample(a, 3.0).p == doctest::Approx(1.0));

  // t = (3 - 0) / (sqrt(2.5)/sqrt(5)) = 3*sqrt(2) with df 4.
  const auto r = stats::ttest_one_sample(a, 0.0);
  CHECK(r.t == doctest::Approx(3.0 * std::sqrt(2.0)).epsilon(1e-9));
  CHECK(r.df == 4.0);
  CHECK(r.kind == stats::TTestResult::Kind::OneSample);
}

TEST_CASE("t statistic is antisymmetric, p symmetric") {
  const std::vector<double> a{1.2, 0.8, 1.5, 0.3, 2.2};
  const std::vector<double> b{2.5, 1.9, 3.1, 4.0};
  const auto ab = stats::ttest_two_sample(a, b);
  const auto ba = stats::ttest_two_sample(b, a);
  CHECK(ab.t == doctest::Approx(-ba.t).epsilon(1e-12));
  CHECK(ab.p == doctest::Approx(ba.p).epsilon(1e-12));
}

TEST_CASE("shift invariance") {
  const std::vector<double> a{1.2, 0.8, 1.5, 0.3, 2.2};
  const std::vector<double> b{2.5, 1.9, 3.1, 4.0};
  std::vector<double> a2 = a, b2 = b;
  for (double& v : a2) v += 17.25;
  for (double& v : b2) v += 17.25;
  CHECK(stats::ttest_two_sample(a, b).t ==
        doctest::Approx(stats::ttest_two_sample(a2, b2).t).epsilon(1e-10));
}

TEST_CASE("p matches a quadrature oracle of the t density") {
  for (const double df : {1.0, 4.0, 30.0}) {
    for (const double t : {0.0, 1.0, 2.5}) {
      const double p =
          t == 0.0 ? 1.0
                   : 2.0 * (1.0 - stats::student_t_cdf(std::fabs(t), df));
      CHECK(p == doctest::Approx(numeric_two_sided_p(t, df)).epsilon(1e-8));
      CHECK(stats::student_t_cdf(t, df) + stats::student_t_cdf(-t, df) ==
            doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("degenerate samples are rejected") {
  CHECK_THROWS_AS(stats::ttest_two_sample({1.0}, {1.0, 2.0}), ParamError);
  CHECK_THROWS_AS(stats::ttest_two_sample({1.0, 1.0}, {1.0, 2.0}), ParamError);
  CHECK_THROWS_AS(stats::ttest_one_sample({2.0, 2.0, 2.0}, 0.0), ParamError);
}

TEST_CASE("incomplete beta endpoints and range checks") {
  CHECK(stats::incomplete_beta(2.0, 3.0, 0.0) == 0.0);
  CHECK(stats::incomplete_beta(2.0, 3.0, 1.0) == 1.0);
  CHECK_THROWS_AS(stats::incomplete_beta(0.0, 1.0, 0.5), ParamError);
  CHECK_THROWS_AS(stats::incomplete_beta(1.0, 1.0, 1.5), ParamError);
  // I_x(1,1) = x for the uniform case.
  CHECK(stats::incomplete_beta(1.0, 1.0, 0.37) == doctest::Approx(0.37).epsilon(1e-12));
}

}  // TEST_SUITE
