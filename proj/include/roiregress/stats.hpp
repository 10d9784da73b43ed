#pragma once

#include <vector>

namespace roiregress::stats {

struct TTestResult {
  enum class Kind { TwoSampleWelch, OneSample };
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
  Kind kind = Kind::TwoSampleWelch;
};

// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of
// freedom. Each sample needs length >= 2 and nonzero variance.
TTestResult ttest_two_sample(const std::vector<double>& a,
                             const std::vector<double>& b);

// t = (mean - mu) / (s / sqrt(n)), df = n - 1.
TTestResult ttest_one_sample(const std::vector<double>& a, double mu);

// Student-t distribution function via the regularized incomplete beta
// function (continued-fraction evaluation); no statistics library involved.
double student_t_cdf(double t, double df);
double incomplete_beta(double a, double b, double x);

}  // namespace roiregress::stats
