#include "roiregress/stats.hpp"

#include <cmath>
#include <string>

#include "roiregress/errors.hpp"

namespace roiregress::stats {

namespace {

struct SampleStats {
  double mean = 0.0;
  double var = 0.0;  // sample variance, n-1 divisor
  double n = 0.0;
};

SampleStats describe(const std::vector<double>& a, const char* name) {
  if (a.size() < 2)
    throw ParamError(std::string(name) + " sample needs at least 2 values");
  SampleStats s;
  s.n = static_cast<double>(a.size());
  for (double v : a) s.mean += v;
  s.mean /= s.n;
  for (double v : a) s.var += (v - s.mean) * (v - s.mean);
  s.var /= s.n - 1.0;
  if (!(s.var > 0.0))
    throw ParamError(std::string(name) + " sample has zero variance");
  return s;
}

// Continued fraction for the incomplete beta function (modified Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  return h;  // converged to machine precision for all df of interest
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0))
    throw ParamError("incomplete_beta: a and b must be positive");
  if (x < 0.0 || x > 1.0) throw ParamError("incomplete_beta: x must be in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  // Continued fraction converges fastest below the mean; use symmetry above.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw ParamError("student_t_cdf: df must be positive");
  if (t == 0.0) return 0.5;
  const double x = df / (df + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

namespace {

// Two-sided p without the 1-cdf cancellation: p = I_{df/(df+t^2)}(df/2, 1/2).
double two_sided_p(double t, double df) {
  if (t == 0.0) return 1.0;
  return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

}  // namespace

TTestResult ttest_two_sample(const std::vector<double>& a,
                             const std::vector<double>& b) {
  const SampleStats sa = describe(a, "first");
  const SampleStats sb = describe(b, "second");

  const double va = sa.var / sa.n;
  const double vb = sb.var / sb.n;
  TTestResult r;
  r.kind = TTestResult::Kind::TwoSampleWelch;
  r.t = (sa.mean - sb.mean) / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) /
         (va * va / (sa.n - 1.0) + vb * vb / (sb.n - 1.0));
  r.p = two_sided_p(r.t, r.df);
  return r;
}

TTestResult ttest_one_sample(const std::vector<double>& a, double mu) {
  const SampleStats s = describe(a, "one-sample");
  TTestResult r;
  r.kind = TTestResult::Kind::OneSample;
  r.t = (s.mean - mu) / std::sqrt(s.var / s.n);
  r.df = s.n - 1.0;
  r.p = two_sided_p(r.t, r.df);
  return r;
}

}  // namespace roiregress::stats
