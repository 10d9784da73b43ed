#pragma once

#include <string>
#include <vector>

#include "roiregress/dataset.hpp"

namespace roiregress::ridge {

// One scaling factor per ROI plus an unpenalized constant term.
struct LinearModel {
  std::vector<double> weights;
  double intercept = 0.0;
  double lambda = 0.0;
  // Set when lambda == 0 met a rank-deficient system and the solver fell
  // back to the minimum-norm least-squares solution.
  bool min_norm_fallback = false;
  // Set when the fit had no more rows than columns.
  bool underdetermined_warning = false;
};

// Minimize ||y - (Xw + b)||^2 + lambda*||w||^2 with b unpenalized: center
// X and y, solve (Xc'Xc + lambda I) w = Xc'yc, then b = mean(y) - mean(x)'w.
LinearModel fit_ridge(const data::RoiMatrix& x, const std::vector<double>& y,
                      double lambda);

// output[t] = intercept + sum_j weights[j] * x[t,j]
std::vector<double> predict_linear(const LinearModel& m,
                                   const data::RoiMatrix& x);

// Generalized cross-validation over a log-spaced lambda grid; returns the
// grid minimizer. Default grid spans 1e-3 .. 1e3 in half-decade steps.
double gcv_lambda(const data::RoiMatrix& x, const std::vector<double>& y,
                  const std::vector<double>& grid = {});

// Text record, versioned header "roiregress-linear v1", 17 significant
// digits throughout; save/load round-trips.
void save_model(const LinearModel& m, const std::string& path);
LinearModel load_model(const std::string& path);

}  // namespace roiregress::ridge
