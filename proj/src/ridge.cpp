#include "roiregress/ridge.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "roiregress/errors.hpp"

namespace roiregress::ridge {

namespace {

Eigen::MatrixXd to_eigen(const data::RoiMatrix& x) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(x.rows()),
                    static_cast<Eigen::Index>(x.cols()));
  for (std::size_t t = 0; t < x.rows(); ++t)
    for (std::size_t j = 0; j < x.cols(); ++j)
      m(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) =
          x.at(t, j);
  return m;
}

}  // namespace

LinearModel fit_ridge(const data::RoiMatrix& x, const std::vector<double>& y,
                      double lambda) {
  if (x.rows() != y.size())
    throw ShapeError("fit_ridge: X has " + std::to_string(x.rows()) +
                     " rows but y has " + std::to_string(y.size()));
  if (lambda < 0.0) throw ParamError("fit_ridge: lambda must be >= 0");

  const auto T = static_cast<Eigen::Index>(x.rows());
  const auto N = static_cast<Eigen::Index>(x.cols());
  Eigen::MatrixXd X = to_eigen(x);
  Eigen::VectorXd Y = Eigen::Map<const Eigen::VectorXd>(y.data(), T);

  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = Y.mean();
  Eigen::MatrixXd Xc = X.rowwise() - x_mean;
  Eigen::VectorXd Yc = Y.array() - y_mean;

  LinearModel model;
  model.lambda = lambda;
  model.underdetermined_warning = T <= N;

  Eigen::VectorXd w;
  if (lambda == 0.0) {
    // Rank check first so collinear columns fall back to the minimum-norm
    // solution instead of an arbitrary one.
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Xc);
    if (cod.rank() < N) {
      w = cod.solve(Yc);
      model.min_norm_fallback = true;
    } else {
      Eigen::MatrixXd gram = Xc.transpose() * Xc;
      w = gram.ldlt().solve(Xc.transpose() * Yc);
    }
  } else {
    Eigen::MatrixXd gram = Xc.transpose() * Xc;
    gram.diagonal().array() += lambda;
    w = gram.llt().solve(Xc.transpose() * Yc);
  }

  model.weights.assign(w.data(), w.data() + N);
  model.intercept = y_mean - x_mean.dot(w);
  for (double v : model.weights)
    if (!std::isfinite(v)) throw ParamError("fit_ridge produced non-finite weights");
  return model;
}

std::vector<double> predict_linear(const LinearModel& m,
                                   const data::RoiMatrix& x) {
  if (x.cols() != m.weights.size())
    throw ShapeError("predict_linear: model has " +
                     std::to_string(m.weights.size()) + " weights but X has " +
                     std::to_string(x.cols()) + " columns");
  std::vector<double> out(x.rows());
  for (std::size_t t = 0; t < x.rows(); ++t) {
    double acc = m.intercept;
    const double* row = x.row(t);
    for (std::size_t j = 0; j < x.cols(); ++j) acc += m.weights[j] * row[j];
    out[t] = acc;
  }
  return out;
}

double gcv_lambda(const data::RoiMatrix& x, const std::vector<double>& y,
                  const std::vector<double>& grid) {
  if (x.rows() != y.size()) throw ShapeError("gcv_lambda: X/y length mismatch");
  std::vector<double> lambdas = grid;
  if (lambdas.empty())
    for (double e = -3.0; e <= 3.0 + 1e-9; e += 0.5)
      lambdas.push_back(std::pow(10.0, e));

  const auto T = static_cast<Eigen::Index>(x.rows());
  Eigen::MatrixXd X = to_eigen(x);
  Eigen::VectorXd Y = Eigen::Map<const Eigen::VectorXd>(y.data(), T);
  Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
  Eigen::VectorXd Yc = Y.array() - Y.mean();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(Xc, Eigen::ComputeThinU);
  const Eigen::VectorXd d = svd.singularValues();
  const Eigen::VectorXd uty = svd.matrixU().transpose() * Yc;
  const double total_ss = Yc.squaredNorm();

  double best_lambda = lambdas.front();
  double best_score = std::numeric_limits<double>::infinity();
  for (double lam : lambdas) {
    if (lam < 0.0) throw ParamError("gcv_lambda: negative lambda in grid");
    // Residual sum of squares and effective dof from the SVD; the intercept
    // contributes one further dof.
    double rss = total_ss;
    double edof = 1.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      const double d2 = d[i] * d[i];
      const double shrink = d2 / (d2 + lam);
      rss -= (2.0 * shrink - shrink * shrink) * uty[i] * uty[i];
      edof += shrink;
    }
    const double denom = static_cast<double>(T) - edof;
    if (denom <= 0.0) continue;
    const double score = static_cast<double>(T) * std::max(rss, 0.0) /
                         (denom * denom);
    if (score < best_score) {
      best_score = score;
      best_lambda = lam;
    }
  }
  return best_lambda;
}

void save_model(const LinearModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  char buf[40];
  out << "roiregress-linear v1\n";
  out << "n " << m.weights.size() << '\n';
  std::snprintf(buf, sizeof buf, "%.17g", m.lambda);
  out << "lambda " << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.17g", m.intercept);
  out << "intercept " << buf << '\n';
  out << "weights";
  for (double w : m.weights) {
    std::snprintf(buf, sizeof buf, "%.17g", w);
    out << ' ' << buf;
  }
  out << '\n';
}

LinearModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::string header;
  std::getline(in, header);
  if (header != "roiregress-linear v1")
    throw FormatError("'" + path + "': not a roiregress-linear v1 file");

  LinearModel m;
  std::size_t n = 0;
  std::string key;
  while (in >> key) {
    if (key == "n") {
      in >> n;
    } else if (key == "lambda") {
      in >> m.lambda;
    } else if (key == "intercept") {
      in >> m.intercept;
    } else if (key == "weights") {
      m.weights.resize(n);
      for (std::size_t j = 0; j < n; ++j)
        if (!(in >> m.weights[j]))
          throw FormatError("'" + path + "': truncated weight list");
    } else {
      throw FormatError("'" + path + "': unknown key '" + key + "'");
    }
  }
  if (m.weights.size() != n)
    throw FormatError("'" + path + "': missing weights record");
  return m;
}

}  // namespace roiregress::ridge
