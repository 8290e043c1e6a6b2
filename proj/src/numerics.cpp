#include "lfi/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace lfi::numerics {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void validate(std::span<const double> a) {
  if (a.empty()) throw std::domain_error("log-sample vector is empty");
  for (double v : a) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw std::invalid_argument("log-sample entries must be finite or -inf");
  }
}

}  // namespace

double log_sum_exp(std::span<const double> a) {
  validate(a);
  const double m = *std::max_element(a.begin(), a.end());
  if (m == kNegInf) return kNegInf;  // all terms are exp(-inf) = 0
  double sum = 0.0;
  for (double v : a) sum += std::exp(v - m);
  return m + std::log(sum);
}

double log_mean_exp(std::span<const double> a) {
  validate(a);
  return log_sum_exp(a) - std::log(static_cast<double>(a.size()));
}

double log_var_exp(std::span<const double> a) {
  validate(a);
  const size_t k = a.size();
  if (k < 2) throw std::domain_error("log_var_exp needs at least 2 samples");

  // All-equal samples have zero variance exactly; the log1p path would
  // otherwise see rounding noise from b = log_mean_exp.
  if (std::all_of(a.begin(), a.end(), [&](double v) { return v == a[0]; })) return kNegInf;

  const double b = log_mean_exp(a);
  if (b == kNegInf) return kNegInf;  // every sample is exp(-inf) = 0

  // log V[e^a] = log E[exp(2 log|e^a - e^b|)] with b = log E[e^a].
  // log|e^a - e^b| = max(a,b) + log1p(-exp(min - max)), symmetric in
  // which of a, b is larger.
  std::vector<double> terms(k);
  bool degenerate = true;
  for (size_t i = 0; i < k; ++i) {
    const double hi = std::max(a[i], b);
    const double lo = std::min(a[i], b);
    if (hi == lo) {
      terms[i] = kNegInf;  // e^a - e^b == 0
      continue;
    }
    if (hi == kNegInf) {
      terms[i] = kNegInf;
      continue;
    }
    degenerate = false;
    terms[i] = 2.0 * (hi + std::log1p(-std::exp(lo - hi)));
  }
  if (degenerate) return kNegInf;
  return log_mean_exp(terms);
}

Eigen::MatrixXd cholesky(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw std::domain_error("cholesky: matrix not square");
  const Eigen::Index m = a.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0)) throw std::domain_error("cholesky: matrix not positive definite");
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < m; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  return l;
}

}  // namespace lfi::numerics
