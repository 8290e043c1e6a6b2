#ifndef LFI_NUMERICS_HPP
#define LFI_NUMERICS_HPP

#include <Eigen/Dense>
#include <span>

namespace lfi::numerics {

// log Sum_k exp(a_k). Entries may be -inf (ignored); +inf and NaN are
// invalid. Throws std::domain_error on empty input.
double log_sum_exp(std::span<const double> a);

// log (1/K) Sum_k exp(a_k), the Monte Carlo estimate of log E[exp a].
double log_mean_exp(std::span<const double> a);

// Stable estimate of log V[exp a] from log-samples. Uses the population
// variance (divide by K). All-equal input is degenerate and returns
// -inf; K < 2 throws std::domain_error.
double log_var_exp(std::span<const double> a);

inline double log_sum_exp(const Eigen::VectorXd& a) {
  return log_sum_exp(std::span<const double>(a.data(), static_cast<size_t>(a.size())));
}
inline double log_mean_exp(const Eigen::VectorXd& a) {
  return log_mean_exp(std::span<const double>(a.data(), static_cast<size_t>(a.size())));
}
inline double log_var_exp(const Eigen::VectorXd& a) {
  return log_var_exp(std::span<const double>(a.data(), static_cast<size_t>(a.size())));
}

// Lower-triangular Cholesky factor of a symmetric positive-definite
// matrix. Throws std::domain_error if a pivot is not strictly positive.
Eigen::MatrixXd cholesky(const Eigen::MatrixXd& a);

}  // namespace lfi::numerics

#endif
