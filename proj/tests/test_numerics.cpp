#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "lfi/numerics.hpp"
#include "lfi/rng.hpp"

using namespace lfi;
using lfi::numerics::cholesky;
using lfi::numerics::log_mean_exp;
using lfi::numerics::log_sum_exp;
using lfi::numerics::log_var_exp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Independent oracle: exponentiate and take the population variance.
double naive_log_var(const std::vector<double>& a) {
  double mean = 0.0;
  for (double v : a) mean += std::exp(v);
  mean /= static_cast<double>(a.size());
  double var = 0.0;
  for (double v : a) {
    const double d = std::exp(v) - mean;
    var += d * d;
  }
  return std::log(var / static_cast<double>(a.size()));
}

}  // namespace

TEST_CASE("log_sum_exp basics") {
  CHECK(log_sum_exp(std::vector<double>{0.0, 0.0}) == doctest::Approx(std::log(2.0)));
  CHECK(log_sum_exp(std::vector<double>{1e6, 1e6}) == doctest::Approx(1e6 + std::log(2.0)));
  CHECK(log_sum_exp(std::vector<double>{0.0, -kInf}) == doctest::Approx(0.0));
  CHECK(std::isfinite(log_sum_exp(std::vector<double>{1e6, -1e6})));
  CHECK_THROWS_AS(log_sum_exp(std::vector<double>{}), std::domain_error);
  CHECK_THROWS_AS(log_sum_exp(std::vector<double>{0.0, kInf}), std::invalid_argument);
  CHECK_THROWS_AS(log_sum_exp(std::vector<double>{std::nan("")}), std::invalid_argument);
}

TEST_CASE("log_sum_exp shift identity and monotonicity") {
  Rng rng(7);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> a(1 + rng.below(20));
    for (double& v : a) v = rng.uniform(-30.0, 30.0);
    const double base = log_sum_exp(a);
    const double c = rng.uniform(-1e5, 1e5);
    std::vector<double> shifted = a;
    for (double& v : shifted) v += c;
    CHECK(log_sum_exp(shifted) == doctest::Approx(base + c).epsilon(1e-12));

    // permutation invariance (up to summation order)
    std::vector<double> perm = a;
    std::reverse(perm.begin(), perm.end());
    CHECK(log_sum_exp(perm) == doctest::Approx(base).epsilon(1e-14));

    // monotone in every entry; a bump to a negligible entry may vanish
    // in rounding, so non-strict for arbitrary entries and strict for
    // the dominant one
    std::vector<double> bumped = a;
    bumped[rng.below(bumped.size())] += 0.5;
    CHECK(log_sum_exp(bumped) >= base);
    std::vector<double> top = a;
    *std::max_element(top.begin(), top.end()) += 0.5;
    CHECK(log_sum_exp(top) > base);
  }
}

TEST_CASE("log_mean_exp") {
  CHECK(log_mean_exp(std::vector<double>{std::log(2.0), std::log(4.0)}) ==
        doctest::Approx(std::log(3.0)));
  CHECK(log_mean_exp(std::vector<double>{-3.7}) == doctest::Approx(-3.7));
  CHECK(log_mean_exp(std::vector<double>{0.0, 0.0, 0.0, 0.0}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(log_mean_exp(std::vector<double>{}), std::domain_error);

  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> a(1 + rng.below(30));
    for (double& v : a) v = rng.uniform(-5.0, 5.0);
    CHECK(log_mean_exp(a) <= log_sum_exp(a));
  }
}

TEST_CASE("log_var_exp matches naive oracle at small magnitude") {
  CHECK(log_var_exp(std::vector<double>{std::log(1.0), std::log(3.0)}) ==
        doctest::Approx(0.0).epsilon(1e-12));

  Rng rng(23);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> a(2 + rng.below(100));
    for (double& v : a) v = rng.uniform(-10.0, 10.0);
    const double stable = log_var_exp(a);
    const double naive = naive_log_var(a);
    CHECK(std::exp(stable) ==
          doctest::Approx(std::exp(naive)).epsilon(1e-9));
  }
}

TEST_CASE("log_var_exp shift identity") {
  Rng rng(29);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> a(2 + rng.below(20));
    for (double& v : a) v = rng.uniform(-3.0, 3.0);
    const double base = log_var_exp(a);
    const double c = rng.uniform(-50.0, 50.0);
    std::vector<double> shifted = a;
    for (double& v : shifted) v += c;
    CHECK(log_var_exp(shifted) == doctest::Approx(base + 2.0 * c).epsilon(1e-10));
  }
}

TEST_CASE("log_var_exp edge cases") {
  CHECK(log_var_exp(std::vector<double>{5.0, 5.0, 5.0}) == -kInf);
  CHECK_THROWS_AS(log_var_exp(std::vector<double>{1.0}), std::domain_error);

  // stays finite at magnitudes where the naive form overflows
  Rng rng(31);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> a(2 + rng.below(20));
    for (double& v : a) v = rng.uniform(-1e4, 1e4);
    const double v = log_var_exp(a);
    CHECK(!std::isnan(v));
    CHECK(v < kInf);
  }
}

TEST_CASE("cholesky") {
  const Eigen::MatrixXd i2 = Eigen::MatrixXd::Identity(2, 2);
  CHECK((cholesky(i2) - i2).cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXd d(2, 2);
  d << 4, 0, 0, 9;
  Eigen::MatrixXd ld = cholesky(d);
  CHECK(ld(0, 0) == doctest::Approx(2.0));
  CHECK(ld(1, 1) == doctest::Approx(3.0));
  CHECK(ld(0, 1) == 0.0);
  CHECK(ld(1, 0) == 0.0);

  Rng rng(37);
  for (int rep = 0; rep < 20; ++rep) {
    const int m = 1 + static_cast<int>(rng.below(6));
    Eigen::MatrixXd mm(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) mm(i, j) = rng.normal();
    const Eigen::MatrixXd spd =
        mm.transpose() * mm + 1e-3 * Eigen::MatrixXd::Identity(m, m);
    const Eigen::MatrixXd l = cholesky(spd);
    CHECK((l * l.transpose() - spd).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(l.diagonal().minCoeff() > 0.0);
  }

  Eigen::MatrixXd npd(2, 2);
  npd << 1, 2, 2, 1;  // eigenvalues 3, -1
  CHECK_THROWS_AS(cholesky(npd), std::domain_error);
}
