#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lfi/mdn.hpp"
#include "lfi/numerics.hpp"
#include "lfi/rng.hpp"

using namespace lfi;
using namespace lfi::mdn;

namespace {

Eigen::VectorXd random_weights(const MdnArchitecture& arch, Rng& rng, double scale = 0.5) {
  Eigen::VectorXd w(arch.param_count());
  for (int i = 0; i < w.size(); ++i) w(i) = scale * rng.normal();
  return w;
}

}  // namespace

TEST_CASE("parameter count formula") {
  MdnArchitecture a{.input_dim = 4, .output_dim = 9, .hidden_units = 50, .components = 5};
  const int tri = 9 * 10 / 2;
  CHECK(a.param_count() == (4 + 1) * 50 + (50 + 1) * (5 + 5 * 9 + 5 * tri));
}

TEST_CASE("forward with all-zero weights") {
  MdnArchitecture a{.input_dim = 3, .output_dim = 2, .hidden_units = 10, .components = 5};
  const Eigen::VectorXd w = Eigen::VectorXd::Zero(a.param_count());
  const MixtureParams mix = forward(a, w, Eigen::VectorXd::Ones(3));
  for (int c = 0; c < 5; ++c) {
    CHECK(mix.mixing(c) == doctest::Approx(0.2));
    CHECK(mix.means[c].cwiseAbs().maxCoeff() == 0.0);
    CHECK((mix.scales[c] - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("forward properties over random weights") {
  MdnArchitecture a{.input_dim = 4, .output_dim = 9, .hidden_units = 20, .components = 5};
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::VectorXd w = random_weights(a, rng);
    Eigen::VectorXd x(4);
    for (int i = 0; i < 4; ++i) x(i) = rng.normal();
    const MixtureParams mix = forward(a, w, x);
    CHECK(mix.mixing.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mix.mixing.minCoeff() >= 0.0);
    for (int c = 0; c < 5; ++c) CHECK(mix.scales[c].diagonal().minCoeff() > 0.0);
  }
  // determinism: identical (w, input) -> bitwise identical outputs
  const Eigen::VectorXd w = random_weights(a, rng);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(4, 0.3);
  const MixtureParams m1 = forward(a, w, x);
  const MixtureParams m2 = forward(a, w, x);
  CHECK((m1.mixing - m2.mixing).cwiseAbs().maxCoeff() == 0.0);
  for (int c = 0; c < 5; ++c)
    CHECK((m1.scales[c] - m2.scales[c]).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(forward(a, w, Eigen::VectorXd::Zero(3)), std::domain_error);
}

TEST_CASE("log_prob standard normal and mixture collapse") {
  MixtureParams single;
  single.mixing = Eigen::VectorXd::Ones(1);
  single.means = {Eigen::VectorXd::Zero(1)};
  single.scales = {Eigen::MatrixXd::Identity(1, 1)};
  CHECK(log_prob(single, Eigen::VectorXd::Zero(1)) ==
        doctest::Approx(-0.5 * std::log(2.0 * M_PI)));

  MixtureParams twin;
  twin.mixing = Eigen::VectorXd::Constant(2, 0.5);
  twin.means = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
  twin.scales = {Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1)};
  Eigen::VectorXd q(1);
  q << 0.37;
  CHECK(log_prob(twin, q) == doctest::Approx(log_prob(single, q)));
}

TEST_CASE("log_prob component permutation invariance and log_density consistency") {
  MdnArchitecture a{.input_dim = 2, .output_dim = 3, .hidden_units = 8, .components = 4};
  Rng rng(17);
  const Eigen::VectorXd w = random_weights(a, rng);
  Eigen::VectorXd x(2), t(3);
  for (int i = 0; i < 2; ++i) x(i) = rng.normal();
  for (int i = 0; i < 3; ++i) t(i) = rng.normal();

  MixtureParams mix = forward(a, w, x);
  const double lp = log_prob(mix, t);
  CHECK(log_density(a, w, x, t) == doctest::Approx(lp).epsilon(1e-14));

  // permute components
  std::swap(mix.means[0], mix.means[2]);
  std::swap(mix.scales[0], mix.scales[2]);
  std::swap(mix.mixing(0), mix.mixing(2));
  CHECK(log_prob(mix, t) == doctest::Approx(lp).epsilon(1e-14));
}

TEST_CASE("sample moments and component frequencies") {
  Rng rng(23);
  MixtureParams mix;
  mix.mixing = Eigen::VectorXd(3);
  mix.mixing << 0.5, 0.3, 0.2;
  mix.means = {Eigen::VectorXd::Constant(2, -2.0), Eigen::VectorXd::Constant(2, 0.0),
               Eigen::VectorXd::Constant(2, 3.0)};
  Eigen::MatrixXd s(2, 2);
  s << 0.5, 0.0, 0.2, 0.7;
  mix.scales = {s, s, s};

  const int n = 100000;
  Eigen::VectorXd mean_acc = Eigen::VectorXd::Zero(2);
  for (int i = 0; i < n; ++i) mean_acc += sample(mix, rng);
  mean_acc /= n;
  // mixture mean = 0.5*(-2) + 0.3*0 + 0.2*3 = -0.4 in each dim; second
  // moment per dim ~ E[mu^2] + var: generous 4 sigma band
  const double mix_mean = -0.4;
  const double var = 0.5 * 4 + 0.2 * 9 - mix_mean * mix_mean + 0.54;
  const double band = 4.0 * std::sqrt(var / n);
  CHECK(std::abs(mean_acc(0) - mix_mean) < band);
  CHECK(std::abs(mean_acc(1) - mix_mean) < band);

  // component frequencies: means are well separated, classify by nearest
  Rng rng2(29);
  Eigen::Vector3d counts = Eigen::Vector3d::Zero();
  const int m = 30000;
  for (int i = 0; i < m; ++i) {
    const Eigen::VectorXd v = sample(mix, rng2);
    const double c0 = (v - mix.means[0]).norm(), c1 = (v - mix.means[1]).norm(),
                 c2 = (v - mix.means[2]).norm();
    if (c0 < c1 && c0 < c2)
      counts(0)++;
    else if (c1 < c2)
      counts(1)++;
    else
      counts(2)++;
  }
  double chi2 = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double expected = mix.mixing(c) * m;
    chi2 += (counts(c) - expected) * (counts(c) - expected) / expected;
  }
  CHECK(chi2 < 9.21);  // chi-square(2) at p = 0.01

  // degenerate component: scale -> 0 returns the mean
  MixtureParams point;
  point.mixing = Eigen::VectorXd::Ones(1);
  point.means = {Eigen::VectorXd::Constant(2, 1.5)};
  point.scales = {Eigen::MatrixXd::Zero(2, 2)};
  CHECK((sample(point, rng) - point.means[0]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("log_prob_grad matches central finite differences") {
  MdnArchitecture a{.input_dim = 2, .output_dim = 2, .hidden_units = 2, .components = 2};
  Rng rng(31);
  const Eigen::VectorXd w = random_weights(a, rng, 0.4);
  Eigen::VectorXd x(2), t(2);
  x << 0.3, -0.7;
  t << 0.9, 0.1;

  const Eigen::VectorXd g = log_prob_grad(a, w, x, t);
  const double h = 1e-6;
  for (int i = 0; i < w.size(); ++i) {
    Eigen::VectorXd wp = w, wm = w;
    wp(i) += h;
    wm(i) -= h;
    const double fd = (log_density(a, wp, x, t) - log_density(a, wm, x, t)) / (2 * h);
    CHECK(g(i) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("mixing-logit gradient is zero when K=1") {
  MdnArchitecture a{.input_dim = 2, .output_dim = 2, .hidden_units = 3, .components = 1};
  Rng rng(37);
  const Eigen::VectorXd w = random_weights(a, rng);
  Eigen::VectorXd x(2), t(2);
  x << 1.0, -1.0;
  t << 0.2, 0.4;
  const Eigen::VectorXd g = log_prob_grad(a, w, x, t);
  // logit head occupies the first row of the head block plus its bias
  const int off = a.hidden_params();
  for (int j = 0; j < a.hidden_units; ++j) CHECK(g(off + j) == 0.0);
  CHECK(g(off + a.head_rows() * a.hidden_units) == 0.0);
}

TEST_CASE("log_prob finite for extreme weights") {
  MdnArchitecture a{.input_dim = 2, .output_dim = 2, .hidden_units = 4, .components = 3};
  Rng rng(41);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::VectorXd w = random_weights(a, rng, 20.0);
    Eigen::VectorXd x(2), t(2);
    x << rng.normal(), rng.normal();
    t << rng.normal(), rng.normal();
    const double lp = log_density(a, w, x, t);
    CHECK(!std::isnan(lp));
  }
}

TEST_CASE("mc integral of exp(log_prob) is 1") {
  // importance sampling against a broad gaussian proposal
  MdnArchitecture a{.input_dim = 2, .output_dim = 2, .hidden_units = 6, .components = 5};
  Rng rng(43);
  const Eigen::VectorXd w = random_weights(a, rng, 0.3);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 0.1);
  const MixtureParams mix = forward(a, w, x);

  const double proposal_sd = 6.0;
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd t(2);
    t << proposal_sd * rng.normal(), proposal_sd * rng.normal();
    const double logp_prop = -0.5 * t.squaredNorm() / (proposal_sd * proposal_sd) -
                             std::log(2.0 * M_PI * proposal_sd * proposal_sd);
    const double ratio = std::exp(log_prob(mix, t) - logp_prop);
    sum += ratio;
    sumsq += ratio * ratio;
  }
  const double est = sum / n;
  const double se = std::sqrt((sumsq / n - est * est) / n);
  CHECK(std::abs(est - 1.0) < 4.0 * se + 1e-3);
}
