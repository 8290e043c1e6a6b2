#ifndef LFI_SIMULATORS_HPP
#define LFI_SIMULATORS_HPP

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "lfi/rng.hpp"

namespace lfi::simulators {

struct BoxUniformPrior {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int dim() const { return static_cast<int>(lower.size()); }
  double log_prob(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd sample(Rng& rng) const;
  bool contains(const Eigen::VectorXd& theta) const;
};

// Gaussian toy: four iid draws from a 2-D Gaussian with mean (t1, t2)
// and covariance from s1 = t3^2, s2 = t4^2, rho = tanh t5, concatenated
// into an 8-vector.
Eigen::VectorXd gaussian_toy_simulate(const Eigen::VectorXd& theta, Rng& rng);

// Exact log-likelihood of the toy simulator output; ground truth for tests.
double gaussian_toy_loglik(const Eigen::VectorXd& theta, const Eigen::VectorXd& x);

struct GillespieConfig {
  double predators0 = 50.0;
  double prey0 = 100.0;
  double duration = 30.0;
  double step = 0.2;
  long event_cap = 1000000;
};

struct PopulationSeries {
  std::vector<double> times;
  std::vector<double> predators;
  std::vector<double> prey;
  bool truncated = false;  // event cap hit; series is partial
};

// Exact stochastic simulation of the predator-prey reactions with rates
// exp(theta): predator birth X*Y, predator death X, prey birth Y, prey
// death by predation X*Y.
PopulationSeries gillespie_lv(const Eigen::VectorXd& log_rates, Rng& rng,
                              const GillespieConfig& cfg);

// 9 summary statistics: per species mean, log(variance + 1), lag-1 and
// lag-2 autocorrelation, plus the cross-correlation between species.
// Zero-variance series yield correlation statistics of 0.
Eigen::VectorXd lv_summaries(const PopulationSeries& series);

struct Mg1Config {
  int customers = 50;
};

// Single-server queue; theta = (service min, service max, arrival rate).
// Returns the 0/25/50/75/100th percentiles of inter-departure times.
Eigen::VectorXd mg1_simulate(const Eigen::VectorXd& theta, Rng& rng, const Mg1Config& cfg);

// One benchmark task. The parameter vector uses box coordinates: for
// mg1 these are (service min, service span, arrival rate) so the prior
// is an axis-aligned box. x0 is filled by simulating at true_theta.
struct SimTask {
  std::string name;
  int theta_dim = 0;
  int x_dim = 0;
  BoxUniformPrior prior;
  Eigen::VectorXd true_theta;
  Eigen::VectorXd x0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, Rng&)> simulate;
};

// name: gaussian_toy | lotka_volterra | mg1. x0 is left empty; call
// observe() to fill it.
SimTask make_task(const std::string& name);

// Simulates at true_theta with a dedicated seed and stores the result
// as task.x0.
void observe(SimTask& task, std::uint64_t seed);

}  // namespace lfi::simulators

#endif
