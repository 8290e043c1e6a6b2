#include "lfi/simulators.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "lfi/numerics.hpp"

namespace lfi::simulators {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kCovFloor = 1e-6;

Eigen::Matrix2d toy_covariance(const Eigen::VectorXd& theta) {
  const double s1 = theta(2) * theta(2);
  const double s2 = theta(3) * theta(3);
  const double rho = std::tanh(theta(4));
  Eigen::Matrix2d cov;
  cov << s1 * s1, rho * s1 * s2, rho * s1 * s2, s2 * s2;
  cov += kCovFloor * Eigen::Matrix2d::Identity();
  return cov;
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

// mean, log(var+1), lag-1/2 autocorrelation for one series
void species_stats(const std::vector<double>& y, double* out) {
  const size_t n = y.size();
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  out[0] = mean;
  out[1] = std::log(var + 1.0);
  for (int lag = 1; lag <= 2; ++lag) {
    double ac = 0.0;
    if (var > 0.0 && n > static_cast<size_t>(lag)) {
      for (size_t t = 0; t + lag < n; ++t) ac += (y[t] - mean) * (y[t + lag] - mean);
      ac /= static_cast<double>(n - lag) * var;
    }
    out[1 + lag] = ac;
  }
}

}  // namespace

double BoxUniformPrior::log_prob(const Eigen::VectorXd& theta) const {
  if (theta.size() != lower.size()) throw std::domain_error("prior: dimension mismatch");
  double lp = 0.0;
  for (int i = 0; i < lower.size(); ++i) {
    if (theta(i) < lower(i) || theta(i) > upper(i)) return kNegInf;
    lp -= std::log(upper(i) - lower(i));
  }
  return lp;
}

Eigen::VectorXd BoxUniformPrior::sample(Rng& rng) const {
  Eigen::VectorXd theta(lower.size());
  for (int i = 0; i < lower.size(); ++i) theta(i) = rng.uniform(lower(i), upper(i));
  return theta;
}

bool BoxUniformPrior::contains(const Eigen::VectorXd& theta) const {
  return log_prob(theta) != kNegInf;
}

Eigen::VectorXd gaussian_toy_simulate(const Eigen::VectorXd& theta, Rng& rng) {
  if (theta.size() != 5) throw std::domain_error("gaussian_toy: theta must be 5-dimensional");
  const Eigen::Vector2d mean(theta(0), theta(1));
  const Eigen::MatrixXd l = numerics::cholesky(toy_covariance(theta));
  Eigen::VectorXd x(8);
  for (int d = 0; d < 4; ++d) {
    const Eigen::Vector2d z(rng.normal(), rng.normal());
    x.segment<2>(2 * d) = mean + l * z;
  }
  return x;
}

double gaussian_toy_loglik(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) {
  if (theta.size() != 5 || x.size() != 8) throw std::domain_error("gaussian_toy: bad dimensions");
  const Eigen::Vector2d mean(theta(0), theta(1));
  const Eigen::MatrixXd l = numerics::cholesky(toy_covariance(theta));
  const double logdet = std::log(l(0, 0)) + std::log(l(1, 1));
  double lp = 0.0;
  for (int d = 0; d < 4; ++d) {
    const Eigen::Vector2d diff = x.segment<2>(2 * d) - mean;
    const Eigen::Vector2d z = l.triangularView<Eigen::Lower>().solve(diff);
    lp += -0.5 * z.squaredNorm() - logdet - std::log(2.0 * M_PI);
  }
  return lp;
}

PopulationSeries gillespie_lv(const Eigen::VectorXd& log_rates, Rng& rng,
                              const GillespieConfig& cfg) {
  if (log_rates.size() != 4) throw std::domain_error("gillespie_lv: theta must be 4-dimensional");
  const double r1 = std::exp(log_rates(0));  // predator birth, X*Y
  const double r2 = std::exp(log_rates(1));  // predator death, X
  const double r3 = std::exp(log_rates(2));  // prey birth, Y
  const double r4 = std::exp(log_rates(3));  // prey death by predation, X*Y

  double x = cfg.predators0, y = cfg.prey0;
  double t = 0.0;
  long events = 0;

  PopulationSeries s;
  const size_t grid = static_cast<size_t>(std::floor(cfg.duration / cfg.step + 0.5)) + 1;
  s.times.reserve(grid);
  s.predators.reserve(grid);
  s.prey.reserve(grid);

  // grid times computed by index to avoid accumulation drift
  size_t rec = 0;
  auto record_until = [&](double limit) {
    while (rec < grid && static_cast<double>(rec) * cfg.step <= limit + 1e-12) {
      s.times.push_back(static_cast<double>(rec) * cfg.step);
      s.predators.push_back(x);
      s.prey.push_back(y);
      ++rec;
    }
  };

  while (t < cfg.duration) {
    const double a1 = r1 * x * y, a2 = r2 * x, a3 = r3 * y, a4 = r4 * x * y;
    const double total = a1 + a2 + a3 + a4;
    if (total <= 0.0) {
      record_until(cfg.duration);
      break;
    }
    const double dt = rng.exponential(total);
    if (t + dt > cfg.duration) {
      record_until(cfg.duration);
      break;
    }
    record_until(t + dt - 1e-12);
    t += dt;
    const double u = rng.uniform() * total;
    if (u < a1)
      x += 1.0;
    else if (u < a1 + a2)
      x -= 1.0;
    else if (u < a1 + a2 + a3)
      y += 1.0;
    else
      y -= 1.0;
    if (++events >= cfg.event_cap) {
      s.truncated = true;
      break;
    }
  }
  if (s.times.empty()) {  // cap hit before the first grid point
    s.times.push_back(0.0);
    s.predators.push_back(cfg.predators0);
    s.prey.push_back(cfg.prey0);
  }
  return s;
}

Eigen::VectorXd lv_summaries(const PopulationSeries& series) {
  if (series.times.empty()) throw std::domain_error("lv_summaries: empty series");
  Eigen::VectorXd out(9);
  species_stats(series.predators, out.data());
  species_stats(series.prey, out.data() + 4);

  // cross-correlation
  const size_t n = series.times.size();
  double mx = out(0), my = out(4);
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = series.predators[i] - mx, dy = series.prey[i] - my;
    cov += dx * dy;
    vx += dx * dx;
    vy += dy * dy;
  }
  out(8) = (vx > 0.0 && vy > 0.0) ? cov / std::sqrt(vx * vy) : 0.0;
  return out;
}

Eigen::VectorXd mg1_simulate(const Eigen::VectorXd& theta, Rng& rng, const Mg1Config& cfg) {
  if (theta.size() != 3) throw std::domain_error("mg1: theta must be 3-dimensional");
  const double smin = theta(0), smax = theta(1), rate = theta(2);
  if (smin < 0.0 || smax < smin || rate <= 0.0)
    throw std::domain_error("mg1: need 0 <= service min <= service max and arrival rate > 0");

  std::vector<double> inter(cfg.customers);
  double arrival = 0.0, departure = 0.0, prev_departure = 0.0;
  for (int i = 0; i < cfg.customers; ++i) {
    arrival += rng.exponential(rate);
    const double service = rng.uniform(smin, smax);
    departure = service + std::max(departure, arrival);
    inter[i] = departure - prev_departure;
    prev_departure = departure;
  }

  Eigen::VectorXd q(5);
  for (int i = 0; i < 5; ++i) q(i) = percentile(inter, 0.25 * i);
  return q;
}

SimTask make_task(const std::string& name) {
  SimTask task;
  task.name = name;
  if (name == "gaussian_toy") {
    task.theta_dim = 5;
    task.x_dim = 8;
    task.prior.lower = Eigen::VectorXd::Constant(5, -3.0);
    task.prior.upper = Eigen::VectorXd::Constant(5, 3.0);
    task.true_theta = Eigen::VectorXd(5);
    task.true_theta << 0.7, -2.9, -1.0, -0.9, 0.6;
    task.simulate = [](const Eigen::VectorXd& theta, Rng& rng) {
      return gaussian_toy_simulate(theta, rng);
    };
  } else if (name == "lotka_volterra") {
    task.theta_dim = 4;
    task.x_dim = 9;
    task.prior.lower = Eigen::VectorXd::Constant(4, -5.0);
    task.prior.upper = Eigen::VectorXd::Constant(4, 2.0);
    task.true_theta = Eigen::VectorXd(4);
    task.true_theta << std::log(0.01), std::log(0.5), std::log(1.0), std::log(0.01);
    task.simulate = [](const Eigen::VectorXd& theta, Rng& rng) {
      return lv_summaries(gillespie_lv(theta, rng, GillespieConfig{}));
    };
  } else if (name == "mg1") {
    task.theta_dim = 3;
    task.x_dim = 5;
    task.prior.lower = Eigen::VectorXd::Zero(3);
    task.prior.upper = Eigen::VectorXd(3);
    task.prior.upper << 10.0, 10.0, 1.0 / 3.0;
    // box coordinates (service min, span, rate); raw (1, 5, 0.2)
    task.true_theta = Eigen::VectorXd(3);
    task.true_theta << 1.0, 4.0, 0.2;
    task.simulate = [](const Eigen::VectorXd& theta, Rng& rng) {
      Eigen::VectorXd raw(3);
      // the rate = 0 box face is inside the prior's support closure but
      // degenerate for the queue; nudge it strictly positive
      raw << theta(0), theta(0) + theta(1), std::max(theta(2), 1e-3);
      return mg1_simulate(raw, rng, Mg1Config{});
    };
  } else {
    throw std::domain_error("unknown task: " + name);
  }
  return task;
}

void observe(SimTask& task, std::uint64_t seed) {
  Rng rng(splitmix64(seed));
  task.x0 = task.simulate(task.true_theta, rng);
}

}  // namespace lfi::simulators
