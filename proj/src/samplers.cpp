#include "lfi/samplers.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "lfi/numerics.hpp"

namespace lfi::samplers {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

// One univariate slice update of coordinate c; returns the new log
// density of the full state.
double slice_update_coord(const LogDensity& target, Eigen::VectorXd& x, int c, double lp,
                          Rng& rng, const SliceConfig& cfg, long& evals) {
  const double logy = lp + std::log(rng.uniform() + 1e-300);
  const double w = cfg.widths(c);
  const double x0 = x(c);

  double lo = x0 - w * rng.uniform();
  double hi = lo + w;
  double lo_bound = -std::numeric_limits<double>::infinity();
  double hi_bound = std::numeric_limits<double>::infinity();
  if (cfg.bounds) {
    lo_bound = cfg.bounds->lower(c);
    hi_bound = cfg.bounds->upper(c);
    lo = std::max(lo, lo_bound);
    hi = std::min(hi, hi_bound);
  }

  auto eval_at = [&](double v) {
    x(c) = v;
    ++evals;
    return target(x);
  };

  // stepping out
  for (int i = 0; i < cfg.max_stepout && lo > lo_bound; ++i) {
    if (eval_at(lo) <= logy) break;
    lo = std::max(lo - w, lo_bound);
  }
  for (int i = 0; i < cfg.max_stepout && hi < hi_bound; ++i) {
    if (eval_at(hi) <= logy) break;
    hi = std::min(hi + w, hi_bound);
  }

  // shrinkage
  for (int i = 0; i < 1000; ++i) {
    const double cand = rng.uniform(lo, hi);
    const double cand_lp = eval_at(cand);
    if (cand_lp > logy) return cand_lp;
    if (cand < x0)
      lo = cand;
    else
      hi = cand;
  }
  // interval shrank to nothing; keep the current point
  x(c) = x0;
  return lp;
}

}  // namespace

SliceConfig slice_config_for_box(const simulators::BoxUniformPrior& box) {
  SliceConfig cfg;
  cfg.widths = 0.1 * (box.upper - box.lower);
  cfg.bounds = box;
  return cfg;
}

Chain slice_sample(const LogDensity& target, const Eigen::VectorXd& init, int n, Rng& rng,
                   const SliceConfig& cfg) {
  const int dim = static_cast<int>(init.size());
  if (cfg.widths.size() != dim) throw std::domain_error("slice_sample: widths dimension mismatch");

  Eigen::VectorXd x = init;
  double lp = target(x);
  if (!std::isfinite(lp)) throw std::domain_error("slice_sample: non-finite density at init");

  Chain chain;
  chain.states.resize(n, dim);
  chain.log_densities.resize(n);
  ++chain.target_evals;

  const int thin = std::max(1, cfg.thin);
  const long total_scans = static_cast<long>(cfg.burn_in) + static_cast<long>(n) * thin;
  int kept = 0;
  for (long scan = 0; scan < total_scans && kept < n; ++scan) {
    for (int c = 0; c < dim; ++c)
      lp = slice_update_coord(target, x, c, lp, rng, cfg, chain.target_evals);
    if (scan >= cfg.burn_in && (scan - cfg.burn_in) % thin == thin - 1) {
      chain.states.row(kept) = x.transpose();
      chain.log_densities(kept) = lp;
      ++kept;
    }
  }
  return chain;
}

Chain posterior_sample_snl(const svi::VariationalPosterior& vp, const mdn::MdnArchitecture& arch,
                           const Eigen::VectorXd& x0, const simulators::BoxUniformPrior& prior,
                           int n, Rng& rng, const SnlSampleConfig& cfg) {
  const Eigen::VectorXd weights =
      cfg.marginalize_weights ? svi::sample_weights(vp, rng) : vp.means;

  LogDensity target = [&arch, weights, x0, &prior](const Eigen::VectorXd& theta) {
    const double prior_lp = prior.log_prob(theta);
    if (prior_lp == kNegInf) return kNegInf;
    return mdn::log_density(arch, weights, theta, x0) + prior_lp;
  };

  SliceConfig scfg = slice_config_for_box(prior);
  scfg.burn_in = cfg.burn_in;
  scfg.thin = cfg.thin;

  // a sharply peaked surrogate can underflow to -inf at a random prior
  // point; retry the init draw before giving up
  Eigen::VectorXd init = prior.sample(rng);
  for (int attempt = 0; attempt < 1000 && !std::isfinite(target(init)); ++attempt)
    init = prior.sample(rng);
  return slice_sample(target, init, n, rng, scfg);
}

double kde_log_prob(const Eigen::MatrixXd& samples, const Eigen::VectorXd& query) {
  const int m = static_cast<int>(samples.rows());
  const int d = static_cast<int>(samples.cols());
  if (m < 2) throw std::domain_error("kde_log_prob: need at least 2 samples");
  if (query.size() != d) throw std::domain_error("kde_log_prob: query dimension mismatch");

  const Eigen::RowVectorXd mean = samples.colwise().mean();
  Eigen::RowVectorXd sd(d);
  for (int j = 0; j < d; ++j) {
    const double var = (samples.col(j).array() - mean(j)).square().sum() / (m - 1);
    sd(j) = std::max(std::sqrt(var), 1e-8);
  }
  const Eigen::RowVectorXd h = sd * std::pow(static_cast<double>(m), -1.0 / (d + 4));

  double log_norm = -0.5 * d * kLogTwoPi;
  for (int j = 0; j < d; ++j) log_norm -= std::log(h(j));

  Eigen::VectorXd logk(m);
  for (int i = 0; i < m; ++i) {
    double quad = 0.0;
    for (int j = 0; j < d; ++j) {
      const double z = (query(j) - samples(i, j)) / h(j);
      quad += z * z;
    }
    logk(i) = log_norm - 0.5 * quad;
  }
  return numerics::log_mean_exp(logk);
}

}  // namespace lfi::samplers
