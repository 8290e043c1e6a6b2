#include "lfi/engines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "lfi/samplers.hpp"

namespace lfi::engines {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Whitening fit_whitening(const Eigen::MatrixXd& pilot_x) {
  const int d = static_cast<int>(pilot_x.cols());
  Whitening w;
  w.mean = pilot_x.colwise().mean();
  w.std.resize(d);
  for (int j = 0; j < d; ++j) {
    const double var =
        (pilot_x.col(j).array() - w.mean(j)).square().sum() / (pilot_x.rows() - 1);
    w.std(j) = std::max(std::sqrt(var), 1e-8);
  }
  return w;
}

Eigen::MatrixXd simulate_batch(const simulators::SimTask& task, const Eigen::MatrixXd& thetas,
                               Rng& rng) {
  Eigen::MatrixXd xs(thetas.rows(), task.x_dim);
  for (int i = 0; i < thetas.rows(); ++i)
    xs.row(i) = task.simulate(thetas.row(i).transpose(), rng).transpose();
  return xs;
}

Eigen::MatrixXd whiten_rows(const Whitening& w, const Eigen::MatrixXd& xs) {
  Eigen::MatrixXd out(xs.rows(), xs.cols());
  for (int i = 0; i < xs.rows(); ++i) out.row(i) = w.apply(xs.row(i).transpose()).transpose();
  return out;
}

Eigen::MatrixXd prior_batch(const simulators::BoxUniformPrior& prior, int n, Rng& rng) {
  Eigen::MatrixXd thetas(n, prior.dim());
  for (int i = 0; i < n; ++i) thetas.row(i) = prior.sample(rng).transpose();
  return thetas;
}

// SNPE-B proposal for rounds >= 2: the current posterior mixture at x0,
// truncated to the prior box by rejection. Weights use the mixture
// log-density corrected by the estimated box-acceptance rate.
struct SnpebProposal {
  Eigen::MatrixXd thetas;
  Eigen::VectorXd weights;
  bool widened = false;
};

SnpebProposal snpeb_propose(const mdn::MixtureParams& mix,
                            const simulators::BoxUniformPrior& prior, int n,
                            const EngineConfig& cfg, Rng& rng) {
  SnpebProposal out;

  long inside = 0;
  for (int i = 0; i < cfg.proposal_mc; ++i)
    if (prior.contains(mdn::sample(mix, rng))) ++inside;
  const double acc = static_cast<double>(inside) / cfg.proposal_mc;

  if (acc < cfg.min_acceptance) {
    out.widened = true;
    out.thetas = prior_batch(prior, n, rng);
    out.weights = Eigen::VectorXd::Ones(n);
    return out;
  }

  out.thetas.resize(n, prior.dim());
  const long attempt_cap = static_cast<long>(50.0 * n / acc) + 10000;
  long attempts = 0;
  for (int i = 0; i < n; ++i) {
    for (;;) {
      if (++attempts > attempt_cap) {
        out.widened = true;
        out.thetas = prior_batch(prior, n, rng);
        out.weights = Eigen::VectorXd::Ones(n);
        return out;
      }
      const Eigen::VectorXd theta = mdn::sample(mix, rng);
      if (prior.contains(theta)) {
        out.thetas.row(i) = theta.transpose();
        break;
      }
    }
  }

  const double log_acc = std::log(acc);
  out.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd theta = out.thetas.row(i).transpose();
    const double proposal_lp = mdn::log_prob(mix, theta) - log_acc;
    out.weights(i) = std::exp(prior.log_prob(theta) - proposal_lp);
  }

  // clip at the round's upper quantile to control weight variance
  std::vector<double> sorted(out.weights.data(), out.weights.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const int idx = std::min(n - 1, static_cast<int>(cfg.weight_clip_quantile * n));
  const double cap = sorted[idx];
  out.weights = out.weights.cwiseMin(cap);
  return out;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::SnpeB: return "snpeb";
    case Method::Snl: return "snl";
    case Method::Asnl: return "asnl";
  }
  throw std::logic_error("unknown method");
}

Method method_from_name(const std::string& name) {
  if (name == "snpeb") return Method::SnpeB;
  if (name == "snl") return Method::Snl;
  if (name == "asnl") return Method::Asnl;
  throw std::invalid_argument("unknown method: " + name);
}

double evaluate_posterior(Method method, const svi::VariationalPosterior& vp,
                          const mdn::MdnArchitecture& arch, const Eigen::VectorXd& x0_white,
                          const simulators::SimTask& task, const EngineConfig& cfg, Rng& rng,
                          Eigen::MatrixXd* samples_out) {
  Eigen::MatrixXd samples(cfg.eval_samples, task.theta_dim);
  if (method == Method::SnpeB) {
    const mdn::MixtureParams mix = mdn::forward(arch, vp.means, x0_white);
    for (int i = 0; i < cfg.eval_samples; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < 100000; ++attempt) {
        const Eigen::VectorXd theta = mdn::sample(mix, rng);
        if (task.prior.contains(theta)) {
          samples.row(i) = theta.transpose();
          placed = true;
          break;
        }
      }
      // negligible box mass: fall back to a prior draw for this sample
      if (!placed) samples.row(i) = task.prior.sample(rng).transpose();
    }
  } else {
    samplers::SnlSampleConfig scfg;
    scfg.burn_in = cfg.mcmc_burn_in;
    scfg.thin = cfg.mcmc_thin;
    scfg.marginalize_weights = cfg.eval_marginalize_weights;
    samples =
        samplers::posterior_sample_snl(vp, arch, x0_white, task.prior, cfg.eval_samples, rng, scfg)
            .states;
  }
  if (samples_out) *samples_out = samples;
  return samplers::kde_log_prob(samples, task.true_theta);
}

RunResult run_engine(Method method, const simulators::SimTask& task, const RoundPlan& plan,
                     const EngineConfig& cfg, Rng& rng) {
  if (plan.rounds < 1 || plan.sims_per_round < 1)
    throw std::invalid_argument("run_engine: invalid round plan");
  if (task.x0.size() != task.x_dim) throw std::invalid_argument("run_engine: task not observed");

  RunResult result;
  result.method = method;

  // whitening pilot pool on its own stream, shared by all methods
  {
    Rng prng(splitmix64(cfg.pilot_seed));
    const Eigen::MatrixXd pilot_thetas = prior_batch(task.prior, cfg.pilot_size, prng);
    const Eigen::MatrixXd pilot_xs = simulate_batch(task, pilot_thetas, prng);
    result.whitening = fit_whitening(pilot_xs);
    result.pilot_sims = cfg.pilot_size;
  }

  const bool posterior_net = (method == Method::SnpeB);  // models theta | x
  result.arch.input_dim = posterior_net ? task.x_dim : task.theta_dim;
  result.arch.output_dim = posterior_net ? task.theta_dim : task.x_dim;
  result.arch.hidden_units = cfg.hidden_units;
  result.arch.components = cfg.components;
  const mdn::MdnArchitecture& arch = result.arch;

  const Eigen::VectorXd x0_white = result.whitening.apply(task.x0);

  svi::VariationalPosterior vp = svi::initial_posterior(arch, rng);
  svi::Dataset data;

  for (int round = 1; round <= plan.rounds; ++round) {
    RoundRecord rec;
    rec.round = round;

    // propose
    auto t0 = Clock::now();
    Eigen::VectorXd weights = Eigen::VectorXd::Ones(plan.sims_per_round);
    if (round == 1) {
      rec.thetas = prior_batch(task.prior, plan.sims_per_round, rng);
    } else if (method == Method::SnpeB) {
      const mdn::MixtureParams mix = mdn::forward(arch, vp.means, x0_white);
      SnpebProposal prop = snpeb_propose(mix, task.prior, plan.sims_per_round, cfg, rng);
      rec.thetas = std::move(prop.thetas);
      weights = std::move(prop.weights);
      rec.proposal_widened = prop.widened;
    } else if (method == Method::Snl) {
      samplers::SnlSampleConfig scfg;
      scfg.burn_in = cfg.mcmc_burn_in;
      scfg.thin = cfg.mcmc_thin;
      rec.thetas = samplers::posterior_sample_snl(vp, arch, x0_white, task.prior,
                                                  plan.sims_per_round, rng, scfg)
                       .states;
    } else {
      const acquisition::MaxVarContext ctx =
          acquisition::make_maxvar_context(vp, arch, x0_white, cfg.acq.ensemble_size, rng);
      const auto batch = acquisition::acquire_batch(ctx, task.prior, plan.sims_per_round,
                                                    cfg.acq.restarts_per_point, rng, cfg.acq);
      rec.thetas.resize(plan.sims_per_round, task.theta_dim);
      for (int i = 0; i < plan.sims_per_round; ++i) rec.thetas.row(i) = batch[i].transpose();
    }
    rec.times.propose = seconds_since(t0);

    // simulate
    t0 = Clock::now();
    rec.xs = simulate_batch(task, rec.thetas, rng);
    result.sim_calls += plan.sims_per_round;
    rec.times.simulate = seconds_since(t0);

    const Eigen::MatrixXd xs_white = whiten_rows(result.whitening, rec.xs);
    if (posterior_net)
      data.append(xs_white, rec.thetas, weights);
    else
      data.append(rec.thetas, xs_white, weights);

    // train (warm start from the previous round's posterior)
    t0 = Clock::now();
    vp = svi::train(vp, arch, data, cfg.train, rng);
    rec.times.train = seconds_since(t0);
    rec.vp = vp;

    // evaluate
    t0 = Clock::now();
    rec.log_prob =
        evaluate_posterior(method, vp, arch, x0_white, task, cfg, rng, &rec.posterior_samples);
    rec.times.evaluate = seconds_since(t0);

    result.rounds.push_back(std::move(rec));
  }
  return result;
}

}  // namespace lfi::engines
