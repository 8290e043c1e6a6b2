#ifndef LFI_ENGINES_HPP
#define LFI_ENGINES_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "lfi/acquisition.hpp"
#include "lfi/mdn.hpp"
#include "lfi/rng.hpp"
#include "lfi/simulators.hpp"
#include "lfi/svi.hpp"

namespace lfi::engines {

enum class Method { SnpeB, Snl, Asnl };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct RoundPlan {
  int rounds = 10;
  int sims_per_round = 1000;
  long total() const { return static_cast<long>(rounds) * sims_per_round; }

  bool operator==(const RoundPlan&) const = default;
};

// Shared across all three methods within one experiment so the density
// estimator and its training procedure are held fixed.
struct EngineConfig {
  int hidden_units = 50;
  int components = 5;
  svi::TrainConfig train;
  acquisition::AcquisitionConfig acq;
  int mcmc_burn_in = 200;
  int mcmc_thin = 1;
  int eval_samples = 5000;
  int pilot_size = 1000;            // prior-predictive sims for whitening
  std::uint64_t pilot_seed = 1;     // separate stream so methods share the pool
  int proposal_mc = 10000;          // draws for the box-acceptance estimate
  double weight_clip_quantile = 0.98;
  double min_acceptance = 1e-4;
  bool eval_marginalize_weights = false;

  bool operator==(const EngineConfig&) const = default;
};

// Elementwise z-score using pilot-pool statistics.
struct Whitening {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    return (x - mean).cwiseQuotient(std);
  }
};

struct PhaseTimes {
  double simulate = 0.0;
  double train = 0.0;
  double propose = 0.0;  // mcmc / acquisition / mixture rejection
  double evaluate = 0.0;
};

struct RoundRecord {
  int round = 0;  // 1-based
  Eigen::MatrixXd thetas;  // gathered batch, sims_per_round x theta_dim
  Eigen::MatrixXd xs;      // raw simulator outputs
  svi::VariationalPosterior vp;
  Eigen::MatrixXd posterior_samples;  // eval_samples x theta_dim
  double log_prob = 0.0;   // KDE log-density of true theta
  PhaseTimes times;
  bool proposal_widened = false;  // SNPE-B fell back to the prior
};

struct RunResult {
  Method method = Method::Snl;
  mdn::MdnArchitecture arch;
  Whitening whitening;
  std::vector<RoundRecord> rounds;
  long sim_calls = 0;   // budgeted calls, excludes the pilot pool
  long pilot_sims = 0;  // logged separately
};

RunResult run_engine(Method method, const simulators::SimTask& task, const RoundPlan& plan,
                     const EngineConfig& cfg, Rng& rng);

inline RunResult run_snpeb(const simulators::SimTask& t, const RoundPlan& p,
                           const EngineConfig& c, Rng& r) {
  return run_engine(Method::SnpeB, t, p, c, r);
}
inline RunResult run_snl(const simulators::SimTask& t, const RoundPlan& p, const EngineConfig& c,
                         Rng& r) {
  return run_engine(Method::Snl, t, p, c, r);
}
inline RunResult run_asnl(const simulators::SimTask& t, const RoundPlan& p, const EngineConfig& c,
                          Rng& r) {
  return run_engine(Method::Asnl, t, p, c, r);
}

// 5000-sample KDE evaluation at the true parameters; exposed for tests.
double evaluate_posterior(Method method, const svi::VariationalPosterior& vp,
                          const mdn::MdnArchitecture& arch, const Eigen::VectorXd& x0_white,
                          const simulators::SimTask& task, const EngineConfig& cfg, Rng& rng,
                          Eigen::MatrixXd* samples_out = nullptr);

}  // namespace lfi::engines

#endif
