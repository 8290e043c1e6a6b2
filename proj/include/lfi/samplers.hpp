#ifndef LFI_SAMPLERS_HPP
#define LFI_SAMPLERS_HPP

#include <Eigen/Dense>
#include <functional>
#include <optional>

#include "lfi/mdn.hpp"
#include "lfi/rng.hpp"
#include "lfi/simulators.hpp"
#include "lfi/svi.hpp"

namespace lfi::samplers {

// Log-density up to a constant; must return -inf outside its support,
// never NaN.
using LogDensity = std::function<double(const Eigen::VectorXd&)>;

struct SliceConfig {
  Eigen::VectorXd widths;  // initial stepping-out width per coordinate
  std::optional<simulators::BoxUniformPrior> bounds;
  int max_stepout = 50;
  int burn_in = 0;
  int thin = 1;  // slice scans per retained state
};

// For a box-supported target: widths at 10% of each side, bounded.
SliceConfig slice_config_for_box(const simulators::BoxUniformPrior& box);

struct Chain {
  Eigen::MatrixXd states;        // n x dim
  Eigen::VectorXd log_densities; // n
  long target_evals = 0;
};

// Axis-aligned univariate slice sampling with stepping-out and
// shrinkage, cycling coordinates once per scan. Returns n states after
// burn-in, one per `thin` scans. Throws std::domain_error if the target
// is not finite at init.
Chain slice_sample(const LogDensity& target, const Eigen::VectorXd& init, int n, Rng& rng,
                   const SliceConfig& cfg);

// MCMC over theta with target log q_phi(x0 | theta) + log prior, where
// phi is the variational mean weight vector (or, with marginalize, a
// fresh weight draw per chain). Chain starts from a prior draw.
struct SnlSampleConfig {
  int burn_in = 200;
  int thin = 1;
  bool marginalize_weights = false;
};

Chain posterior_sample_snl(const svi::VariationalPosterior& vp, const mdn::MdnArchitecture& arch,
                           const Eigen::VectorXd& x0, const simulators::BoxUniformPrior& prior,
                           int n, Rng& rng, const SnlSampleConfig& cfg = {});

// Gaussian-kernel density estimate with per-dimension Scott bandwidth
// h_j = sd_j * m^(-1/(d+4)); log of the averaged kernel at query.
double kde_log_prob(const Eigen::MatrixXd& samples, const Eigen::VectorXd& query);

}  // namespace lfi::samplers

#endif
