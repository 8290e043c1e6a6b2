#ifndef LFI_ACQUISITION_HPP
#define LFI_ACQUISITION_HPP

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "lfi/mdn.hpp"
#include "lfi/rng.hpp"
#include "lfi/simulators.hpp"
#include "lfi/svi.hpp"

namespace lfi::acquisition {

// Objective floor standing in for -inf (degenerate ensemble variance).
inline constexpr double kObjectiveFloor = -1e9;

struct AcquisitionConfig {
  int ensemble_size = 25;
  int restarts_per_point = 1;
  int max_iters = 200;
  double grad_tol = 1e-8;
  double fd_step_frac = 1e-4;  // central-difference step as fraction of box side
  int lbfgs_memory = 10;

  bool operator==(const AcquisitionConfig&) const = default;
};

// Frozen ensemble of weight draws; the objective is deterministic for
// the lifetime of the context (one acquisition round).
struct MaxVarContext {
  mdn::MdnArchitecture arch;
  Eigen::VectorXd x0;
  std::vector<Eigen::VectorXd> ensemble;
};

MaxVarContext make_maxvar_context(const svi::VariationalPosterior& vp,
                                  const mdn::MdnArchitecture& arch, const Eigen::VectorXd& x0,
                                  int ensemble_size, Rng& rng);

// log V over the ensemble of log q_{phi_k}(x0 | theta); floor value when
// the ensemble log-densities coincide.
double maxvar_objective(const MaxVarContext& ctx, const Eigen::VectorXd& theta);

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct OptResult {
  Eigen::VectorXd theta;
  double value = kObjectiveFloor;
  bool improved = false;  // beat its own starting point
};

// Multi-restart box-constrained maximization: limited-memory quasi-Newton
// ascent with projected backtracking line search and central-difference
// gradients; restarts initialized from prior draws. Ties break toward
// the lowest restart index.
OptResult bounded_maximize(const Objective& f, const simulators::BoxUniformPrior& box,
                           int restarts, Rng& rng, const AcquisitionConfig& cfg);

// Row per optimizer restart, for the acquisition trace file.
struct RestartTrace {
  Eigen::VectorXd start;
  Eigen::VectorXd end;
  double start_value = 0.0;
  double end_value = 0.0;
};

Eigen::VectorXd maxvar_optimize(const MaxVarContext& ctx, const simulators::BoxUniformPrior& box,
                                int restarts, Rng& rng, const AcquisitionConfig& cfg,
                                std::vector<RestartTrace>* trace = nullptr);

// batch acquisitions, each the winner of its own group of restarts so
// the batch is diverse rather than one repeated point.
std::vector<Eigen::VectorXd> acquire_batch(const Objective& f,
                                           const simulators::BoxUniformPrior& box, int batch,
                                           int restarts_per_point, Rng& rng,
                                           const AcquisitionConfig& cfg,
                                           std::vector<RestartTrace>* trace = nullptr);

std::vector<Eigen::VectorXd> acquire_batch(const MaxVarContext& ctx,
                                           const simulators::BoxUniformPrior& box, int batch,
                                           int restarts_per_point, Rng& rng,
                                           const AcquisitionConfig& cfg,
                                           std::vector<RestartTrace>* trace = nullptr);

}  // namespace lfi::acquisition

#endif
