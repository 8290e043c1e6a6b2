#include "lfi/acquisition.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "lfi/numerics.hpp"

namespace lfi::acquisition {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::VectorXd clamp_to_box(const Eigen::VectorXd& x, const simulators::BoxUniformPrior& box) {
  return x.cwiseMax(box.lower).cwiseMin(box.upper);
}

Eigen::VectorXd fd_gradient(const Objective& f, const Eigen::VectorXd& x,
                            const simulators::BoxUniformPrior& box, double step_frac) {
  const int d = static_cast<int>(x.size());
  Eigen::VectorXd g(d), xa = x, xb = x;
  for (int i = 0; i < d; ++i) {
    const double h = step_frac * (box.upper(i) - box.lower(i));
    const double a = std::min(x(i) + h, box.upper(i));
    const double b = std::max(x(i) - h, box.lower(i));
    xa(i) = a;
    xb(i) = b;
    g(i) = (a > b) ? (f(xa) - f(xb)) / (a - b) : 0.0;
    xa(i) = x(i);
    xb(i) = x(i);
  }
  return g;
}

double projected_grad_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                           const simulators::BoxUniformPrior& box) {
  double norm2 = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const double side = box.upper(i) - box.lower(i);
    const double eps = 1e-12 * side;
    double gi = g(i);
    if (x(i) <= box.lower(i) + eps && gi < 0.0) gi = 0.0;
    if (x(i) >= box.upper(i) - eps && gi > 0.0) gi = 0.0;
    norm2 += gi * gi;
  }
  return std::sqrt(norm2);
}

struct Ascent {
  Eigen::VectorXd x;
  double value;
};

// Limited-memory quasi-Newton ascent with projected backtracking line
// search; gradients by central differences.
Ascent ascend(const Objective& f, const simulators::BoxUniformPrior& box,
              const Eigen::VectorXd& start, const AcquisitionConfig& cfg) {
  Eigen::VectorXd x = clamp_to_box(start, box);
  double fx = f(x);
  Eigen::VectorXd g = fd_gradient(f, x, box, cfg.fd_step_frac);

  std::deque<Eigen::VectorXd> s_hist, y_hist;  // y uses minimization sign: g_old - g_new

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    if (projected_grad_norm(x, g, box) < cfg.grad_tol) break;

    // two-loop recursion on the ascent gradient
    Eigen::VectorXd q = g;
    const int m = static_cast<int>(s_hist.size());
    std::vector<double> alpha(m), rho(m);
    for (int i = m - 1; i >= 0; --i) {
      rho[i] = 1.0 / y_hist[i].dot(s_hist[i]);
      alpha[i] = rho[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (m > 0) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (int i = 0; i < m; ++i) {
      const double beta = rho[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    Eigen::VectorXd dir = q;
    if (dir.dot(g) <= 0.0) dir = g;  // fall back to steepest ascent

    // projected backtracking line search
    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd xn;
    double fn = fx;
    for (int ls = 0; ls < 40; ++ls, step *= 0.5) {
      xn = clamp_to_box(x + step * dir, box);
      const Eigen::VectorXd delta = xn - x;
      if (delta.cwiseAbs().maxCoeff() == 0.0) continue;
      fn = f(xn);
      if (fn > fx + 1e-4 * g.dot(delta)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;

    const Eigen::VectorXd gn = fd_gradient(f, xn, box, cfg.fd_step_frac);
    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd y = g - gn;
    if (s.dot(y) > 1e-12) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      if (static_cast<int>(s_hist.size()) > cfg.lbfgs_memory) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }
    x = xn;
    fx = fn;
    g = gn;
  }
  return {x, fx};
}

OptResult run_restarts(const Objective& f, const simulators::BoxUniformPrior& box, int restarts,
                       Rng& rng, const AcquisitionConfig& cfg,
                       std::vector<RestartTrace>* trace) {
  OptResult best;
  Eigen::VectorXd best_start;
  double best_start_value = kNegInf;
  bool any_improved = false;

  for (int r = 0; r < restarts; ++r) {
    const Eigen::VectorXd start = box.sample(rng);
    const double f_start = f(start);
    const Ascent a = ascend(f, box, start, cfg);

    if (trace) trace->push_back({start, a.x, f_start, a.value});
    if (a.value > f_start) any_improved = true;

    if (r == 0 || a.value > best.value) {
      best.theta = a.x;
      best.value = a.value;
    }
    if (r == 0 || f_start > best_start_value) {
      best_start = start;
      best_start_value = f_start;
    }
  }
  best.improved = any_improved;
  if (!any_improved) {
    // nothing beat its own start; hand back the best prior draw
    best.theta = best_start;
    best.value = best_start_value;
  }
  return best;
}

}  // namespace

MaxVarContext make_maxvar_context(const svi::VariationalPosterior& vp,
                                  const mdn::MdnArchitecture& arch, const Eigen::VectorXd& x0,
                                  int ensemble_size, Rng& rng) {
  MaxVarContext ctx;
  ctx.arch = arch;
  ctx.x0 = x0;
  ctx.ensemble.reserve(ensemble_size);
  for (int k = 0; k < ensemble_size; ++k) ctx.ensemble.push_back(svi::sample_weights(vp, rng));
  return ctx;
}

double maxvar_objective(const MaxVarContext& ctx, const Eigen::VectorXd& theta) {
  Eigen::VectorXd logq(static_cast<Eigen::Index>(ctx.ensemble.size()));
  for (size_t k = 0; k < ctx.ensemble.size(); ++k)
    logq(static_cast<Eigen::Index>(k)) = mdn::log_density(ctx.arch, ctx.ensemble[k], theta, ctx.x0);
  const double v = numerics::log_var_exp(logq);
  return (v == kNegInf) ? kObjectiveFloor : v;
}

OptResult bounded_maximize(const Objective& f, const simulators::BoxUniformPrior& box,
                           int restarts, Rng& rng, const AcquisitionConfig& cfg) {
  return run_restarts(f, box, restarts, rng, cfg, nullptr);
}

Eigen::VectorXd maxvar_optimize(const MaxVarContext& ctx, const simulators::BoxUniformPrior& box,
                                int restarts, Rng& rng, const AcquisitionConfig& cfg,
                                std::vector<RestartTrace>* trace) {
  const Objective f = [&ctx](const Eigen::VectorXd& theta) {
    return maxvar_objective(ctx, theta);
  };
  return run_restarts(f, box, restarts, rng, cfg, trace).theta;
}

std::vector<Eigen::VectorXd> acquire_batch(const Objective& f,
                                           const simulators::BoxUniformPrior& box, int batch,
                                           int restarts_per_point, Rng& rng,
                                           const AcquisitionConfig& cfg,
                                           std::vector<RestartTrace>* trace) {
  std::vector<Eigen::VectorXd> points;
  points.reserve(batch);
  for (int i = 0; i < batch; ++i)
    points.push_back(run_restarts(f, box, restarts_per_point, rng, cfg, trace).theta);
  return points;
}

std::vector<Eigen::VectorXd> acquire_batch(const MaxVarContext& ctx,
                                           const simulators::BoxUniformPrior& box, int batch,
                                           int restarts_per_point, Rng& rng,
                                           const AcquisitionConfig& cfg,
                                           std::vector<RestartTrace>* trace) {
  const Objective f = [&ctx](const Eigen::VectorXd& theta) {
    return maxvar_objective(ctx, theta);
  };
  std::vector<Eigen::VectorXd> points;
  points.reserve(batch);
  for (int i = 0; i < batch; ++i)
    points.push_back(run_restarts(f, box, restarts_per_point, rng, cfg, trace).theta);
  return points;
}

}  // namespace lfi::acquisition
