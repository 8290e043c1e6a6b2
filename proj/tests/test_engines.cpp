#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lfi/engines.hpp"
#include "lfi/samplers.hpp"

using namespace lfi;
using namespace lfi::engines;

namespace {

// x | theta ~ N(theta, 1) on a wide box: conjugate task with a known
// posterior N(x0, 1) (truncation negligible for interior x0).
simulators::SimTask conjugate_task() {
  simulators::SimTask task;
  task.name = "conjugate";
  task.theta_dim = 1;
  task.x_dim = 1;
  task.prior.lower = Eigen::VectorXd::Constant(1, -10.0);
  task.prior.upper = Eigen::VectorXd::Constant(1, 10.0);
  task.true_theta = Eigen::VectorXd::Constant(1, 1.0);
  task.x0 = Eigen::VectorXd::Constant(1, 1.3);
  task.simulate = [](const Eigen::VectorXd& theta, Rng& rng) {
    return Eigen::VectorXd::Constant(1, theta(0) + rng.normal());
  };
  return task;
}

EngineConfig small_config() {
  EngineConfig cfg;
  cfg.hidden_units = 20;
  cfg.components = 2;
  cfg.train.epochs = 600;
  cfg.pilot_size = 200;
  cfg.eval_samples = 2000;
  return cfg;
}

}  // namespace

TEST_CASE("method names round-trip") {
  for (Method m : {Method::SnpeB, Method::Snl, Method::Asnl})
    CHECK(method_from_name(method_name(m)) == m);
  CHECK_THROWS_AS(method_from_name("nope"), std::invalid_argument);
}

TEST_CASE("budget accounting and round shapes") {
  const auto task = conjugate_task();
  EngineConfig cfg = small_config();
  cfg.train.epochs = 50;
  cfg.eval_samples = 500;
  RoundPlan plan{.rounds = 2, .sims_per_round = 100};

  Rng rng(31);
  const RunResult res = run_snl(task, plan, cfg, rng);
  CHECK(res.sim_calls == plan.total());
  CHECK(res.pilot_sims == cfg.pilot_size);
  REQUIRE(res.rounds.size() == 2);
  for (const auto& rec : res.rounds) {
    CHECK(rec.thetas.rows() == plan.sims_per_round);
    CHECK(rec.xs.rows() == plan.sims_per_round);
    CHECK(rec.posterior_samples.rows() == cfg.eval_samples);
    CHECK(std::isfinite(rec.log_prob));
  }
}

TEST_CASE("round 1 gathers prior-distributed parameters") {
  const auto task = conjugate_task();
  EngineConfig cfg = small_config();
  cfg.train.epochs = 20;
  cfg.eval_samples = 200;
  RoundPlan plan{.rounds = 1, .sims_per_round = 400};

  for (Method m : {Method::SnpeB, Method::Snl, Method::Asnl}) {
    Rng rng(37);
    const RunResult res = run_engine(m, task, plan, cfg, rng);
    const double mean = res.rounds[0].thetas.col(0).mean();
    const double se = (20.0 / std::sqrt(12.0)) / std::sqrt(400.0);
    CHECK(std::abs(mean - 0.0) < 4.0 * se);
    for (int i = 0; i < res.rounds[0].thetas.rows(); ++i)
      CHECK(task.prior.contains(res.rounds[0].thetas.row(i).transpose()));
  }
}

TEST_CASE("identical seeds give identical runs") {
  const auto task = conjugate_task();
  EngineConfig cfg = small_config();
  cfg.train.epochs = 40;
  cfg.eval_samples = 300;
  RoundPlan plan{.rounds = 2, .sims_per_round = 60};

  for (Method m : {Method::SnpeB, Method::Snl, Method::Asnl}) {
    Rng a(41), b(41);
    const RunResult r1 = run_engine(m, task, plan, cfg, a);
    const RunResult r2 = run_engine(m, task, plan, cfg, b);
    REQUIRE(r1.rounds.size() == r2.rounds.size());
    for (size_t i = 0; i < r1.rounds.size(); ++i) {
      CHECK(r1.rounds[i].log_prob == r2.rounds[i].log_prob);
      CHECK((r1.rounds[i].thetas - r2.rounds[i].thetas).cwiseAbs().maxCoeff() == 0.0);
      CHECK((r1.rounds[i].posterior_samples - r2.rounds[i].posterior_samples)
                .cwiseAbs()
                .maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("snpeb beats the prior baseline on the conjugate task") {
  const auto task = conjugate_task();
  const EngineConfig cfg = small_config();
  RoundPlan plan{.rounds = 2, .sims_per_round = 200};

  Rng rng(43);
  const RunResult res = run_snpeb(task, plan, cfg, rng);
  const double prior_lp = -std::log(20.0);
  CHECK(res.rounds.back().log_prob > prior_lp);
}

TEST_CASE("snl recovers the conjugate posterior mean") {
  const auto task = conjugate_task();
  const EngineConfig cfg = small_config();
  RoundPlan plan{.rounds = 3, .sims_per_round = 200};

  Rng rng(47);
  const RunResult res = run_snl(task, plan, cfg, rng);
  const double post_mean = res.rounds.back().posterior_samples.col(0).mean();
  CHECK(std::abs(post_mean - task.x0(0)) < 0.2);
}

TEST_CASE("asnl runs end to end and evaluates finitely") {
  const auto task = conjugate_task();
  EngineConfig cfg = small_config();
  cfg.train.epochs = 100;
  cfg.eval_samples = 500;
  cfg.acq.max_iters = 30;
  RoundPlan plan{.rounds = 2, .sims_per_round = 40};

  Rng rng(53);
  const RunResult res = run_asnl(task, plan, cfg, rng);
  REQUIRE(res.rounds.size() == 2);
  CHECK(std::isfinite(res.rounds.back().log_prob));
  for (int i = 0; i < res.rounds[1].thetas.rows(); ++i)
    CHECK(task.prior.contains(res.rounds[1].thetas.row(i).transpose()));
}

TEST_CASE("prior-sample KDE baseline matches the uniform density") {
  simulators::BoxUniformPrior box;
  box.lower = Eigen::VectorXd::Constant(4, -5.0);
  box.upper = Eigen::VectorXd::Constant(4, 2.0);
  Rng rng(59);
  Eigen::MatrixXd samples(5000, 4);
  for (int i = 0; i < samples.rows(); ++i) samples.row(i) = box.sample(rng).transpose();
  Eigen::VectorXd interior = Eigen::VectorXd::Constant(4, -1.5);
  const double lp = samplers::kde_log_prob(samples, interior);
  CHECK(std::abs(lp - (-4.0 * std::log(7.0))) < 0.3);
}

TEST_CASE("degenerate variational variance floors the acquisition objective") {
  mdn::MdnArchitecture arch{.input_dim = 1, .output_dim = 1, .hidden_units = 5, .components = 2};
  Rng init_rng(61);
  svi::VariationalPosterior vp = svi::initial_posterior(arch, init_rng);
  vp.log_stds.setConstant(-std::numeric_limits<double>::infinity());  // zero variance

  Rng rng(67);
  const auto ctx = acquisition::make_maxvar_context(vp, arch, Eigen::VectorXd::Zero(1), 10, rng);
  simulators::BoxUniformPrior box;
  box.lower = Eigen::VectorXd::Constant(1, -3.0);
  box.upper = Eigen::VectorXd::Constant(1, 3.0);

  acquisition::AcquisitionConfig acfg;
  const auto batch = acquisition::acquire_batch(ctx, box, 5, 2, rng, acfg);
  for (const auto& t : batch) {
    CHECK(box.contains(t));
    CHECK(acquisition::maxvar_objective(ctx, t) == acquisition::kObjectiveFloor);
  }
}
