#ifndef LFI_SVI_HPP
#define LFI_SVI_HPP

#include <Eigen/Dense>
#include <span>
#include <stdexcept>
#include <vector>

#include "lfi/mdn.hpp"
#include "lfi/rng.hpp"

namespace lfi::svi {

// Training pairs, one row per (input, target). weights scale each pair's
// log-likelihood contribution (importance weights; all ones for plain
// maximum likelihood).
struct Dataset {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;
  Eigen::VectorXd weights;

  int size() const { return static_cast<int>(inputs.rows()); }
  static Dataset unweighted(Eigen::MatrixXd in, Eigen::MatrixXd tg);
  void append(const Eigen::MatrixXd& in, const Eigen::MatrixXd& tg, const Eigen::VectorXd& w);
};

// Diagonal Gaussian over the flat MDN weight vector.
struct VariationalPosterior {
  Eigen::VectorXd means;
  Eigen::VectorXd log_stds;
};

struct TrainConfig {
  int epochs = 1000;
  int batch_size = 100;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int mc_samples_per_step = 1;
  double kl_scale = 1.0;

  bool operator==(const TrainConfig&) const = default;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, long step) : std::runtime_error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

// 1/2 sum_i (mu_i^2 + sigma_i^2 - 1 - log sigma_i^2), the analytic KL to
// a standard normal prior.
double kl_to_standard_normal(const VariationalPosterior& vp);

// Reparameterized draw w = mu + sigma * z.
Eigen::VectorXd sample_weights(const VariationalPosterior& vp, Rng& rng);

// mu ~ N(0, (0.1/sqrt(fan_in))^2) for weights, 0 for biases; log_std = -5.
VariationalPosterior initial_posterior(const mdn::MdnArchitecture& arch, Rng& rng);

// Reparameterization noise for a fixed-draw objective evaluation: per MC
// sample, one hidden pre-activation noise row per data row and one head
// weight draw shared across rows.
struct ElboNoise {
  std::vector<Eigen::MatrixXd> hidden_eps;  // each rows x hidden_units
  std::vector<Eigen::VectorXd> head_z;      // each head_params()
};
ElboNoise draw_elbo_noise(const mdn::MdnArchitecture& arch, int rows, int mc_samples, Rng& rng);

// Negative ELBO over the given dataset rows with fixed noise:
//   -(1/S) sum_s sum_n w_n log q_{phi_s}(t_n | x_n)
//   + kl_scale * kl_fraction * KL(q || N(0, I)).
// Hidden pre-activations are sampled via their induced Gaussian (local
// reparameterization); head weights are sampled in weight space. If
// grad_mu/grad_log_std are non-null they receive the exact gradient.
double negative_elbo_batch(const VariationalPosterior& vp, const mdn::MdnArchitecture& arch,
                           const Dataset& data, std::span<const int> rows, double kl_scale,
                           double kl_fraction, const ElboNoise& noise, Eigen::VectorXd* grad_mu,
                           Eigen::VectorXd* grad_log_std);

// Full-dataset negative ELBO with cfg.mc_samples_per_step fresh draws.
double negative_elbo(const VariationalPosterior& vp, const mdn::MdnArchitecture& arch,
                     const Dataset& data, const TrainConfig& cfg, Rng& rng);

// Adam on (mu, log_std), minimizing the minibatch negative ELBO with the
// KL charged in proportion batch/N. Throws TrainingError on a non-finite
// loss or gradient.
VariationalPosterior train(const VariationalPosterior& vp_init, const mdn::MdnArchitecture& arch,
                           const Dataset& data, const TrainConfig& cfg, Rng& rng,
                           std::vector<double>* loss_trace = nullptr);

}  // namespace lfi::svi

#endif
