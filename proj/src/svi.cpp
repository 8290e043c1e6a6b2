#include "lfi/svi.hpp"

#include <cmath>
#include <numeric>

namespace lfi::svi {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

Dataset Dataset::unweighted(Eigen::MatrixXd in, Eigen::MatrixXd tg) {
  Dataset d;
  d.weights = Eigen::VectorXd::Ones(in.rows());
  d.inputs = std::move(in);
  d.targets = std::move(tg);
  return d;
}

void Dataset::append(const Eigen::MatrixXd& in, const Eigen::MatrixXd& tg,
                     const Eigen::VectorXd& w) {
  const int n = size(), m = static_cast<int>(in.rows());
  if (n == 0) {
    inputs = in;
    targets = tg;
    weights = w;
    return;
  }
  inputs.conservativeResize(n + m, Eigen::NoChange);
  targets.conservativeResize(n + m, Eigen::NoChange);
  weights.conservativeResize(n + m);
  inputs.bottomRows(m) = in;
  targets.bottomRows(m) = tg;
  weights.tail(m) = w;
}

double kl_to_standard_normal(const VariationalPosterior& vp) {
  const Eigen::ArrayXd mu = vp.means.array();
  const Eigen::ArrayXd ls = vp.log_stds.array();
  return 0.5 * (mu.square() + (2.0 * ls).exp() - 1.0 - 2.0 * ls).sum();
}

Eigen::VectorXd sample_weights(const VariationalPosterior& vp, Rng& rng) {
  Eigen::VectorXd w(vp.means.size());
  for (int i = 0; i < w.size(); ++i)
    w(i) = vp.means(i) + std::exp(vp.log_stds(i)) * rng.normal();
  return w;
}

VariationalPosterior initial_posterior(const mdn::MdnArchitecture& arch, Rng& rng) {
  const int p = arch.param_count();
  const int h = arch.hidden_units, in = arch.input_dim, o = arch.head_rows();
  VariationalPosterior vp;
  vp.means = Eigen::VectorXd::Zero(p);
  vp.log_stds = Eigen::VectorXd::Constant(p, -5.0);
  const double s1 = 0.1 / std::sqrt(static_cast<double>(in));
  for (int i = 0; i < h * in; ++i) vp.means(i) = s1 * rng.normal();
  const double s2 = 0.1 / std::sqrt(static_cast<double>(h));
  const int off = arch.hidden_params();
  for (int i = 0; i < o * h; ++i) vp.means(off + i) = s2 * rng.normal();
  return vp;
}

ElboNoise draw_elbo_noise(const mdn::MdnArchitecture& arch, int rows, int mc_samples, Rng& rng) {
  ElboNoise noise;
  noise.hidden_eps.reserve(mc_samples);
  noise.head_z.reserve(mc_samples);
  for (int s = 0; s < mc_samples; ++s) {
    Eigen::MatrixXd eps(rows, arch.hidden_units);
    for (int r = 0; r < rows; ++r)
      for (int j = 0; j < arch.hidden_units; ++j) eps(r, j) = rng.normal();
    Eigen::VectorXd z(arch.head_params());
    for (int i = 0; i < z.size(); ++i) z(i) = rng.normal();
    noise.hidden_eps.push_back(std::move(eps));
    noise.head_z.push_back(std::move(z));
  }
  return noise;
}

double negative_elbo_batch(const VariationalPosterior& vp, const mdn::MdnArchitecture& arch,
                           const Dataset& data, std::span<const int> rows, double kl_scale,
                           double kl_fraction, const ElboNoise& noise, Eigen::VectorXd* grad_mu,
                           Eigen::VectorXd* grad_log_std) {
  if (data.size() == 0 || rows.empty()) throw std::domain_error("svi: empty dataset");
  const int h = arch.hidden_units, in = arch.input_dim;
  const int hp = arch.hidden_params(), q = arch.head_params();
  const int s_count = static_cast<int>(noise.hidden_eps.size());
  const double inv_s = 1.0 / static_cast<double>(s_count);

  Eigen::Map<const RowMat> mu_w1(vp.means.data(), h, in);
  Eigen::Map<const Eigen::VectorXd> mu_b1(vp.means.data() + h * in, h);
  Eigen::Map<const RowMat> ls_w1(vp.log_stds.data(), h, in);
  Eigen::Map<const Eigen::VectorXd> ls_b1(vp.log_stds.data() + h * in, h);
  const RowMat var_w1 = (2.0 * ls_w1.array()).exp();  // sigma^2 per hidden weight
  const Eigen::VectorXd var_b1 = (2.0 * ls_b1.array()).exp();

  const bool want_grad = grad_mu != nullptr || grad_log_std != nullptr;
  Eigen::VectorXd gmu, gls;
  if (want_grad) {
    gmu = Eigen::VectorXd::Zero(vp.means.size());
    gls = Eigen::VectorXd::Zero(vp.means.size());
  }

  double loglik = 0.0;
  Eigen::VectorXd head_w(q), grad_head(q), grad_hidden;
  for (int s = 0; s < s_count; ++s) {
    // head weights drawn once per MC sample
    const Eigen::VectorXd sigma_z =
        (vp.log_stds.segment(hp, q).array().exp() * noise.head_z[s].array()).matrix();
    head_w = vp.means.segment(hp, q) + sigma_z;
    grad_head.setZero();

    for (size_t ri = 0; ri < rows.size(); ++ri) {
      const int r = rows[ri];
      const Eigen::VectorXd x = data.inputs.row(r).transpose();
      const Eigen::VectorXd x2 = x.array().square();
      const Eigen::VectorXd m = mu_w1 * x + mu_b1;
      const Eigen::VectorXd s2 = var_w1 * x2 + var_b1;
      const Eigen::VectorXd sd = s2.array().sqrt();
      const Eigen::VectorXd eps = noise.hidden_eps[s].row(static_cast<int>(ri)).transpose();
      const Eigen::VectorXd u = m + sd.cwiseProduct(eps);
      const Eigen::VectorXd hid = u.array().tanh();

      const double coeff = data.weights(r) * inv_s;
      const double lp = mdn::head_log_prob_grad(
          arch, std::span<const double>(head_w.data(), q), hid, data.targets.row(r).transpose(),
          coeff, want_grad ? std::span<double>(grad_head.data(), q) : std::span<double>(),
          want_grad ? &grad_hidden : nullptr);
      loglik += coeff * lp;

      if (want_grad) {
        // grad_hidden already carries coeff
        const Eigen::VectorXd g_pre = grad_hidden.array() * (1.0 - hid.array().square());
        Eigen::Map<RowMat> gmu_w1(gmu.data(), h, in);
        Eigen::Map<Eigen::VectorXd> gmu_b1(gmu.data() + h * in, h);
        gmu_w1.noalias() += g_pre * x.transpose();
        gmu_b1 += g_pre;

        // d sd_i / d ls_ij = sigma_ij^2 x_j^2 / sd_i
        Eigen::Map<RowMat> gls_w1(gls.data(), h, in);
        Eigen::Map<Eigen::VectorXd> gls_b1(gls.data() + h * in, h);
        for (int i = 0; i < h; ++i) {
          if (s2(i) < 1e-300) continue;  // sigma underflow, derivative negligible
          const double v = g_pre(i) * eps(i) / sd(i);
          gls_w1.row(i) += (v * var_w1.row(i).array() * x2.transpose().array()).matrix();
          gls_b1(i) += v * var_b1(i);
        }
      }
    }

    if (want_grad) {
      gmu.segment(hp, q) += grad_head;
      gls.segment(hp, q) += grad_head.cwiseProduct(sigma_z);
    }
  }

  const double ksf = kl_scale * kl_fraction;
  const double value = -loglik + ksf * kl_to_standard_normal(vp);
  if (want_grad) {
    gmu = -gmu + ksf * vp.means;
    gls = -gls +
          ksf * ((2.0 * vp.log_stds.array()).exp() - 1.0).matrix();
    if (grad_mu) *grad_mu = std::move(gmu);
    if (grad_log_std) *grad_log_std = std::move(gls);
  }
  return value;
}

double negative_elbo(const VariationalPosterior& vp, const mdn::MdnArchitecture& arch,
                     const Dataset& data, const TrainConfig& cfg, Rng& rng) {
  if (data.size() == 0) throw std::domain_error("svi: empty dataset");
  std::vector<int> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  const ElboNoise noise = draw_elbo_noise(arch, data.size(), cfg.mc_samples_per_step, rng);
  return negative_elbo_batch(vp, arch, data, rows, cfg.kl_scale, 1.0, noise, nullptr, nullptr);
}

VariationalPosterior train(const VariationalPosterior& vp_init, const mdn::MdnArchitecture& arch,
                           const Dataset& data, const TrainConfig& cfg, Rng& rng,
                           std::vector<double>* loss_trace) {
  const int n = data.size();
  if (n == 0) throw std::domain_error("svi: empty dataset");
  const int p = arch.param_count();
  if (vp_init.means.size() != p || vp_init.log_stds.size() != p)
    throw std::domain_error("svi: posterior size mismatch");

  VariationalPosterior vp = vp_init;
  Eigen::VectorXd m_mu = Eigen::VectorXd::Zero(p), v_mu = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd m_ls = Eigen::VectorXd::Zero(p), v_ls = Eigen::VectorXd::Zero(p);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const int batch = std::min(cfg.batch_size, n);

  long step = 0;
  Eigen::VectorXd gmu, gls;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the run RNG keeps the pass deterministic
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[i], order[j]);
    }
    for (int start = 0; start < n; start += batch) {
      const int nb = std::min(batch, n - start);
      const std::span<const int> rows(order.data() + start, static_cast<size_t>(nb));
      const ElboNoise noise = draw_elbo_noise(arch, nb, cfg.mc_samples_per_step, rng);
      const double loss =
          negative_elbo_batch(vp, arch, data, rows, cfg.kl_scale,
                              static_cast<double>(nb) / n, noise, &gmu, &gls);
      if (!std::isfinite(loss) || !gmu.allFinite() || !gls.allFinite())
        throw TrainingError("svi: non-finite loss or gradient", step);
      if (loss_trace) loss_trace->push_back(loss);

      ++step;
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
      auto adam = [&](Eigen::VectorXd& theta, Eigen::VectorXd& m, Eigen::VectorXd& v,
                      const Eigen::VectorXd& g) {
        m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
        v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
        theta.array() -= cfg.learning_rate * (m.array() / bc1) /
                         ((v.array() / bc2).sqrt() + cfg.adam_eps);
      };
      adam(vp.means, m_mu, v_mu, gmu);
      adam(vp.log_stds, m_ls, v_ls, gls);
    }
  }
  return vp;
}

}  // namespace lfi::svi
