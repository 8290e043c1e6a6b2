#include "lfi/mdn.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "lfi/numerics.hpp"

namespace lfi::mdn {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;

void check_sizes(const MdnArchitecture& arch, const Eigen::VectorXd& w,
                 const Eigen::VectorXd& input) {
  if (w.size() != arch.param_count()) throw std::domain_error("mdn: weight vector length mismatch");
  if (input.size() != arch.input_dim) throw std::domain_error("mdn: input dimension mismatch");
}

Eigen::VectorXd hidden_activations(const MdnArchitecture& arch, const Eigen::VectorXd& w,
                                   const Eigen::VectorXd& input) {
  const int h = arch.hidden_units, i = arch.input_dim;
  ConstRowMap w1(w.data(), h, i);
  Eigen::Map<const Eigen::VectorXd> b1(w.data() + h * i, h);
  return ((w1 * input + b1).array().tanh()).matrix();
}

Eigen::VectorXd head_outputs(const MdnArchitecture& arch, std::span<const double> head_w,
                             const Eigen::VectorXd& hidden) {
  const int o = arch.head_rows(), h = arch.hidden_units;
  ConstRowMap w2(head_w.data(), o, h);
  Eigen::Map<const Eigen::VectorXd> b2(head_w.data() + o * h, o);
  return w2 * hidden + b2;
}

// Build the lower-triangular factor for component k from raw head outputs.
Eigen::MatrixXd scale_from_raw(const MdnArchitecture& arch, const Eigen::VectorXd& o, int k) {
  const int d = arch.output_dim, kk = arch.components, t = arch.tri();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(d, d);
  int idx = kk + kk * d + k * t;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j, ++idx) {
      l(i, j) = (i == j) ? std::max(std::exp(o(idx)), kScaleDiagFloor) : o(idx);
    }
  }
  return l;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

// log N(target; mean, L L^T) and the whitened residual z = L^{-1}(target - mean)
double gaussian_log_density(const Eigen::MatrixXd& l, const Eigen::VectorXd& mean,
                            const Eigen::VectorXd& target, Eigen::VectorXd* z_out) {
  Eigen::VectorXd z = l.triangularView<Eigen::Lower>().solve(target - mean);
  const double logdet = l.diagonal().array().log().sum();
  if (z_out) *z_out = std::move(z);
  const Eigen::VectorXd& zr = z_out ? *z_out : z;
  return -0.5 * zr.squaredNorm() - logdet - 0.5 * l.rows() * kLogTwoPi;
}

}  // namespace

MixtureParams mixture_from_hidden(const MdnArchitecture& arch, std::span<const double> head_w,
                                  const Eigen::VectorXd& hidden) {
  if (static_cast<int>(head_w.size()) != arch.head_params())
    throw std::domain_error("mdn: head weight length mismatch");
  const int k = arch.components, d = arch.output_dim;
  const Eigen::VectorXd o = head_outputs(arch, head_w, hidden);

  MixtureParams mix;
  mix.mixing = softmax(o.head(k));
  mix.means.reserve(k);
  mix.scales.reserve(k);
  for (int c = 0; c < k; ++c) {
    mix.means.push_back(o.segment(k + c * d, d));
    mix.scales.push_back(scale_from_raw(arch, o, c));
  }
  return mix;
}

MixtureParams forward(const MdnArchitecture& arch, const Eigen::VectorXd& w,
                      const Eigen::VectorXd& input) {
  check_sizes(arch, w, input);
  const Eigen::VectorXd h = hidden_activations(arch, w, input);
  return mixture_from_hidden(
      arch, std::span<const double>(w.data() + arch.hidden_params(), arch.head_params()), h);
}

double log_prob(const MixtureParams& mix, const Eigen::VectorXd& target) {
  const int k = static_cast<int>(mix.mixing.size());
  if (k == 0 || target.size() != mix.means.at(0).size())
    throw std::domain_error("mdn: target dimension mismatch");
  Eigen::VectorXd comps(k);
  for (int c = 0; c < k; ++c) {
    const double lw = mix.mixing(c) > 0.0 ? std::log(mix.mixing(c)) : kNegInf;
    comps(c) = lw + gaussian_log_density(mix.scales[c], mix.means[c], target, nullptr);
  }
  return numerics::log_sum_exp(comps);
}

Eigen::VectorXd sample(const MixtureParams& mix, Rng& rng) {
  const int k = static_cast<int>(mix.mixing.size());
  const double u = rng.uniform();
  int c = k - 1;
  double cum = 0.0;
  for (int i = 0; i < k; ++i) {
    cum += mix.mixing(i);
    if (u < cum) {
      c = i;
      break;
    }
  }
  const int d = static_cast<int>(mix.means[c].size());
  Eigen::VectorXd z(d);
  for (int i = 0; i < d; ++i) z(i) = rng.normal();
  return mix.means[c] + mix.scales[c] * z;
}

double log_density(const MdnArchitecture& arch, const Eigen::VectorXd& w,
                   const Eigen::VectorXd& input, const Eigen::VectorXd& target) {
  check_sizes(arch, w, input);
  if (target.size() != arch.output_dim) throw std::domain_error("mdn: target dimension mismatch");
  const Eigen::VectorXd h = hidden_activations(arch, w, input);
  const Eigen::VectorXd o = head_outputs(
      arch, std::span<const double>(w.data() + arch.hidden_params(), arch.head_params()), h);

  const int k = arch.components, d = arch.output_dim;
  const Eigen::VectorXd logits = o.head(k);
  const double lse_logits = numerics::log_sum_exp(logits);
  Eigen::VectorXd comps(k);
  for (int c = 0; c < k; ++c) {
    const Eigen::MatrixXd l = scale_from_raw(arch, o, c);
    comps(c) = (logits(c) - lse_logits) +
               gaussian_log_density(l, o.segment(k + c * d, d), target, nullptr);
  }
  return numerics::log_sum_exp(comps);
}

double head_log_prob_grad(const MdnArchitecture& arch, std::span<const double> head_w,
                          const Eigen::VectorXd& hidden, const Eigen::VectorXd& target,
                          double coeff, std::span<double> grad_head,
                          Eigen::VectorXd* grad_hidden) {
  if (static_cast<int>(head_w.size()) != arch.head_params())
    throw std::domain_error("mdn: head weight length mismatch");
  if (target.size() != arch.output_dim) throw std::domain_error("mdn: target dimension mismatch");
  const int k = arch.components, d = arch.output_dim, t = arch.tri();
  const int o_rows = arch.head_rows(), h_units = arch.hidden_units;

  const Eigen::VectorXd o = head_outputs(arch, head_w, hidden);
  const Eigen::VectorXd logits = o.head(k);
  const Eigen::VectorXd pi = softmax(logits);

  Eigen::MatrixXd zs(d, k);
  std::vector<Eigen::MatrixXd> ls;
  ls.reserve(k);
  Eigen::VectorXd comps(k);
  for (int c = 0; c < k; ++c) {
    ls.push_back(scale_from_raw(arch, o, c));
    Eigen::VectorXd z;
    const double g = gaussian_log_density(ls[c], o.segment(k + c * d, d), target, &z);
    zs.col(c) = z;
    comps(c) = (pi(c) > 0.0 ? std::log(pi(c)) : kNegInf) + g;
  }
  const double lp = numerics::log_sum_exp(comps);

  const bool want_grad = !grad_head.empty() || grad_hidden != nullptr;
  if (!want_grad) return lp;

  // responsibilities
  Eigen::VectorXd r(k);
  for (int c = 0; c < k; ++c) r(c) = std::exp(comps(c) - lp);

  Eigen::VectorXd g_o = Eigen::VectorXd::Zero(o_rows);
  g_o.head(k) = coeff * (r - pi);

  for (int c = 0; c < k; ++c) {
    const Eigen::MatrixXd& l = ls[c];
    // wv = Sigma^{-1} (target - mean)
    const Eigen::VectorXd wv = l.transpose().triangularView<Eigen::Upper>().solve(zs.col(c));
    g_o.segment(k + c * d, d) = (coeff * r(c)) * wv;

    // d logN / dL = wv wv^T L - diag(1/L_ii), lower triangle
    const Eigen::VectorXd u = l.transpose() * wv;
    int idx = k + k * d + c * t;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j <= i; ++j, ++idx) {
        double g = wv(i) * u(j);
        if (i == j) {
          if (l(i, i) <= kScaleDiagFloor) {
            g_o(idx) = 0.0;  // floored diagonal, exp branch inactive
            continue;
          }
          g = g * l(i, i) - 1.0;  // chain through L_ii = exp(v)
        }
        g_o(idx) = coeff * r(c) * g;
      }
    }
  }

  if (!grad_head.empty()) {
    if (static_cast<int>(grad_head.size()) != arch.head_params())
      throw std::domain_error("mdn: grad_head length mismatch");
    Eigen::Map<RowMat> gw2(grad_head.data(), o_rows, h_units);
    Eigen::Map<Eigen::VectorXd> gb2(grad_head.data() + o_rows * h_units, o_rows);
    gw2.noalias() += g_o * hidden.transpose();
    gb2 += g_o;
  }
  if (grad_hidden) {
    ConstRowMap w2(head_w.data(), o_rows, h_units);
    *grad_hidden = w2.transpose() * g_o;
  }
  return lp;
}

Eigen::VectorXd log_prob_grad(const MdnArchitecture& arch, const Eigen::VectorXd& w,
                              const Eigen::VectorXd& input, const Eigen::VectorXd& target) {
  check_sizes(arch, w, input);
  const int h = arch.hidden_units, i = arch.input_dim;
  const Eigen::VectorXd hid = hidden_activations(arch, w, input);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(arch.param_count());
  Eigen::VectorXd grad_hidden;
  head_log_prob_grad(arch,
                     std::span<const double>(w.data() + arch.hidden_params(), arch.head_params()),
                     hid, target, 1.0,
                     std::span<double>(grad.data() + arch.hidden_params(), arch.head_params()),
                     &grad_hidden);

  const Eigen::VectorXd g_pre = grad_hidden.array() * (1.0 - hid.array().square());
  Eigen::Map<RowMat> gw1(grad.data(), h, i);
  Eigen::Map<Eigen::VectorXd> gb1(grad.data() + h * i, h);
  gw1.noalias() = g_pre * input.transpose();
  gb1 = g_pre;
  return grad;
}

}  // namespace lfi::mdn
