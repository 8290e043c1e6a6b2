#ifndef LFI_MDN_HPP
#define LFI_MDN_HPP

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "lfi/rng.hpp"

namespace lfi::mdn {

// Single-hidden-layer mixture density network: tanh hidden units feeding
// affine heads for mixing logits, component means, and unconstrained
// Cholesky entries of full covariances.
//
// Flat weight layout (length param_count()):
//   [0, H*I)            hidden weights, row-major H x I
//   [H*I, H*(I+1))      hidden biases
//   [H*(I+1), ...)      head weights, row-major O x H, then O biases,
//                       where O = K + K*D + K*T and head row order is
//                       logits (K), means (K blocks of D), Cholesky
//                       entries (K blocks of T, lower triangle row-major)
struct MdnArchitecture {
  int input_dim = 1;
  int output_dim = 1;
  int hidden_units = 50;
  int components = 5;

  int tri() const { return output_dim * (output_dim + 1) / 2; }
  int head_rows() const { return components * (1 + output_dim + tri()); }
  int hidden_params() const { return hidden_units * (input_dim + 1); }
  int head_params() const { return head_rows() * (hidden_units + 1); }
  int param_count() const { return hidden_params() + head_params(); }

  bool operator==(const MdnArchitecture&) const = default;
};

struct MixtureParams {
  Eigen::VectorXd mixing;               // K, sums to 1
  std::vector<Eigen::VectorXd> means;   // K vectors of output_dim
  std::vector<Eigen::MatrixXd> scales;  // K lower-triangular Cholesky factors
};

// Floor applied to Cholesky diagonals after exponentiation.
inline constexpr double kScaleDiagFloor = 1e-12;

MixtureParams forward(const MdnArchitecture& arch, const Eigen::VectorXd& w,
                      const Eigen::VectorXd& input);

double log_prob(const MixtureParams& mix, const Eigen::VectorXd& target);

Eigen::VectorXd sample(const MixtureParams& mix, Rng& rng);

// Exact gradient of log_prob(forward(w, input), target) with respect to w.
Eigen::VectorXd log_prob_grad(const MdnArchitecture& arch, const Eigen::VectorXd& w,
                              const Eigen::VectorXd& input, const Eigen::VectorXd& target);

// forward + log_prob without materializing MixtureParams; hot path for
// ensemble evaluation.
double log_density(const MdnArchitecture& arch, const Eigen::VectorXd& w,
                   const Eigen::VectorXd& input, const Eigen::VectorXd& target);

// Pieces below operate on the head block given hidden activations; the
// SVI module uses them to sample hidden pre-activations separately from
// head weights.

MixtureParams mixture_from_hidden(const MdnArchitecture& arch,
                                  std::span<const double> head_w,
                                  const Eigen::VectorXd& hidden);

// Returns log_prob of target under the mixture defined by (head_w, hidden).
// Accumulates coeff * d(logp)/d(head_w) into grad_head (length
// head_params()) and writes coeff * d(logp)/d(hidden) into grad_hidden.
// Either gradient output may be empty/null to skip it.
double head_log_prob_grad(const MdnArchitecture& arch, std::span<const double> head_w,
                          const Eigen::VectorXd& hidden, const Eigen::VectorXd& target,
                          double coeff, std::span<double> grad_head,
                          Eigen::VectorXd* grad_hidden);

}  // namespace lfi::mdn

#endif
