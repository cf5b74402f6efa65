#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fawmf/dense.hpp"
#include "fawmf/gradient_cache.hpp"
#include "fawmf/sparse_matrix.hpp"

namespace fawmf {

// The two constants that shape the loss and the exposure network.
struct ObjectiveConfig {
  double epsilon = 1e-5;      // mean of the "not exposed" component
  double sigma_clamp = 1e-8;  // q is clamped into [clamp, 1 - clamp]
};

struct HyperParams {
  std::size_t factors = 20;      // K
  std::size_t communities = 20;  // D
  double epsilon = 1e-5;
  double learning_rate = 0.1;
  std::size_t max_epochs = 100;
  double rel_tol = 1e-6;
  double sigma_clamp = 1e-8;
  std::uint64_t seed = 1;

  /// Throws DomainError when an invariant is violated.
  void validate() const;
  ObjectiveConfig objective() const { return {epsilon, sigma_clamp}; }
};

struct ModelParams {
  Matrix beta;                // n x D membership logits
  std::vector<double> alpha;  // n, user influence
  std::vector<double> w;      // m
  std::vector<double> b;      // m
  Matrix user_factors;        // n x K
  Matrix item_factors;        // m x K

  std::size_t n_users() const { return beta.rows(); }
  std::size_t n_items() const { return item_factors.rows(); }
  std::size_t factors() const { return user_factors.cols(); }
  std::size_t communities() const { return beta.cols(); }

  /// Shapes agree and every entry is finite.
  bool consistent() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// U, V ~ U(-0.5/sqrt(K), 0.5/sqrt(K)); beta ~ U(-0.01, 0.01); alpha = w = 1;
/// b = 0. Draw order: beta, U, V, each row-major, from Rng(hyper.seed).
ModelParams init_params(const HyperParams& hyper, std::size_t n_users, std::size_t n_items);

/// Max-shifted softmax of each row.
Matrix softmax_rows(const Matrix& beta);
void softmax_row(std::span<const double> logits, std::span<double> out);

double clamped_sigmoid(double z, double clamp);

/// c_j = sum of theta_k * alpha_k over the consumers k of item j.
void item_consumption(const ModelParams& params, const Matrix& theta, const SparseBinaryMatrix& x,
                      std::size_t item, std::span<double> out);

/// q_j = clamp(sigmoid(w_j c_j + b_j)), iterating only item j's consumers.
void community_activation(const ModelParams& params, const Matrix& theta,
                          const SparseBinaryMatrix& x, std::size_t item, double sigma_clamp,
                          std::span<double> out);
std::vector<double> community_activation(const ModelParams& params, const SparseBinaryMatrix& x,
                                         std::size_t item, double sigma_clamp);

/// gamma_ij = theta_i . q_j
inline double exposure(std::span<const double> theta_i, std::span<const double> q_j) {
  return dot(theta_i, q_j);
}

inline double predict_score(const ModelParams& params, std::size_t user, std::size_t item) {
  return dot(params.user_factors.row(user), params.item_factors.row(item));
}

/// J = sum_ij gamma_ij (u_i.v_j - x_ij)^2 + (1 - gamma_ij)(eps - x_ij)^2 by an
/// explicit loop over all n*m pairs. Evaluated in extended precision; this is
/// the reference the fast path and the finite-difference checks lean on.
double objective_naive(const ModelParams& params, const SparseBinaryMatrix& x,
                       const ObjectiveConfig& cfg);
/// objective_naive before the final rounding to double.
long double objective_naive_extended(const ModelParams& params, const SparseBinaryMatrix& x,
                                     const ObjectiveConfig& cfg);

/// Same J from a cache built for `params`; O(m K^2 D + |X+| (K + D)).
double objective_fast(const ModelParams& params, const GradientCache& cache,
                      const SparseBinaryMatrix& x, const ObjectiveConfig& cfg);

}  // namespace fawmf
