#include "fawmf/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fawmf/errors.hpp"
#include "reference_objective.hpp"
#include "fawmf/rng.hpp"

namespace fawmf {

void HyperParams::validate() const {
  if (factors < 1) throw DomainError("K (factors) must be >= 1");
  if (communities < 1) throw DomainError("D (communities) must be >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("epsilon must lie in (0, 1)");
  if (!(learning_rate > 0.0)) throw DomainError("learning rate must be positive");
  if (!(sigma_clamp > 0.0 && sigma_clamp < 0.5)) throw DomainError("sigma_clamp must lie in (0, 0.5)");
  if (std::isnan(rel_tol) || rel_tol < 0.0) throw DomainError("rel_tol must be non-negative");
}

bool ModelParams::consistent() const {
  const std::size_t n = n_users();
  const std::size_t m = n_items();
  if (alpha.size() != n || user_factors.rows() != n) return false;
  if (w.size() != m || b.size() != m) return false;
  if (item_factors.cols() != user_factors.cols()) return false;
  auto finite = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
  };
  return finite(beta.values()) && finite(alpha) && finite(w) && finite(b) &&
         finite(user_factors.values()) && finite(item_factors.values());
}

ModelParams init_params(const HyperParams& hyper, std::size_t n_users, std::size_t n_items) {
  hyper.validate();
  if (n_users < 1 || n_items < 1) throw DomainError("model needs at least one user and one item");
  const std::size_t K = hyper.factors;
  const std::size_t D = hyper.communities;
  Rng rng(hyper.seed);

  ModelParams p;
  p.beta = Matrix(n_users, D);
  for (double& v : p.beta.values()) v = rng.uniform(-0.01, 0.01);
  const double scale = 0.5 / std::sqrt(static_cast<double>(K));
  p.user_factors = Matrix(n_users, K);
  for (double& v : p.user_factors.values()) v = rng.uniform(-scale, scale);
  p.item_factors = Matrix(n_items, K);
  for (double& v : p.item_factors.values()) v = rng.uniform(-scale, scale);
  p.alpha.assign(n_users, 1.0);
  p.w.assign(n_items, 1.0);
  p.b.assign(n_items, 0.0);
  return p;
}

void softmax_row(std::span<const double> logits, std::span<double> out) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t d = 0; d < logits.size(); ++d) {
    out[d] = std::exp(logits[d] - top);
    total += out[d];
  }
  for (double& v : out) v /= total;
}

Matrix softmax_rows(const Matrix& beta) {
  Matrix theta(beta.rows(), beta.cols());
  for (std::size_t i = 0; i < beta.rows(); ++i) softmax_row(beta.row(i), theta.row(i));
  return theta;
}

double clamped_sigmoid(double z, double clamp) {
  const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return std::clamp(s, clamp, 1.0 - clamp);
}

void item_consumption(const ModelParams& params, const Matrix& theta, const SparseBinaryMatrix& x,
                      std::size_t item, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (Index k : x.col(item)) {
    const auto th = theta.row(k);
    const double a = params.alpha[k];
    for (std::size_t d = 0; d < out.size(); ++d) out[d] += th[d] * a;
  }
}

void community_activation(const ModelParams& params, const Matrix& theta,
                          const SparseBinaryMatrix& x, std::size_t item, double sigma_clamp,
                          std::span<double> out) {
  item_consumption(params, theta, x, item, out);
  for (double& v : out) v = clamped_sigmoid(params.w[item] * v + params.b[item], sigma_clamp);
}

std::vector<double> community_activation(const ModelParams& params, const SparseBinaryMatrix& x,
                                         std::size_t item, double sigma_clamp) {
  // Only the consumers' memberships are needed.
  const std::size_t D = params.communities();
  Matrix theta(params.n_users(), D);
  for (Index k : x.col(item)) softmax_row(params.beta.row(k), theta.row(k));
  std::vector<double> q(D);
  community_activation(params, theta, x, item, sigma_clamp, q);
  return q;
}

long double objective_naive_extended(const ModelParams& params, const SparseBinaryMatrix& x,
                                     const ObjectiveConfig& cfg) {
  return reference_objective<long double>(params, x, cfg);
}

double objective_naive(const ModelParams& params, const SparseBinaryMatrix& x,
                       const ObjectiveConfig& cfg) {
  return static_cast<double>(objective_naive_extended(params, x, cfg));
}

double objective_fast(const ModelParams& params, const GradientCache& cache,
                      const SparseBinaryMatrix& x, const ObjectiveConfig& cfg) {
  const std::size_t n = params.n_users();
  const std::size_t m = params.n_items();
  const std::size_t K = params.factors();
  const std::size_t D = params.communities();
  const Extended eps = cfg.epsilon;

  // sum_ij gamma_ij (u_i.v_j)^2 = sum_j sum_kl v_jk v_jl (q_j . M_q[k][l])
  Extended weighted_sq = 0;
  // sum_ij gamma_ij = sum_j q_j . S_q
  Extended exposure_mass = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const auto v = params.item_factors.row(j);
    const auto qj = cache.q.row(j);
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t l = 0; l < K; ++l) {
        const Extended* mq = &cache.m_q[cache.kkd(k, l, 0)];
        Extended acc = 0;
        for (std::size_t d = 0; d < D; ++d) acc += qj[d] * mq[d];
        weighted_sq += static_cast<Extended>(v[k]) * v[l] * acc;
      }
    }
    for (std::size_t d = 0; d < D; ++d) exposure_mass += qj[d] * cache.s_q[d];
  }

  // Positives replace gamma s^2 + (1-gamma) eps^2 by
  // gamma (s-1)^2 + (1-gamma)(eps-1)^2, a difference of
  // gamma (1 - 2s) + (1 - gamma)(1 - 2 eps).
  Extended correction = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto u = params.user_factors.row(i);
    const auto th = cache.theta.row(i);
    for (Index j : x.row(i)) {
      const Extended s = dot_ext(u, params.item_factors.row(j));
      const Extended gamma = dot_ext(th, cache.q.row(j));
      correction += gamma * (1 - 2 * s) + (1 - gamma) * (1 - 2 * eps);
    }
  }

  const Extended pairs = static_cast<Extended>(n) * static_cast<Extended>(m);
  return static_cast<double>(weighted_sq + eps * eps * (pairs - exposure_mass) + correction);
}

}  // namespace fawmf
