#pragma once

// Reference objective shared by objective_naive (long double) and the
// finite-difference oracle (__float128). Direct double loop over all pairs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <quadmath.h>

#include "fawmf/model.hpp"

namespace fawmf {

inline long double real_exp(long double v) { return std::exp(v); }
inline __float128 real_exp(__float128 v) { return expq(v); }

template <typename Real>
Real reference_objective(const ModelParams& params, const SparseBinaryMatrix& x,
                         const ObjectiveConfig& cfg) {
  const std::size_t n = params.n_users();
  const std::size_t m = params.n_items();
  const std::size_t K = params.factors();
  const std::size_t D = params.communities();

  std::vector<Real> theta(n * D);
  for (std::size_t i = 0; i < n; ++i) {
    const auto logits = params.beta.row(i);
    const Real top = *std::max_element(logits.begin(), logits.end());
    Real total = 0;
    for (std::size_t d = 0; d < D; ++d) {
      theta[i * D + d] = real_exp(static_cast<Real>(logits[d]) - top);
      total += theta[i * D + d];
    }
    for (std::size_t d = 0; d < D; ++d) theta[i * D + d] /= total;
  }

  const Real lo = cfg.sigma_clamp;
  const Real hi = Real{1} - static_cast<Real>(cfg.sigma_clamp);
  std::vector<Real> q(m * D);
  std::vector<Real> c(D);
  for (std::size_t j = 0; j < m; ++j) {
    std::fill(c.begin(), c.end(), Real{0});
    for (std::size_t k = 0; k < n; ++k) {
      const Real xkj = x.contains(k, j) ? 1 : 0;
      for (std::size_t d = 0; d < D; ++d) c[d] += theta[k * D + d] * params.alpha[k] * xkj;
    }
    for (std::size_t d = 0; d < D; ++d) {
      const Real z = static_cast<Real>(params.w[j]) * c[d] + static_cast<Real>(params.b[j]);
      q[j * D + d] = std::clamp(Real{1} / (Real{1} + real_exp(-z)), lo, hi);
    }
  }

  const Real eps = cfg.epsilon;
  Real total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto u = params.user_factors.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const auto v = params.item_factors.row(j);
      Real s = 0;
      for (std::size_t k = 0; k < K; ++k) s += static_cast<Real>(u[k]) * v[k];
      Real gamma = 0;
      for (std::size_t d = 0; d < D; ++d) gamma += theta[i * D + d] * q[j * D + d];
      const Real xij = x.contains(i, j) ? 1 : 0;
      total += gamma * (s - xij) * (s - xij) + (1 - gamma) * (eps - xij) * (eps - xij);
    }
  }
  return total;
}


}  // namespace fawmf
