#pragma once

#include <cstddef>
#include <vector>

#include "fawmf/dense.hpp"

namespace fawmf {

// Per-epoch intermediate tensors of the fast full-batch gradient. The
// reductions are held in extended precision.
//
// Tensor layouts (K = latent factors, D = communities):
//   m_theta[(k*K + l)*D + d] = sum_j v_jk v_jl q_jd
//   m_q    [(k*K + l)*D + d] = sum_i u_ik u_il theta_id
//   m_u    [(d*K + l)*K + r] = sum_j q_jd v_jl v_jr
//   m_v    [(d*K + l)*K + r] = sum_i theta_id u_il u_ir
struct GradientCache {
  std::size_t factors = 0;
  std::size_t communities = 0;

  ExtMatrix theta;        // n x D, softmax of beta
  ExtMatrix consumption;  // m x D, c_j = sum over consumers k of theta_k alpha_k
  ExtMatrix q;            // m x D, clamped sigmoid(w_j c_j + b_j)

  std::vector<Extended> m_theta;
  std::vector<Extended> s_theta;  // D, sum_j q_j
  std::vector<Extended> m_q;
  std::vector<Extended> s_q;      // D, sum_i theta_i
  std::vector<Extended> m_u;
  std::vector<Extended> m_v;

  ExtMatrix dj_dq;  // m x D

  std::size_t kkd(std::size_t k, std::size_t l, std::size_t d) const {
    return (k * factors + l) * communities + d;
  }
  std::size_t dkk(std::size_t d, std::size_t l, std::size_t r) const {
    return (d * factors + l) * factors + r;
  }
};

}  // namespace fawmf
