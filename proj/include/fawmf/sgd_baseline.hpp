#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fawmf/fbgd.hpp"
#include "fawmf/model.hpp"
#include "fawmf/rng.hpp"
#include "fawmf/sparse_matrix.hpp"

namespace fawmf {

// Negative-sampling stochastic learners used as comparison points for fBGD.

enum class SamplerKind { uniform, itempop };

struct SamplerConfig {
  SamplerKind kind = SamplerKind::uniform;
  std::size_t ratio = 1;  // negatives drawn per positive
  std::uint64_t seed = 1;
};

struct NegativeSample {
  std::vector<Entry> pairs;
  /// Draws that landed on a user with nothing left to sample.
  std::size_t skipped_users = 0;
};

/// ratio * nnz pairs drawn with replacement from unobserved cells. The user is
/// uniform; the item is uniform (kind = uniform) or proportional to
/// popularity (kind = itempop), redrawn while it is a positive of that user.
NegativeSample sample_negatives(const SparseBinaryMatrix& x, const SamplerConfig& cfg,
                                std::span<const std::size_t> popularity, Rng& rng);
NegativeSample sample_negatives(const SparseBinaryMatrix& x, const SamplerConfig& cfg,
                                std::span<const std::size_t> popularity);

struct SgdEpochStats {
  std::size_t instances = 0;
  std::size_t skipped_users = 0;
};

/// One pass over all positives plus a fresh negative sample, shuffled. Each
/// instance (i, j) takes a gradient step on
///   l_ij = gamma_ij (u_i.v_j - x_ij)^2 + (1 - gamma_ij)(eps - x_ij)^2
/// for u_i, v_j, w_j, b_j, beta_i and, for positives, alpha_i. The column
/// aggregate c_j is recomputed from current parameters but held constant
/// inside the step, so no other user's parameters move.
SgdEpochStats sgd_epoch(ModelParams& params, const SparseBinaryMatrix& x, const SamplerConfig& cfg,
                        std::span<const std::size_t> popularity, double lr,
                        const ObjectiveConfig& obj, Rng& rng);

/// Epoch e draws from Rng(derive_seed(cfg.seed, "sgd-epoch-<e>")). The
/// recorded objective is taken before each epoch, by objective_naive when
/// n*m fits the naive guard and objective_fast otherwise.
TrainResult sgd_train(ModelParams params, const SparseBinaryMatrix& x, const SamplerConfig& cfg,
                      const HyperParams& hyper, const StopRule& stop);

}  // namespace fawmf
