#pragma once

#include <cstddef>
#include <cstdint>

#include "fawmf/model.hpp"
#include "fawmf/rng.hpp"
#include "fawmf/sparse_matrix.hpp"

namespace fawmf {

/// Each cell is positive independently with probability `density`.
SparseBinaryMatrix random_matrix(std::size_t n, std::size_t m, double density, Rng& rng);

/// Exactly `nnz` distinct positives placed uniformly at random.
SparseBinaryMatrix random_matrix_with_nnz(std::size_t n, std::size_t m, std::size_t nnz, Rng& rng);

/// Users split into `groups` clusters, each preferring a disjoint slice of the
/// catalogue: in-slice cells are positive with probability p_in, the rest
/// with p_out.
SparseBinaryMatrix clustered_matrix(std::size_t n, std::size_t m, std::size_t groups,
                                    double p_in, double p_out, Rng& rng);

/// Parameters spread well away from init values so every gradient path is
/// exercised: beta, w, b ~ U(-1, 1); alpha ~ U(0.5, 1.5); U, V ~ U(-0.5, 0.5).
ModelParams random_params(std::size_t n, std::size_t m, std::size_t K, std::size_t D, Rng& rng);

}  // namespace fawmf
