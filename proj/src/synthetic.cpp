#include "fawmf/synthetic.hpp"

#include <algorithm>
#include <unordered_set>
#include <vector>

#include "fawmf/errors.hpp"

namespace fawmf {

SparseBinaryMatrix random_matrix(std::size_t n, std::size_t m, double density, Rng& rng) {
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (rng.uniform01() < density) entries.emplace_back(i, j);
    }
  }
  return SparseBinaryMatrix(n, m, std::move(entries));
}

SparseBinaryMatrix random_matrix_with_nnz(std::size_t n, std::size_t m, std::size_t nnz, Rng& rng) {
  if (nnz > n * m) throw DomainError("requested more positives than cells");
  std::unordered_set<std::uint64_t> seen;
  std::vector<Entry> entries;
  entries.reserve(nnz);
  while (entries.size() < nnz) {
    const auto cell = rng.below(static_cast<std::uint64_t>(n) * m);
    if (seen.insert(cell).second) entries.emplace_back(cell / m, cell % m);
  }
  return SparseBinaryMatrix(n, m, std::move(entries));
}

SparseBinaryMatrix clustered_matrix(std::size_t n, std::size_t m, std::size_t groups,
                                    double p_in, double p_out, Rng& rng) {
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t g = i % groups;
    for (std::size_t j = 0; j < m; ++j) {
      const bool preferred = j * groups / m == g;
      if (rng.uniform01() < (preferred ? p_in : p_out)) entries.emplace_back(i, j);
    }
  }
  return SparseBinaryMatrix(n, m, std::move(entries));
}

ModelParams random_params(std::size_t n, std::size_t m, std::size_t K, std::size_t D, Rng& rng) {
  ModelParams p;
  p.beta = Matrix(n, D);
  for (double& v : p.beta.values()) v = rng.uniform(-1.0, 1.0);
  p.alpha.resize(n);
  for (double& v : p.alpha) v = rng.uniform(0.5, 1.5);
  p.w.resize(m);
  for (double& v : p.w) v = rng.uniform(-1.0, 1.0);
  p.b.resize(m);
  for (double& v : p.b) v = rng.uniform(-1.0, 1.0);
  p.user_factors = Matrix(n, K);
  for (double& v : p.user_factors.values()) v = rng.uniform(-0.5, 0.5);
  p.item_factors = Matrix(m, K);
  for (double& v : p.item_factors.values()) v = rng.uniform(-0.5, 0.5);
  return p;
}

}  // namespace fawmf
