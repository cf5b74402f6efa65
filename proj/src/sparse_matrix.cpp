#include "fawmf/sparse_matrix.hpp"

#include <algorithm>
#include <string>

#include "fawmf/errors.hpp"

namespace fawmf {

SparseBinaryMatrix::SparseBinaryMatrix(std::size_t n_users, std::size_t n_items)
    : n_users_(n_users),
      n_items_(n_items),
      row_offsets_(n_users + 1, 0),
      col_offsets_(n_items + 1, 0) {}

SparseBinaryMatrix::SparseBinaryMatrix(std::size_t n_users, std::size_t n_items,
                                       std::vector<Entry> entries)
    : SparseBinaryMatrix(n_users, n_items) {
  for (const auto& [u, i] : entries) {
    if (u >= n_users || i >= n_items) {
      throw DomainError("entry (" + std::to_string(u) + ", " + std::to_string(i) +
                        ") outside " + std::to_string(n_users) + "x" + std::to_string(n_items));
    }
  }
  std::sort(entries.begin(), entries.end());
  entries.erase(std::unique(entries.begin(), entries.end()), entries.end());

  row_items_.reserve(entries.size());
  for (const auto& [u, i] : entries) {
    ++row_offsets_[u + 1];
    ++col_offsets_[i + 1];
    row_items_.push_back(i);
  }
  for (std::size_t u = 0; u < n_users; ++u) row_offsets_[u + 1] += row_offsets_[u];
  for (std::size_t i = 0; i < n_items; ++i) col_offsets_[i + 1] += col_offsets_[i];

  // Row-major traversal visits users in increasing order, so each column
  // list comes out sorted.
  col_users_.resize(entries.size());
  std::vector<std::size_t> cursor(col_offsets_.begin(), col_offsets_.end() - 1);
  for (const auto& [u, i] : entries) col_users_[cursor[i]++] = u;
}

bool SparseBinaryMatrix::contains(std::size_t user, std::size_t item) const {
  if (user >= n_users_) return false;
  const auto items = row(user);
  return std::binary_search(items.begin(), items.end(), static_cast<Index>(item));
}

std::vector<Entry> SparseBinaryMatrix::entries() const {
  std::vector<Entry> out;
  out.reserve(nnz());
  for (std::size_t u = 0; u < n_users_; ++u) {
    for (Index i : row(u)) out.emplace_back(static_cast<Index>(u), i);
  }
  return out;
}

}  // namespace fawmf
