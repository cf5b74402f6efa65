#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace fawmf {

using Index = std::uint32_t;
using Entry = std::pair<Index, Index>;  // (user, item)

// Binary user-item matrix stored twice: compressed rows (items consumed by
// each user) and compressed columns (users consuming each item). Both index
// lists are strictly increasing.
class SparseBinaryMatrix {
 public:
  SparseBinaryMatrix() = default;
  SparseBinaryMatrix(std::size_t n_users, std::size_t n_items);
  /// Duplicates collapse; throws DomainError on out-of-range ids.
  SparseBinaryMatrix(std::size_t n_users, std::size_t n_items, std::vector<Entry> entries);

  std::size_t n_users() const { return n_users_; }
  std::size_t n_items() const { return n_items_; }
  std::size_t nnz() const { return row_items_.size(); }

  std::span<const Index> row(std::size_t user) const {
    return {row_items_.data() + row_offsets_[user], row_items_.data() + row_offsets_[user + 1]};
  }
  std::span<const Index> col(std::size_t item) const {
    return {col_users_.data() + col_offsets_[item], col_users_.data() + col_offsets_[item + 1]};
  }

  bool contains(std::size_t user, std::size_t item) const;

  /// All positives in row-major order.
  std::vector<Entry> entries() const;

  friend bool operator==(const SparseBinaryMatrix&, const SparseBinaryMatrix&) = default;

 private:
  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<Index> row_items_;
  std::vector<std::size_t> col_offsets_{0};
  std::vector<Index> col_users_;
};

}  // namespace fawmf
