#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace fawmf {

// Extended-precision accumulator type of the gradient caches.
using Extended = long double;

// Row-major dense matrix.
template <typename T>
class BasicMatrix {
 public:
  BasicMatrix() = default;
  BasicMatrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  T operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  void fill(T v) { data_.assign(data_.size(), v); }

  friend bool operator==(const BasicMatrix&, const BasicMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = BasicMatrix<double>;
using ExtMatrix = BasicMatrix<Extended>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// Inner product accumulated in extended precision; accepts spans of double
// or Extended on either side.
template <typename A, typename B>
Extended dot_ext(const A& a, const B& b) {
  assert(a.size() == b.size());
  Extended s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += static_cast<Extended>(a[k]) * b[k];
  return s;
}

}  // namespace fawmf
