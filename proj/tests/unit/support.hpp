#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>

#include "fawmf/model.hpp"
#include "fawmf/rng.hpp"
#include "fawmf/sparse_matrix.hpp"
#include "fawmf/synthetic.hpp"

namespace fawmf::testing {

struct Instance {
  SparseBinaryMatrix x;
  ModelParams params;
};

// n, m in [lo, hi]; K, D in [2, 8]; density in [0.05, 0.5].
inline Instance random_instance(Rng& rng, std::size_t lo = 3, std::size_t hi = 50) {
  const std::size_t n = lo + rng.below(hi - lo + 1);
  const std::size_t m = lo + rng.below(hi - lo + 1);
  const std::size_t K = 2 + rng.below(7);
  const std::size_t D = 2 + rng.below(7);
  SparseBinaryMatrix x = random_matrix(n, m, rng.uniform(0.05, 0.5), rng);
  return {std::move(x), random_params(n, m, K, D, rng)};
}

inline std::set<Entry> entry_set(const SparseBinaryMatrix& x) {
  const auto e = x.entries();
  return {e.begin(), e.end()};
}

// Scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("fawmf-test-" + tag + "-" + std::to_string(Rng(std::random_device{}()).next()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fawmf::testing
