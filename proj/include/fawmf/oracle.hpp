#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fawmf/fbgd.hpp"
#include "fawmf/model.hpp"
#include "fawmf/sparse_matrix.hpp"

namespace fawmf {

// Reference implementations. Slow, single-threaded, no rearranged sums.

inline constexpr std::size_t kNaivePairLimit = 1'000'000;

/// Every gradient by direct summation over all n*m pairs, with X treated as a
/// dense 0/1 matrix. Throws DomainError when n*m exceeds kNaivePairLimit.
GradientSet gradients_naive(const ModelParams& params, const SparseBinaryMatrix& x,
                            const ObjectiveConfig& cfg);

/// One plain BGD epoch driven by the naive objective and gradients.
EpochStats naive_step(ModelParams& params, const SparseBinaryMatrix& x, double lr,
                      const ObjectiveConfig& cfg);

struct Coordinate {
  ParamGroup group;
  std::size_t index;  // flat row-major index inside the group
};

/// Central difference (J(p + h e) - J(p - h e)) / 2h of objective_naive.
/// Perturbing beta goes through the softmax, so the check covers theta's
/// Jacobian as well.
double finite_diff(const ModelParams& params, const SparseBinaryMatrix& x,
                   const ObjectiveConfig& cfg, Coordinate coord, double h);

struct GradCheckOptions {
  double fast_tol = 1e-10;
  double fd_tol = 1e-4;
  double fd_step = 1e-5;
  std::size_t fd_samples = 200;  // per group
  std::uint64_t seed = 7;
};

struct GroupCheck {
  ParamGroup group = ParamGroup::beta;
  std::size_t compared = 0;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
};

struct GradCheckReport {
  std::vector<GroupCheck> fast_vs_naive;
  std::vector<GroupCheck> naive_vs_fd;
  GradCheckOptions options;
  bool pass = false;

  /// Group with the largest tolerance violation, or nullptr on a pass.
  const GroupCheck* worst_failure() const;

  void write_text(std::ostream& out) const;
  std::string to_json() const;
};

/// Relative error uses max(|reference|, 1e-12) as denominator.
GroupCheck compare_group(ParamGroup group, std::span<const double> candidate,
                         std::span<const double> reference);

GradCheckReport grad_check(const ModelParams& params, const SparseBinaryMatrix& x,
                           const ObjectiveConfig& cfg, const GradCheckOptions& opts = {});

/// Variant that certifies a caller-supplied gradient in place of the fast
/// path's output (fault-injection and external implementations).
GradCheckReport grad_check(const ModelParams& params, const SparseBinaryMatrix& x,
                           const ObjectiveConfig& cfg, const GradCheckOptions& opts,
                           const GradientSet& candidate);

}  // namespace fawmf
