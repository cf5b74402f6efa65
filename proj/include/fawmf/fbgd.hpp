#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "fawmf/dense.hpp"
#include "fawmf/gradient_cache.hpp"
#include "fawmf/model.hpp"
#include "fawmf/sparse_matrix.hpp"

namespace fawmf {

enum class ParamGroup { beta, alpha, w, b, user_factors, item_factors };
inline constexpr ParamGroup kAllGroups[] = {ParamGroup::beta, ParamGroup::alpha,
                                            ParamGroup::w,    ParamGroup::b,
                                            ParamGroup::user_factors, ParamGroup::item_factors};
std::string_view group_name(ParamGroup g);

std::span<double> group_values(ModelParams& p, ParamGroup g);
std::span<const double> group_values(const ModelParams& p, ParamGroup g);

// dJ for every parameter group, shaped like ModelParams.
struct GradientSet {
  Matrix d_beta;
  std::vector<double> d_alpha;
  std::vector<double> d_w;
  std::vector<double> d_b;
  Matrix d_user_factors;
  Matrix d_item_factors;

  static GradientSet zeros_like(const ModelParams& p);

  std::span<double> values(ParamGroup g);
  std::span<const double> values(ParamGroup g) const;
  double max_abs() const;
  /// Throws NumericError naming the first group holding a non-finite entry.
  void check_finite() const;
};

/// All user and item reductions of one epoch. threads > 1 splits the
/// reductions; the association order then differs from the single-threaded
/// reference by rounding only.
GradientCache build_cache(const ModelParams& params, const SparseBinaryMatrix& x,
                          const ObjectiveConfig& cfg, std::size_t threads = 1);

GradientSet gradients_fast(const ModelParams& params, const GradientCache& cache,
                           const SparseBinaryMatrix& x, const ObjectiveConfig& cfg,
                           std::size_t threads = 1);

struct StepOptions {
  std::size_t threads = 1;
  /// Rescale the whole gradient when its max-abs entry exceeds this; 0 = off.
  double clip_max_norm = 0.0;
};

struct EpochStats {
  double objective = 0.0;  // J before the update
  double grad_max_norm = 0.0;
};

/// p <- p - lr * g for every group at once.
void apply_update(ModelParams& params, const GradientSet& grad, double lr, double clip_max_norm);

/// One fBGD epoch in place: cache, J, gradients, simultaneous update.
EpochStats fbgd_step(ModelParams& params, const SparseBinaryMatrix& x, double lr,
                     const ObjectiveConfig& cfg, const StepOptions& opts = {});

struct EpochResult {
  ModelParams params;
  double objective = 0.0;
};
EpochResult epoch_step(const ModelParams& params, const SparseBinaryMatrix& x, double lr,
                       const ObjectiveConfig& cfg, const StepOptions& opts = {});

struct EpochRecord {
  std::size_t epoch = 0;
  double objective = 0.0;
  double seconds = 0.0;
  double grad_max_norm = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  void write_csv(std::ostream& out) const;
  void write_csv(const std::filesystem::path& path) const;
};

struct StopRule {
  std::size_t max_epochs = 100;
  /// Stop once |J_t - J_{t-1}| / max(J_{t-1}, 1e-12) < rel_tol. Infinity
  /// stops after the first epoch.
  double rel_tol = 1e-6;
};

using EpochFn = std::function<EpochStats(ModelParams&)>;

/// Drives `step` until the stop rule fires; records wall time per epoch.
TrainHistory run_epochs(ModelParams& params, const StopRule& stop, const EpochFn& step);

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

TrainResult train(ModelParams params, const SparseBinaryMatrix& x, const HyperParams& hyper,
                  const StopRule& stop, const StepOptions& opts = {});

}  // namespace fawmf
