#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fawmf/model.hpp"
#include "fawmf/sparse_matrix.hpp"

namespace fawmf {

struct RankedList {
  Index user = 0;
  std::vector<Index> items;    // best first
  std::vector<double> scores;  // non-increasing
  bool short_list = false;     // fewer unmasked items than requested
};

/// Orders every item not in `train.row(user)` by (score desc, item id asc) and
/// keeps the first k_rec. k_rec = 0 keeps the full ranking.
RankedList rank_by_scores(std::span<const double> scores, const SparseBinaryMatrix& train,
                          Index user, std::size_t k_rec);

RankedList top_k(const ModelParams& params, const SparseBinaryMatrix& train, Index user,
                 std::size_t k_rec);

RankedList itempop_recommend(std::span<const std::size_t> popularity,
                             const SparseBinaryMatrix& train, Index user, std::size_t k_rec);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

/// `consumed` is Con(u) and must be non-empty (DomainError otherwise).
PrecisionRecall precision_recall_at_k(const RankedList& rec, std::span<const Index> consumed,
                                      std::size_t k);
double ndcg_at_k(const RankedList& rec, std::span<const Index> consumed, std::size_t k);
/// Sum over consumed items of 1 / rank in the full ranking. Throws
/// DomainError when a consumed item is absent from the ranking.
double mrr(std::span<const Index> full_ranking, std::span<const Index> consumed);

struct UserMetrics {
  Index user = 0;
  std::size_t n_test = 0;
  double precision = 0.0;
  double recall = 0.0;
  double ndcg = 0.0;
  double mrr = 0.0;
};

struct MetricsReport {
  std::size_t k = 5;
  double pre_at_k = 0.0;
  double rec_at_k = 0.0;
  double ndcg_at_k = 0.0;
  double mrr = 0.0;
  std::size_t users_evaluated = 0;
  std::vector<UserMetrics> per_user;

  /// `metric,k,value` rows: Pre@K, Rec@K, NDCG@K and MRR (blank k).
  void write_csv(std::ostream& out) const;
  void write_per_user_csv(std::ostream& out) const;
  std::string to_json() const;
};

/// Fills `scores` (length n_items) for one user.
using Scorer = std::function<void(Index user, std::span<double> scores)>;

/// Averages the per-user metrics over users with a non-empty test row. Train
/// positives are masked. Throws DomainError when no user has test items.
MetricsReport evaluate_scorer(const Scorer& scorer, const SparseBinaryMatrix& train,
                              const SparseBinaryMatrix& test, std::size_t k,
                              std::size_t threads = 1);
MetricsReport evaluate(const ModelParams& params, const SparseBinaryMatrix& train,
                       const SparseBinaryMatrix& test, std::size_t k, std::size_t threads = 1);
MetricsReport evaluate_itempop(std::span<const std::size_t> popularity,
                               const SparseBinaryMatrix& train, const SparseBinaryMatrix& test,
                               std::size_t k, std::size_t threads = 1);

}  // namespace fawmf
