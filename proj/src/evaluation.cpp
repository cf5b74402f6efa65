#include "fawmf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

#include "fawmf/errors.hpp"
#include "fawmf/parallel.hpp"

namespace fawmf {
namespace {

std::size_t hits_in_prefix(const RankedList& rec, std::span<const Index> consumed, std::size_t k,
                           std::vector<std::size_t>* ranks = nullptr) {
  std::vector<Index> con(consumed.begin(), consumed.end());
  std::sort(con.begin(), con.end());
  const std::size_t len = std::min(k, rec.items.size());
  std::size_t hits = 0;
  for (std::size_t r = 0; r < len; ++r) {
    if (std::binary_search(con.begin(), con.end(), rec.items[r])) {
      ++hits;
      if (ranks) ranks->push_back(r + 1);
    }
  }
  return hits;
}

void require_consumed(std::span<const Index> consumed) {
  if (consumed.empty()) throw DomainError("metric requested for a user with no test items");
}

}  // namespace

RankedList rank_by_scores(std::span<const double> scores, const SparseBinaryMatrix& train,
                          Index user, std::size_t k_rec) {
  const auto masked = train.row(user);
  std::vector<Index> order;
  order.reserve(scores.size() - masked.size());
  std::size_t next_mask = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (next_mask < masked.size() && masked[next_mask] == j) {
      ++next_mask;
      continue;
    }
    order.push_back(static_cast<Index>(j));
  }
  auto better = [&](Index a, Index b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  RankedList out;
  out.user = user;
  const std::size_t keep = k_rec == 0 ? order.size() : std::min(k_rec, order.size());
  out.short_list = k_rec != 0 && order.size() < k_rec;
  if (keep < order.size()) {
    std::partial_sort(order.begin(), order.begin() + keep, order.end(), better);
    order.resize(keep);
  } else {
    std::sort(order.begin(), order.end(), better);
  }
  out.items = std::move(order);
  out.scores.reserve(out.items.size());
  for (Index j : out.items) out.scores.push_back(scores[j]);
  return out;
}

RankedList top_k(const ModelParams& params, const SparseBinaryMatrix& train, Index user,
                 std::size_t k_rec) {
  if (k_rec < 1) throw DomainError("k_rec must be at least 1");
  std::vector<double> scores(params.n_items());
  for (std::size_t j = 0; j < scores.size(); ++j) scores[j] = predict_score(params, user, j);
  return rank_by_scores(scores, train, user, k_rec);
}

RankedList itempop_recommend(std::span<const std::size_t> popularity,
                             const SparseBinaryMatrix& train, Index user, std::size_t k_rec) {
  if (k_rec < 1) throw DomainError("k_rec must be at least 1");
  std::vector<double> scores(popularity.begin(), popularity.end());
  return rank_by_scores(scores, train, user, k_rec);
}

PrecisionRecall precision_recall_at_k(const RankedList& rec, std::span<const Index> consumed,
                                      std::size_t k) {
  require_consumed(consumed);
  const std::size_t len = std::min(k, rec.items.size());
  const double hits = static_cast<double>(hits_in_prefix(rec, consumed, k));
  return {len == 0 ? 0.0 : hits / static_cast<double>(len),
          hits / static_cast<double>(consumed.size())};
}

double ndcg_at_k(const RankedList& rec, std::span<const Index> consumed, std::size_t k) {
  require_consumed(consumed);
  std::vector<std::size_t> ranks;
  hits_in_prefix(rec, consumed, k, &ranks);
  double dcg = 0.0;
  for (std::size_t r : ranks) dcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  double idcg = 0.0;
  const std::size_t ideal = std::min(consumed.size(), k);
  for (std::size_t r = 1; r <= ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

double mrr(std::span<const Index> full_ranking, std::span<const Index> consumed) {
  require_consumed(consumed);
  std::unordered_map<Index, std::size_t> position;
  position.reserve(full_ranking.size());
  for (std::size_t r = 0; r < full_ranking.size(); ++r) position.emplace(full_ranking[r], r + 1);
  double total = 0.0;
  for (Index j : consumed) {
    const auto it = position.find(j);
    if (it == position.end()) {
      throw DomainError("consumed item " + std::to_string(j) + " missing from the ranking");
    }
    total += 1.0 / static_cast<double>(it->second);
  }
  return total;
}

void MetricsReport::write_csv(std::ostream& out) const {
  char line[128];
  out << "metric,k,value\n";
  std::snprintf(line, sizeof line, "Pre@%zu,%zu,%.17g\n", k, k, pre_at_k);
  out << line;
  std::snprintf(line, sizeof line, "Rec@%zu,%zu,%.17g\n", k, k, rec_at_k);
  out << line;
  std::snprintf(line, sizeof line, "NDCG@%zu,%zu,%.17g\n", k, k, ndcg_at_k);
  out << line;
  std::snprintf(line, sizeof line, "MRR,,%.17g\n", mrr);
  out << line;
}

void MetricsReport::write_per_user_csv(std::ostream& out) const {
  char line[192];
  out << "user,n_test,precision,recall,ndcg,mrr\n";
  for (const auto& u : per_user) {
    std::snprintf(line, sizeof line, "%u,%zu,%.17g,%.17g,%.17g,%.17g\n", u.user, u.n_test,
                  u.precision, u.recall, u.ndcg, u.mrr);
    out << line;
  }
}

std::string MetricsReport::to_json() const {
  const std::string ks = std::to_string(k);
  nlohmann::json doc;
  doc["k"] = k;
  doc["users_evaluated"] = users_evaluated;
  doc["Pre@" + ks] = pre_at_k;
  doc["Rec@" + ks] = rec_at_k;
  doc["NDCG@" + ks] = ndcg_at_k;
  doc["MRR"] = mrr;
  return doc.dump(2);
}

MetricsReport evaluate_scorer(const Scorer& scorer, const SparseBinaryMatrix& train,
                              const SparseBinaryMatrix& test, std::size_t k, std::size_t threads) {
  if (k < 1) throw DomainError("cutoff k must be at least 1");
  if (train.n_users() != test.n_users() || train.n_items() != test.n_items()) {
    throw DomainError("train and test matrices differ in shape");
  }
  std::vector<Index> users;
  for (std::size_t u = 0; u < test.n_users(); ++u) {
    if (!test.row(u).empty()) users.push_back(static_cast<Index>(u));
  }
  if (users.empty()) throw DomainError("no user has test items to evaluate");

  MetricsReport report;
  report.k = k;
  report.per_user.resize(users.size());
  parallel_for(users.size(), threads, [&](std::size_t lo, std::size_t hi, std::size_t) {
    std::vector<double> scores(train.n_items());
    for (std::size_t idx = lo; idx < hi; ++idx) {
      const Index u = users[idx];
      scorer(u, scores);
      const RankedList full = rank_by_scores(scores, train, u, 0);
      const auto con = test.row(u);
      const auto pr = precision_recall_at_k(full, con, k);
      report.per_user[idx] = {u, con.size(), pr.precision, pr.recall, ndcg_at_k(full, con, k),
                              mrr(full.items, con)};
    }
  });

  // Sequential sum keeps the averages independent of the thread count.
  for (const auto& um : report.per_user) {
    report.pre_at_k += um.precision;
    report.rec_at_k += um.recall;
    report.ndcg_at_k += um.ndcg;
    report.mrr += um.mrr;
  }
  const double count = static_cast<double>(users.size());
  report.pre_at_k /= count;
  report.rec_at_k /= count;
  report.ndcg_at_k /= count;
  report.mrr /= count;
  report.users_evaluated = users.size();
  return report;
}

MetricsReport evaluate(const ModelParams& params, const SparseBinaryMatrix& train,
                       const SparseBinaryMatrix& test, std::size_t k, std::size_t threads) {
  return evaluate_scorer(
      [&](Index u, std::span<double> scores) {
        const auto uf = params.user_factors.row(u);
        for (std::size_t j = 0; j < scores.size(); ++j) scores[j] = dot(uf, params.item_factors.row(j));
      },
      train, test, k, threads);
}

MetricsReport evaluate_itempop(std::span<const std::size_t> popularity,
                               const SparseBinaryMatrix& train, const SparseBinaryMatrix& test,
                               std::size_t k, std::size_t threads) {
  return evaluate_scorer(
      [&](Index, std::span<double> scores) {
        for (std::size_t j = 0; j < scores.size(); ++j) scores[j] = static_cast<double>(popularity[j]);
      },
      train, test, k, threads);
}

}  // namespace fawmf
