#include <doctest.h>

#include <algorithm>
#include <set>

#include "fawmf/errors.hpp"
#include "fawmf/ingest.hpp"
#include "fawmf/sgd_baseline.hpp"
#include "support.hpp"

using namespace fawmf;

namespace {
const ObjectiveConfig kCfg;
}

TEST_SUITE("sgd") {

TEST_CASE("ratio one draws one negative per positive") {
  Rng rng(1);
  const auto x = random_matrix_with_nnz(30, 40, 100, rng);
  const auto pop = item_popularity(x);
  for (SamplerKind kind : {SamplerKind::uniform, SamplerKind::itempop}) {
    const auto s = sample_negatives(x, {kind, 1, 5}, pop);
    CHECK(s.pairs.size() == 100);
    for (const Entry& e : s.pairs) CHECK_FALSE(x.contains(e.first, e.second));
  }
}

TEST_CASE("negatives are never positives") {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const auto x = random_matrix(5 + rng.below(20), 5 + rng.below(20), rng.uniform(0.1, 0.7), rng);
    if (x.nnz() == 0) continue;
    const auto pop = item_popularity(x);
    const auto kind = t % 2 ? SamplerKind::itempop : SamplerKind::uniform;
    const auto s = sample_negatives(x, {kind, 3, rng.next()}, pop);
    for (const Entry& e : s.pairs) CHECK_FALSE(x.contains(e.first, e.second));
  }
}

TEST_CASE("popularity sampling follows the categorical distribution") {
  // Item 0 carries nearly all popularity and nobody consumed it.
  std::vector<Entry> entries;
  for (Index i = 0; i < 20; ++i) entries.emplace_back(i, 1 + i % 9);
  const SparseBinaryMatrix x(20, 10, entries);
  std::vector<std::size_t> pop(10, 1);
  pop[0] = 10000;
  Rng rng(3);
  std::size_t hits = 0, draws = 0;
  while (draws < 10000) {
    const auto s = sample_negatives(x, {SamplerKind::itempop, 25, rng.next()}, pop);
    for (const Entry& e : s.pairs) {
      if (draws == 10000) break;
      hits += e.second == 0;
      ++draws;
    }
  }
  CHECK(static_cast<double>(hits) / draws > 0.95);
}

TEST_CASE("sampling is seed-determined") {
  Rng rng(4);
  const auto x = random_matrix(20, 20, 0.2, rng);
  const auto pop = item_popularity(x);
  const auto a = sample_negatives(x, {SamplerKind::itempop, 2, 77}, pop);
  const auto b = sample_negatives(x, {SamplerKind::itempop, 2, 77}, pop);
  CHECK(a.pairs == b.pairs);
  CHECK_FALSE(sample_negatives(x, {SamplerKind::itempop, 2, 78}, pop).pairs == a.pairs);
}

TEST_CASE("full users are skipped and counted") {
  // User 0 consumed everything; user 1 nothing.
  const SparseBinaryMatrix x(2, 3, {{0, 0}, {0, 1}, {0, 2}});
  const auto s = sample_negatives(x, {SamplerKind::uniform, 10, 1}, item_popularity(x));
  CHECK(s.pairs.size() == 30);
  CHECK(s.skipped_users > 0);
  for (const Entry& e : s.pairs) CHECK(e.first == 1);

  const SparseBinaryMatrix full(1, 2, {{0, 0}, {0, 1}});
  CHECK_THROWS_AS(sample_negatives(full, {SamplerKind::uniform, 1, 1}, item_popularity(full)),
                  DomainError);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  Rng rng(5);
  auto [x, p] = fawmf::testing::random_instance(rng);
  auto q = p;
  Rng epoch(6);
  const auto stats = sgd_epoch(q, x, {SamplerKind::uniform, 2, 1}, item_popularity(x), 0.0, kCfg, epoch);
  CHECK(q == p);
  CHECK(stats.instances == 3 * x.nnz());
}

TEST_CASE("single positive pair moves the score toward one") {
  Rng rng(7);
  auto p = random_params(1, 2, 3, 2, rng);
  const SparseBinaryMatrix x(1, 2, {{0, 0}});
  const auto pop = item_popularity(x);
  const double start = std::abs(predict_score(p, 0, 0) - 1.0);
  Rng epoch(8);
  for (int e = 0; e < 500; ++e) sgd_epoch(p, x, {SamplerKind::uniform, 1, 0}, pop, 0.05, kCfg, epoch);
  CHECK(std::abs(predict_score(p, 0, 0) - 1.0) < 0.1 * start);
}

TEST_CASE("only visited rows and items move") {
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    const auto x = random_matrix_with_nnz(40, 40, 15, rng);
    auto p = random_params(40, 40, 3, 3, rng);
    const auto pop = item_popularity(x);
    const SamplerConfig cfg{t % 2 ? SamplerKind::itempop : SamplerKind::uniform, 1, 0};
    const std::uint64_t seed = rng.next();

    // Replay the epoch's negative draw to learn which pairs it visits.
    Rng replay(seed);
    const auto neg = sample_negatives(x, cfg, pop, replay);
    std::set<Index> users, items, pos_users;
    for (const Entry& e : x.entries()) {
      users.insert(e.first);
      items.insert(e.second);
      pos_users.insert(e.first);
    }
    for (const Entry& e : neg.pairs) {
      users.insert(e.first);
      items.insert(e.second);
    }

    const auto before = p;
    Rng epoch(seed);
    const auto stats = sgd_epoch(p, x, cfg, pop, 0.05, kCfg, epoch);
    CHECK(stats.instances == 2 * x.nnz());
    for (Index i = 0; i < 40; ++i) {
      const bool row_same = std::equal(p.user_factors.row(i).begin(), p.user_factors.row(i).end(),
                                       before.user_factors.row(i).begin()) &&
                            std::equal(p.beta.row(i).begin(), p.beta.row(i).end(),
                                       before.beta.row(i).begin());
      if (!users.count(i)) CHECK(row_same);
      if (!pos_users.count(i)) CHECK(p.alpha[i] == before.alpha[i]);
    }
    for (Index j = 0; j < 40; ++j) {
      if (items.count(j)) continue;
      CHECK(p.w[j] == before.w[j]);
      CHECK(p.b[j] == before.b[j]);
      CHECK(std::equal(p.item_factors.row(j).begin(), p.item_factors.row(j).end(),
                       before.item_factors.row(j).begin()));
    }
  }
}

TEST_CASE("larger samples learn more") {
  Rng rng(10);
  const auto x = clustered_matrix(40, 40, 4, 0.4, 0.02, rng);
  HyperParams h;
  h.factors = 4;
  h.communities = 4;
  h.learning_rate = 0.05;
  auto final_j = [&](std::size_t ratio, std::uint64_t seed) {
    h.seed = seed;
    const auto res = sgd_train(init_params(h, 40, 40), x, {SamplerKind::uniform, ratio, seed}, h,
                               StopRule{20, 0.0});
    return objective_naive(res.params, x, h.objective());
  };
  std::vector<double> small, large;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    small.push_back(final_j(1, s));
    large.push_back(final_j(25, s));
  }
  std::nth_element(small.begin(), small.begin() + 2, small.end());
  std::nth_element(large.begin(), large.begin() + 2, large.end());
  CHECK(large[2] <= small[2]);
}

TEST_CASE("sgd_train records the objective before every epoch") {
  Rng rng(11);
  auto [x, p] = fawmf::testing::random_instance(rng, 5, 15);
  HyperParams h;
  h.learning_rate = 0.01;
  const auto res = sgd_train(p, x, {SamplerKind::itempop, 2, 3}, h, StopRule{4, 0.0});
  REQUIRE(res.history.epochs.size() == 4);
  CHECK(res.history.epochs[0].objective == objective_naive(p, x, h.objective()));
  const auto again = sgd_train(p, x, {SamplerKind::itempop, 2, 3}, h, StopRule{4, 0.0});
  CHECK(again.params == res.params);
}

}  // TEST_SUITE
