#include "fawmf/sgd_baseline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fawmf/errors.hpp"
#include "fawmf/ingest.hpp"
#include "fawmf/oracle.hpp"

namespace fawmf {

NegativeSample sample_negatives(const SparseBinaryMatrix& x, const SamplerConfig& cfg,
                                std::span<const std::size_t> popularity, Rng& rng) {
  if (cfg.ratio < 1) throw DomainError("sampling ratio must be at least 1");
  const std::size_t n = x.n_users();
  const std::size_t m = x.n_items();
  if (n == 0 || m == 0) throw DomainError("cannot sample from an empty matrix");

  // Weight each user can still draw from; a user with none is skipped.
  std::vector<double> cumulative;
  std::vector<double> available(n, 0.0);
  double total = 0.0;
  if (cfg.kind == SamplerKind::itempop) {
    if (popularity.size() != m) throw DomainError("popularity vector length differs from item count");
    cumulative.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      total += static_cast<double>(popularity[j]);
      cumulative[j] = total;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double used = 0.0;
      for (Index j : x.row(i)) used += static_cast<double>(popularity[j]);
      available[i] = total - used;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) available[i] = static_cast<double>(m - x.row(i).size());
  }
  if (std::none_of(available.begin(), available.end(), [](double a) { return a > 0.0; })) {
    throw DomainError("no unobserved pair can be sampled");
  }

  NegativeSample out;
  const std::size_t wanted = cfg.ratio * x.nnz();
  out.pairs.reserve(wanted);
  while (out.pairs.size() < wanted) {
    const std::size_t i = rng.below(n);
    if (!(available[i] > 0.0)) {
      ++out.skipped_users;
      continue;
    }
    std::size_t j = 0;
    do {
      if (cfg.kind == SamplerKind::uniform) {
        j = rng.below(m);
      } else {
        const double r = rng.uniform01() * total;
        j = std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin();
        j = std::min(j, m - 1);
      }
    } while (x.contains(i, j));
    out.pairs.emplace_back(static_cast<Index>(i), static_cast<Index>(j));
  }
  return out;
}

NegativeSample sample_negatives(const SparseBinaryMatrix& x, const SamplerConfig& cfg,
                                std::span<const std::size_t> popularity) {
  Rng rng(cfg.seed);
  return sample_negatives(x, cfg, popularity, rng);
}

SgdEpochStats sgd_epoch(ModelParams& params, const SparseBinaryMatrix& x, const SamplerConfig& cfg,
                        std::span<const std::size_t> popularity, double lr,
                        const ObjectiveConfig& obj, Rng& rng) {
  const std::size_t K = params.factors();
  const std::size_t D = params.communities();
  const double eps = obj.epsilon;

  NegativeSample negatives = sample_negatives(x, cfg, popularity, rng);
  std::vector<std::pair<Entry, bool>> instances;
  instances.reserve(x.nnz() + negatives.pairs.size());
  for (const Entry& e : x.entries()) instances.emplace_back(e, true);
  for (const Entry& e : negatives.pairs) instances.emplace_back(e, false);
  rng.shuffle(std::span(instances));

  SgdEpochStats stats{instances.size(), negatives.skipped_users};
  if (lr == 0.0) return stats;

  // theta_k alpha_k per user, refreshed whenever beta_k or alpha_k moves.
  Matrix theta = softmax_rows(params.beta);
  Matrix contrib(params.n_users(), D);
  for (std::size_t k = 0; k < params.n_users(); ++k) {
    for (std::size_t d = 0; d < D; ++d) contrib(k, d) = theta(k, d) * params.alpha[k];
  }

  std::vector<double> c(D), q(D), dl_dq(D), slope(D), d_theta(D), u_old(K);
  for (const auto& [pair, positive] : instances) {
    const auto [i, j] = pair;
    const double x_ij = positive ? 1.0 : 0.0;

    std::fill(c.begin(), c.end(), 0.0);
    for (Index k : x.col(j)) {
      const auto row = contrib.row(k);
      for (std::size_t d = 0; d < D; ++d) c[d] += row[d];
    }
    for (std::size_t d = 0; d < D; ++d) {
      q[d] = clamped_sigmoid(params.w[j] * c[d] + params.b[j], obj.sigma_clamp);
    }

    auto u = params.user_factors.row(i);
    auto v = params.item_factors.row(j);
    const auto th = theta.row(i);
    const double s = dot(u, v);
    const double gamma = exposure(th, q);
    const double d_gamma = (s - x_ij) * (s - x_ij) - (eps - x_ij) * (eps - x_ij);

    double dw = 0.0, db = 0.0, d_alpha = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      dl_dq[d] = d_gamma * th[d];
      slope[d] = dl_dq[d] * q[d] * (1.0 - q[d]);
      dw += slope[d] * c[d];
      db += slope[d];
      d_alpha += slope[d] * params.w[j] * th[d];
      d_theta[d] = d_gamma * q[d];
    }
    const double mean = dot(th, d_theta);
    const double resid = 2.0 * gamma * (s - x_ij);

    std::copy(u.begin(), u.end(), u_old.begin());
    for (std::size_t k = 0; k < K; ++k) {
      u[k] -= lr * resid * v[k];
      v[k] -= lr * resid * u_old[k];
    }
    params.w[j] -= lr * dw;
    params.b[j] -= lr * db;
    auto beta = params.beta.row(i);
    for (std::size_t d = 0; d < D; ++d) beta[d] -= lr * th[d] * (d_theta[d] - mean);
    if (positive) params.alpha[i] -= lr * d_alpha;

    softmax_row(beta, theta.row(i));
    for (std::size_t d = 0; d < D; ++d) contrib(i, d) = theta(i, d) * params.alpha[i];

    if (!std::isfinite(s) || !std::isfinite(gamma) || !std::isfinite(params.w[j]) ||
        !std::isfinite(params.b[j]) || !std::isfinite(params.alpha[i])) {
      throw NumericError("SGD update produced a non-finite value at pair (" + std::to_string(i) +
                         ", " + std::to_string(j) + ")");
    }
  }
  return stats;
}

TrainResult sgd_train(ModelParams params, const SparseBinaryMatrix& x, const SamplerConfig& cfg,
                      const HyperParams& hyper, const StopRule& stop) {
  hyper.validate();
  const ObjectiveConfig obj = hyper.objective();
  const auto popularity = item_popularity(x);
  const bool naive_ok = static_cast<double>(x.n_users()) * static_cast<double>(x.n_items()) <=
                        static_cast<double>(kNaivePairLimit);
  std::size_t epoch = 0;
  TrainResult r;
  r.history = run_epochs(params, stop, [&](ModelParams& p) {
    EpochStats stats;
    if (naive_ok) {
      stats.objective = objective_naive(p, x, obj);
    } else {
      stats.objective = objective_fast(p, build_cache(p, x, obj), x, obj);
    }
    Rng rng(derive_seed(cfg.seed, "sgd-epoch-" + std::to_string(epoch++)));
    sgd_epoch(p, x, cfg, popularity, hyper.learning_rate, obj, rng);
    return stats;
  });
  r.params = std::move(params);
  return r;
}

}  // namespace fawmf
