#include "fawmf/fbgd.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <string>

#include "fawmf/errors.hpp"
#include "fawmf/parallel.hpp"

namespace fawmf {
namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

void require_finite(std::span<const Extended> v, const char* tensor) {
  if (!std::all_of(v.begin(), v.end(), [](Extended a) { return std::isfinite(a); })) {
    throw NumericError(std::string("non-finite entry in cache tensor ") + tensor);
  }
}

void add_into(std::vector<Extended>& dst, const std::vector<Extended>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Fill the lower triangle of a [K][K][inner] tensor from its upper triangle.
void mirror_kk(std::vector<Extended>& t, std::size_t K, std::size_t inner) {
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t l = 0; l < k; ++l) {
      std::copy_n(&t[(l * K + k) * inner], inner, &t[(k * K + l) * inner]);
    }
  }
}

// Same for the trailing [K][K] block of a [D][K][K] tensor.
void mirror_dkk(std::vector<Extended>& t, std::size_t D, std::size_t K) {
  for (std::size_t d = 0; d < D; ++d) {
    Extended* block = &t[d * K * K];
    for (std::size_t l = 0; l < K; ++l) {
      for (std::size_t r = 0; r < l; ++r) block[l * K + r] = block[r * K + l];
    }
  }
}

// Accumulates sum_rows a_k a_l s_d into kkd (upper triangle, l >= k) and
// sum_rows s_d a_l a_r into dkk (upper triangle, r >= l) for rows [lo, hi).
void reduce_rows(const Matrix& factors, const ExtMatrix& weights, std::size_t lo, std::size_t hi,
                 std::vector<Extended>& kkd, std::vector<Extended>& s,
                 std::vector<Extended>& dkk) {
  const std::size_t K = factors.cols();
  const std::size_t D = weights.cols();
  for (std::size_t r = lo; r < hi; ++r) {
    const auto a = factors.row(r);
    const auto wt = weights.row(r);
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t l = k; l < K; ++l) {
        const Extended akl = static_cast<Extended>(a[k]) * a[l];
        Extended* out = &kkd[(k * K + l) * D];
        for (std::size_t d = 0; d < D; ++d) out[d] += akl * wt[d];
      }
    }
    for (std::size_t d = 0; d < D; ++d) {
      s[d] += wt[d];
      Extended* block = &dkk[d * K * K];
      for (std::size_t l = 0; l < K; ++l) {
        const Extended wl = wt[d] * a[l];
        for (std::size_t rr = l; rr < K; ++rr) block[l * K + rr] += wl * a[rr];
      }
    }
  }
}

struct Reduction {
  std::vector<Extended> kkd, s, dkk;
};

Reduction reduce_all(const Matrix& factors, const ExtMatrix& weights, std::size_t threads) {
  const std::size_t K = factors.cols();
  const std::size_t D = weights.cols();
  const std::size_t rows = factors.rows();
  const std::size_t workers = effective_workers(threads, rows);
  std::vector<Reduction> parts(workers, Reduction{std::vector<Extended>(K * K * D, 0),
                                                  std::vector<Extended>(D, 0),
                                                  std::vector<Extended>(D * K * K, 0)});
  parallel_for(rows, workers, [&](std::size_t lo, std::size_t hi, std::size_t w) {
    reduce_rows(factors, weights, lo, hi, parts[w].kkd, parts[w].s, parts[w].dkk);
  });
  Reduction out = std::move(parts[0]);
  for (std::size_t w = 1; w < workers; ++w) {
    add_into(out.kkd, parts[w].kkd);
    add_into(out.s, parts[w].s);
    add_into(out.dkk, parts[w].dkk);
  }
  mirror_kk(out.kkd, K, D);
  mirror_dkk(out.dkk, D, K);
  return out;
}

// out[d] = sum_kl a_k a_l t[k][l][d] for a symmetric [K][K][D] tensor.
void quadratic_form(std::span<const double> a, const std::vector<Extended>& t, std::size_t D,
                    std::span<Extended> out) {
  const std::size_t K = a.size();
  std::fill(out.begin(), out.end(), Extended{0});
  for (std::size_t k = 0; k < K; ++k) {
    const Extended* diag = &t[(k * K + k) * D];
    const Extended akk = static_cast<Extended>(a[k]) * a[k];
    for (std::size_t d = 0; d < D; ++d) out[d] += akk * diag[d];
    for (std::size_t l = k + 1; l < K; ++l) {
      const Extended akl = 2 * static_cast<Extended>(a[k]) * a[l];
      const Extended* off = &t[(k * K + l) * D];
      for (std::size_t d = 0; d < D; ++d) out[d] += akl * off[d];
    }
  }
}

// out = sum_{d,l} s_d a_l t[d][l][:] for a [D][K][K] tensor.
void mixed_form(std::span<const Extended> s, std::span<const double> a,
                const std::vector<Extended>& t, std::span<Extended> out) {
  const std::size_t K = a.size();
  std::fill(out.begin(), out.end(), Extended{0});
  for (std::size_t d = 0; d < s.size(); ++d) {
    for (std::size_t l = 0; l < K; ++l) {
      const Extended c = s[d] * a[l];
      const Extended* vec = &t[(d * K + l) * K];
      for (std::size_t r = 0; r < K; ++r) out[r] += c * vec[r];
    }
  }
}

void softmax_ext(std::span<const double> logits, std::span<Extended> out) {
  const double top = *std::max_element(logits.begin(), logits.end());
  Extended total = 0;
  for (std::size_t d = 0; d < logits.size(); ++d) {
    out[d] = std::exp(static_cast<Extended>(logits[d]) - top);
    total += out[d];
  }
  for (Extended& v : out) v /= total;
}

Extended clamped_sigmoid_ext(Extended z, Extended clamp) {
  const Extended s = z >= 0 ? 1 / (1 + std::exp(-z)) : std::exp(z) / (1 + std::exp(z));
  return std::clamp(s, clamp, 1 - clamp);
}

}  // namespace

std::string_view group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::beta:
      return "beta";
    case ParamGroup::alpha:
      return "alpha";
    case ParamGroup::w:
      return "w";
    case ParamGroup::b:
      return "b";
    case ParamGroup::user_factors:
      return "U";
    case ParamGroup::item_factors:
      return "V";
  }
  return "?";
}

std::span<double> group_values(ModelParams& p, ParamGroup g) {
  switch (g) {
    case ParamGroup::beta:
      return p.beta.values();
    case ParamGroup::alpha:
      return p.alpha;
    case ParamGroup::w:
      return p.w;
    case ParamGroup::b:
      return p.b;
    case ParamGroup::user_factors:
      return p.user_factors.values();
    case ParamGroup::item_factors:
      return p.item_factors.values();
  }
  return {};
}

std::span<const double> group_values(const ModelParams& p, ParamGroup g) {
  return group_values(const_cast<ModelParams&>(p), g);
}

GradientSet GradientSet::zeros_like(const ModelParams& p) {
  GradientSet g;
  g.d_beta = Matrix(p.n_users(), p.communities());
  g.d_alpha.assign(p.n_users(), 0.0);
  g.d_w.assign(p.n_items(), 0.0);
  g.d_b.assign(p.n_items(), 0.0);
  g.d_user_factors = Matrix(p.n_users(), p.factors());
  g.d_item_factors = Matrix(p.n_items(), p.factors());
  return g;
}

std::span<double> GradientSet::values(ParamGroup g) {
  switch (g) {
    case ParamGroup::beta:
      return d_beta.values();
    case ParamGroup::alpha:
      return d_alpha;
    case ParamGroup::w:
      return d_w;
    case ParamGroup::b:
      return d_b;
    case ParamGroup::user_factors:
      return d_user_factors.values();
    case ParamGroup::item_factors:
      return d_item_factors.values();
  }
  return {};
}

std::span<const double> GradientSet::values(ParamGroup g) const {
  return const_cast<GradientSet*>(this)->values(g);
}

double GradientSet::max_abs() const {
  double m = 0.0;
  for (ParamGroup g : kAllGroups) {
    for (double v : values(g)) m = std::max(m, std::abs(v));
  }
  return m;
}

void GradientSet::check_finite() const {
  for (ParamGroup g : kAllGroups) {
    if (!all_finite(values(g))) {
      throw NumericError("non-finite gradient entry in group " + std::string(group_name(g)));
    }
  }
}

GradientCache build_cache(const ModelParams& params, const SparseBinaryMatrix& x,
                          const ObjectiveConfig& cfg, std::size_t threads) {
  const std::size_t n = params.n_users();
  const std::size_t m = params.n_items();
  const std::size_t K = params.factors();
  const std::size_t D = params.communities();
  if (x.n_users() != n || x.n_items() != m) {
    throw DomainError("feedback matrix shape does not match the model");
  }

  GradientCache c;
  c.factors = K;
  c.communities = D;

  c.theta = ExtMatrix(n, D);
  parallel_for(n, threads, [&](std::size_t lo, std::size_t hi, std::size_t) {
    for (std::size_t i = lo; i < hi; ++i) softmax_ext(params.beta.row(i), c.theta.row(i));
  });

  c.consumption = ExtMatrix(m, D);
  c.q = ExtMatrix(m, D);
  parallel_for(m, threads, [&](std::size_t lo, std::size_t hi, std::size_t) {
    for (std::size_t j = lo; j < hi; ++j) {
      auto cj = c.consumption.row(j);
      for (Index k : x.col(j)) {
        const auto th = c.theta.row(k);
        for (std::size_t d = 0; d < D; ++d) cj[d] += th[d] * params.alpha[k];
      }
      auto qj = c.q.row(j);
      for (std::size_t d = 0; d < D; ++d) {
        qj[d] = clamped_sigmoid_ext(params.w[j] * cj[d] + params.b[j], cfg.sigma_clamp);
      }
    }
  });
  require_finite(c.q.values(), "Q");

  auto users = reduce_all(params.user_factors, c.theta, threads);
  c.m_q = std::move(users.kkd);
  c.s_q = std::move(users.s);
  c.m_v = std::move(users.dkk);
  auto items = reduce_all(params.item_factors, c.q, threads);
  c.m_theta = std::move(items.kkd);
  c.s_theta = std::move(items.s);
  c.m_u = std::move(items.dkk);
  require_finite(c.m_q, "M_q");
  require_finite(c.m_v, "M_v");
  require_finite(c.m_theta, "M_theta");
  require_finite(c.m_u, "M_u");

  // dJ/dq_j = sum_kl v_jk v_jl M_q[k][l] - eps^2 S_q
  //           - 2 sum_{i: x_ij = 1} (u_i.v_j - eps) theta_i
  const Extended eps = cfg.epsilon;
  c.dj_dq = ExtMatrix(m, D);
  parallel_for(m, threads, [&](std::size_t lo, std::size_t hi, std::size_t) {
    for (std::size_t j = lo; j < hi; ++j) {
      const auto v = params.item_factors.row(j);
      auto out = c.dj_dq.row(j);
      quadratic_form(v, c.m_q, D, out);
      for (std::size_t d = 0; d < D; ++d) out[d] -= eps * eps * c.s_q[d];
      for (Index i : x.col(j)) {
        const Extended coef = 2 * (dot_ext(params.user_factors.row(i), v) - eps);
        const auto th = c.theta.row(i);
        for (std::size_t d = 0; d < D; ++d) out[d] -= coef * th[d];
      }
    }
  });
  require_finite(c.dj_dq.values(), "dJ/dQ");
  return c;
}

GradientSet gradients_fast(const ModelParams& params, const GradientCache& cache,
                           const SparseBinaryMatrix& x, const ObjectiveConfig& cfg,
                           std::size_t threads) {
  const std::size_t n = params.n_users();
  const std::size_t m = params.n_items();
  const std::size_t K = params.factors();
  const std::size_t D = params.communities();
  const Extended eps = cfg.epsilon;
  GradientSet g = GradientSet::zeros_like(params);

  parallel_for(n, threads, [&](std::size_t lo, std::size_t hi, std::size_t) {
    std::vector<Extended> d_theta(D);
    std::vector<Extended> du(K);
    for (std::size_t i = lo; i < hi; ++i) {
      const auto u = params.user_factors.row(i);
      const auto th = cache.theta.row(i);
      const Extended alpha = params.alpha[i];

      quadratic_form(u, cache.m_theta, D, d_theta);
      for (std::size_t d = 0; d < D; ++d) d_theta[d] -= eps * eps * cache.s_theta[d];

      mixed_form(th, u, cache.m_u, du);
      for (auto& e : du) e *= 2;

      Extended d_alpha = 0;
      for (Index j : x.row(i)) {
        const auto v = params.item_factors.row(j);
        const auto qj = cache.q.row(j);
        const auto gq = cache.dj_dq.row(j);
        const Extended direct = 2 * (dot_ext(u, v) - eps);
        const Extended chain = alpha * params.w[j];
        Extended alpha_term = 0;
        for (std::size_t d = 0; d < D; ++d) {
          const Extended slope = qj[d] * (1 - qj[d]) * gq[d];
          d_theta[d] += chain * slope - direct * qj[d];
          alpha_term += slope * th[d];
        }
        d_alpha += params.w[j] * alpha_term;

        const Extended gamma = dot_ext(th, qj);
        for (std::size_t k = 0; k < K; ++k) du[k] -= 2 * gamma * v[k];
      }
      g.d_alpha[i] = static_cast<double>(d_alpha);
      for (std::size_t k = 0; k < K; ++k) g.d_user_factors(i, k) = static_cast<double>(du[k]);

      // Softmax Jacobian (diag(theta) - theta theta^T) d_theta, as pairwise
      // differences so that components shared by every community cancel exactly.
      for (std::size_t d = 0; d < D; ++d) {
        Extended acc = 0;
        for (std::size_t e = 0; e < D; ++e) acc += th[e] * (d_theta[d] - d_theta[e]);
        g.d_beta(i, d) = static_cast<double>(th[d] * acc);
      }
    }
  });

  parallel_for(m, threads, [&](std::size_t lo, std::size_t hi, std::size_t) {
    std::vector<Extended> dv(K);
    for (std::size_t j = lo; j < hi; ++j) {
      const auto v = params.item_factors.row(j);
      const auto qj = cache.q.row(j);
      const auto gq = cache.dj_dq.row(j);
      const auto cj = cache.consumption.row(j);
      Extended dw = 0;
      Extended db = 0;
      for (std::size_t d = 0; d < D; ++d) {
        const Extended slope = qj[d] * (1 - qj[d]) * gq[d];
        dw += slope * cj[d];
        db += slope;
      }
      g.d_w[j] = static_cast<double>(dw);
      g.d_b[j] = static_cast<double>(db);

      mixed_form(qj, v, cache.m_v, dv);
      for (auto& e : dv) e *= 2;
      for (Index i : x.col(j)) {
        const Extended gamma = dot_ext(cache.theta.row(i), qj);
        const auto u = params.user_factors.row(i);
        for (std::size_t k = 0; k < K; ++k) dv[k] -= 2 * gamma * u[k];
      }
      for (std::size_t k = 0; k < K; ++k) g.d_item_factors(j, k) = static_cast<double>(dv[k]);
    }
  });

  g.check_finite();
  return g;
}

void apply_update(ModelParams& params, const GradientSet& grad, double lr, double clip_max_norm) {
  double step = lr;
  if (clip_max_norm > 0.0) {
    const double norm = grad.max_abs();
    if (norm > clip_max_norm) step *= clip_max_norm / norm;
  }
  if (step == 0.0) return;
  for (ParamGroup grp : kAllGroups) {
    auto p = group_values(params, grp);
    const auto gv = grad.values(grp);
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= step * gv[k];
  }
}

EpochStats fbgd_step(ModelParams& params, const SparseBinaryMatrix& x, double lr,
                     const ObjectiveConfig& cfg, const StepOptions& opts) {
  if (!(lr >= 0.0)) throw DomainError("learning rate must be non-negative");
  const GradientCache cache = build_cache(params, x, cfg, opts.threads);
  EpochStats stats;
  stats.objective = objective_fast(params, cache, x, cfg);
  const GradientSet grad = gradients_fast(params, cache, x, cfg, opts.threads);
  stats.grad_max_norm = grad.max_abs();
  apply_update(params, grad, lr, opts.clip_max_norm);
  return stats;
}

EpochResult epoch_step(const ModelParams& params, const SparseBinaryMatrix& x, double lr,
                       const ObjectiveConfig& cfg, const StepOptions& opts) {
  EpochResult r{params, 0.0};
  r.objective = fbgd_step(r.params, x, lr, cfg, opts).objective;
  return r;
}

void TrainHistory::write_csv(std::ostream& out) const {
  out << "epoch,objective,epoch_seconds,grad_max_norm\n";
  char line[160];
  for (const auto& e : epochs) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.9g,%.17g\n", e.epoch, e.objective, e.seconds,
                  e.grad_max_norm);
    out << line;
  }
}

void TrainHistory::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_csv(out);
}

TrainHistory run_epochs(ModelParams& params, const StopRule& stop, const EpochFn& step) {
  TrainHistory history;
  for (std::size_t t = 0; t < stop.max_epochs; ++t) {
    const auto start = std::chrono::steady_clock::now();
    EpochStats stats;
    try {
      stats = step(params);
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(t) + ": " + e.what());
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    if (!std::isfinite(stats.objective)) {
      throw NumericError("objective became non-finite at epoch " + std::to_string(t));
    }
    history.epochs.push_back({t, stats.objective, elapsed.count(), stats.grad_max_norm});

    if (std::isinf(stop.rel_tol)) break;
    if (t > 0) {
      const double prev = history.epochs[t - 1].objective;
      const double change = std::abs(stats.objective - prev) / std::max(prev, 1e-12);
      if (change < stop.rel_tol) break;
    }
  }
  return history;
}

TrainResult train(ModelParams params, const SparseBinaryMatrix& x, const HyperParams& hyper,
                  const StopRule& stop, const StepOptions& opts) {
  hyper.validate();
  const ObjectiveConfig cfg = hyper.objective();
  TrainResult r;
  r.history = run_epochs(params, stop, [&](ModelParams& p) {
    return fbgd_step(p, x, hyper.learning_rate, cfg, opts);
  });
  r.params = std::move(params);
  return r;
}

}  // namespace fawmf
