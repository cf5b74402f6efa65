#include "fawmf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "fawmf/errors.hpp"
#include "fawmf/rng.hpp"
#include "reference_objective.hpp"

namespace fawmf {
namespace {

void guard(const ModelParams& params) {
  const double pairs = static_cast<double>(params.n_users()) * static_cast<double>(params.n_items());
  if (pairs > static_cast<double>(kNaivePairLimit)) {
    throw DomainError("naive evaluation limited to " + std::to_string(kNaivePairLimit) +
                      " user-item pairs");
  }
}

std::vector<unsigned char> dense_mask(const SparseBinaryMatrix& x) {
  std::vector<unsigned char> mask(x.n_users() * x.n_items(), 0);
  for (std::size_t i = 0; i < x.n_users(); ++i) {
    for (Index j : x.row(i)) mask[i * x.n_items() + j] = 1;
  }
  return mask;
}

}  // namespace

GradientSet gradients_naive(const ModelParams& params, const SparseBinaryMatrix& x,
                            const ObjectiveConfig& cfg) {
  guard(params);
  using Real = long double;
  const std::size_t n = params.n_users();
  const std::size_t m = params.n_items();
  const std::size_t K = params.factors();
  const std::size_t D = params.communities();
  const Real eps = cfg.epsilon;
  const auto mask = dense_mask(x);
  auto xij = [&](std::size_t i, std::size_t j) { return static_cast<Real>(mask[i * m + j]); };

  // Everything below runs in extended precision and is rounded once at the end.
  std::vector<Real> theta(n * D);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = params.beta.row(i);
    const double top = *std::max_element(row.begin(), row.end());
    Real total = 0;
    for (std::size_t d = 0; d < D; ++d) {
      theta[i * D + d] = std::exp(static_cast<Real>(row[d]) - top);
      total += theta[i * D + d];
    }
    for (std::size_t d = 0; d < D; ++d) theta[i * D + d] /= total;
  }
  const Real lo = cfg.sigma_clamp;
  const Real hi = Real{1} - lo;
  std::vector<Real> consumption(m * D, 0);
  std::vector<Real> q(m * D);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t d = 0; d < D; ++d) {
        consumption[j * D + d] += theta[k * D + d] * params.alpha[k] * xij(k, j);
      }
    }
    for (std::size_t d = 0; d < D; ++d) {
      const Real z = params.w[j] * consumption[j * D + d] + params.b[j];
      q[j * D + d] = std::clamp(Real{1} / (Real{1} + std::exp(-z)), lo, hi);
    }
  }

  std::vector<Real> d_theta(n * D, 0);
  std::vector<Real> dj_dq(m * D, 0);
  std::vector<Real> d_u(n * K, 0);
  std::vector<Real> d_v(m * K, 0);
  std::vector<Real> d_alpha(n, 0);

  // dJ/dgamma_ij = (u_i.v_j)^2 - 2 x_ij (u_i.v_j - eps) - eps^2, routed to
  // q_j through theta_i and to theta_i through q_j.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      Real s = 0;
      for (std::size_t k = 0; k < K; ++k) {
        s += static_cast<Real>(params.user_factors(i, k)) * params.item_factors(j, k);
      }
      Real gamma = 0;
      for (std::size_t d = 0; d < D; ++d) gamma += theta[i * D + d] * q[j * D + d];
      const Real x_ij = xij(i, j);
      const Real d_gamma = s * s - 2 * x_ij * (s - eps) - eps * eps;
      for (std::size_t d = 0; d < D; ++d) {
        dj_dq[j * D + d] += d_gamma * theta[i * D + d];
        d_theta[i * D + d] += d_gamma * q[j * D + d];
      }
      const Real resid = 2 * gamma * (s - x_ij);
      for (std::size_t k = 0; k < K; ++k) {
        d_u[i * K + k] += resid * params.item_factors(j, k);
        d_v[j * K + k] += resid * params.user_factors(i, k);
      }
    }
  }

  // Chain through q_j = sigma(w_j sum_k theta_k alpha_k x_kj + b_j).
  GradientSet g = GradientSet::zeros_like(params);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const Real x_ij = xij(i, j);
      for (std::size_t d = 0; d < D; ++d) {
        const Real sig = q[j * D + d] * (1 - q[j * D + d]);
        d_theta[i * D + d] += sig * params.alpha[i] * params.w[j] * x_ij * dj_dq[j * D + d];
        d_alpha[i] += dj_dq[j * D + d] * sig * theta[i * D + d] * params.w[j] * x_ij;
      }
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    Real dw = 0;
    Real db = 0;
    for (std::size_t d = 0; d < D; ++d) {
      const Real sig = q[j * D + d] * (1 - q[j * D + d]);
      dw += dj_dq[j * D + d] * sig * consumption[j * D + d];
      db += dj_dq[j * D + d] * sig;
    }
    g.d_w[j] = static_cast<double>(dw);
    g.d_b[j] = static_cast<double>(db);
  }

  // d_beta_i = (diag(theta_i) - theta_i theta_i^T) d_theta_i, written as
  // theta_ir sum_c theta_ic (d_theta_ir - d_theta_ic) so that a constant
  // d_theta row maps to an exact zero.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < D; ++r) {
      Real acc = 0;
      for (std::size_t c = 0; c < D; ++c) {
        acc += theta[i * D + c] * (d_theta[i * D + r] - d_theta[i * D + c]);
      }
      g.d_beta(i, r) = static_cast<double>(theta[i * D + r] * acc);
    }
    g.d_alpha[i] = static_cast<double>(d_alpha[i]);
    for (std::size_t k = 0; k < K; ++k) g.d_user_factors(i, k) = static_cast<double>(d_u[i * K + k]);
  }
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < K; ++k) g.d_item_factors(j, k) = static_cast<double>(d_v[j * K + k]);
  }
  g.check_finite();
  return g;
}

EpochStats naive_step(ModelParams& params, const SparseBinaryMatrix& x, double lr,
                      const ObjectiveConfig& cfg) {
  EpochStats stats;
  stats.objective = objective_naive(params, x, cfg);
  const GradientSet grad = gradients_naive(params, x, cfg);
  stats.grad_max_norm = grad.max_abs();
  apply_update(params, grad, lr, 0.0);
  return stats;
}

double finite_diff(const ModelParams& params, const SparseBinaryMatrix& x,
                   const ObjectiveConfig& cfg, Coordinate coord, double h) {
  if (!(h > 0.0)) throw DomainError("finite-difference step must be positive");
  guard(params);
  ModelParams probe = params;
  auto values = group_values(probe, coord.group);
  if (coord.index >= values.size()) throw DomainError("coordinate out of range");
  const double original = values[coord.index];
  values[coord.index] = original + h;
  // Quad precision keeps the rounding noise of J far below 1e-12 * 2h, so a
  // gradient that is exactly zero differences to (almost exactly) zero.
  const __float128 up = reference_objective<__float128>(probe, x, cfg);
  values[coord.index] = original - h;
  const __float128 down = reference_objective<__float128>(probe, x, cfg);
  // The step actually taken can differ from h by the rounding of original +- h.
  const __float128 span = static_cast<__float128>(original + h) - (original - h);
  return static_cast<double>((up - down) / span);
}

GroupCheck compare_group(ParamGroup group, std::span<const double> candidate,
                         std::span<const double> reference) {
  GroupCheck c;
  c.group = group;
  c.compared = reference.size();
  for (std::size_t k = 0; k < reference.size(); ++k) {
    const double abs_err = std::abs(candidate[k] - reference[k]);
    double rel_err = abs_err / std::max(std::abs(reference[k]), 1e-12);
    if (std::isnan(rel_err)) rel_err = std::numeric_limits<double>::infinity();
    c.max_abs_err = std::max(c.max_abs_err, abs_err);
    if (rel_err > c.max_rel_err) {
      c.max_rel_err = rel_err;
      c.worst_index = k;
    }
  }
  return c;
}

const GroupCheck* GradCheckReport::worst_failure() const {
  const GroupCheck* worst = nullptr;
  double worst_ratio = 1.0;
  auto scan = [&](const std::vector<GroupCheck>& checks, double tol) {
    for (const auto& c : checks) {
      const double ratio = c.max_rel_err / tol;
      if (ratio > worst_ratio) {
        worst_ratio = ratio;
        worst = &c;
      }
    }
  };
  scan(fast_vs_naive, options.fast_tol);
  scan(naive_vs_fd, options.fd_tol);
  return worst;
}

void GradCheckReport::write_text(std::ostream& out) const {
  char line[200];
  out << "gradient check: " << (pass ? "PASS" : "FAIL") << '\n';
  auto section = [&](const char* title, const std::vector<GroupCheck>& checks, double tol) {
    std::snprintf(line, sizeof line, "%s (tolerance %.3g relative)\n", title, tol);
    out << line;
    for (const auto& c : checks) {
      std::snprintf(line, sizeof line, "  %-5s n=%-6zu max_abs=%.3e max_rel=%.3e worst=%zu %s\n",
                    std::string(group_name(c.group)).c_str(), c.compared, c.max_abs_err,
                    c.max_rel_err, c.worst_index, c.max_rel_err <= tol ? "ok" : "FAIL");
      out << line;
    }
  };
  section("fast vs naive", fast_vs_naive, options.fast_tol);
  std::snprintf(line, sizeof line, "naive vs central difference, h=%.3g", options.fd_step);
  section(line, naive_vs_fd, options.fd_tol);
}

std::string GradCheckReport::to_json() const {
  nlohmann::json doc;
  doc["pass"] = pass;
  doc["fast_tol"] = options.fast_tol;
  doc["fd_tol"] = options.fd_tol;
  doc["fd_step"] = options.fd_step;
  auto dump = [](const std::vector<GroupCheck>& checks) {
    nlohmann::json arr = nlohmann::json::object();
    for (const auto& c : checks) {
      arr[std::string(group_name(c.group))] = {{"compared", c.compared},
                                               {"max_abs_err", c.max_abs_err},
                                               {"max_rel_err", c.max_rel_err},
                                               {"worst_index", c.worst_index}};
    }
    return arr;
  };
  doc["fast_vs_naive"] = dump(fast_vs_naive);
  doc["naive_vs_fd"] = dump(naive_vs_fd);
  return doc.dump(2);
}

GradCheckReport grad_check(const ModelParams& params, const SparseBinaryMatrix& x,
                           const ObjectiveConfig& cfg, const GradCheckOptions& opts) {
  const GradientCache cache = build_cache(params, x, cfg);
  return grad_check(params, x, cfg, opts, gradients_fast(params, cache, x, cfg));
}

GradCheckReport grad_check(const ModelParams& params, const SparseBinaryMatrix& x,
                           const ObjectiveConfig& cfg, const GradCheckOptions& opts,
                           const GradientSet& candidate) {
  GradCheckReport report;
  report.options = opts;
  const GradientSet reference = gradients_naive(params, x, cfg);

  Rng rng(opts.seed);
  bool pass = true;
  for (ParamGroup grp : kAllGroups) {
    const auto ref = reference.values(grp);
    auto fast = compare_group(grp, candidate.values(grp), ref);
    pass = pass && fast.max_rel_err <= opts.fast_tol;
    report.fast_vs_naive.push_back(fast);

    std::vector<std::size_t> coords(ref.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(coords));
    coords.resize(std::min(coords.size(), opts.fd_samples));
    std::sort(coords.begin(), coords.end());

    std::vector<double> numeric(coords.size());
    std::vector<double> analytic(coords.size());
    for (std::size_t s = 0; s < coords.size(); ++s) {
      numeric[s] = finite_diff(params, x, cfg, {grp, coords[s]}, opts.fd_step);
      analytic[s] = ref[coords[s]];
    }
    auto fd = compare_group(grp, numeric, analytic);
    if (!coords.empty()) fd.worst_index = coords[fd.worst_index];
    pass = pass && fd.max_rel_err <= opts.fd_tol;
    report.naive_vs_fd.push_back(fd);
  }
  report.pass = pass;
  return report;
}

}  // namespace fawmf
