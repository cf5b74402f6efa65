#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "fawmf/checkpoint.hpp"
#include "fawmf/errors.hpp"
#include "fawmf/evaluation.hpp"
#include "fawmf/fbgd.hpp"
#include "fawmf/ingest.hpp"
#include "fawmf/oracle.hpp"
#include "fawmf/sgd_baseline.hpp"
#include "fawmf/synthetic.hpp"
#include "usage_error.hpp"

namespace fs = std::filesystem;

namespace fawmf::cli {
namespace {

struct Dataset {
  SparseBinaryMatrix train;
  SparseBinaryMatrix test;
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  bool from_file = false;
};

std::vector<std::string> numbered(std::size_t count) {
  std::vector<std::string> ids(count);
  for (std::size_t k = 0; k < count; ++k) ids[k] = std::to_string(k);
  return ids;
}

SparseBinaryMatrix synthetic_matrix(const std::string& shape, std::uint64_t seed) {
  std::istringstream in(shape);
  std::size_t n = 0, m = 0;
  double density = 0.0;
  char c1 = 0, c2 = 0;
  if (!(in >> n >> c1 >> m >> c2 >> density) || c1 != ',' || c2 != ',' || n == 0 || m == 0 ||
      !(density > 0.0 && density <= 1.0)) {
    throw UsageError("--synthetic expects n,m,density with density in (0, 1]");
  }
  Rng rng(derive_seed(seed, "synthetic"));
  return random_matrix(n, m, density, rng);
}

Dataset load(const DataOptions& d, std::uint64_t seed) {
  if (d.folds < 1) throw UsageError("--folds must be at least 1");
  if (d.fold >= d.folds) throw UsageError("--fold must be below --folds");
  Dataset ds;
  SparseBinaryMatrix full;
  if (!d.synthetic.empty()) {
    full = synthetic_matrix(d.synthetic, seed);
    ds.user_ids = numbered(full.n_users());
    ds.item_ids = numbered(full.n_items());
  } else if (!d.path.empty()) {
    auto idx = load_dataset(d.path, parse_input_format(d.format), d.min_item_count);
    full = std::move(idx.matrix);
    ds.user_ids = std::move(idx.user_ids);
    ds.item_ids = std::move(idx.item_ids);
    ds.from_file = true;
  } else {
    throw UsageError("one of --data or --synthetic is required");
  }
  if (d.folds == 1) {
    ds.train = full;
    ds.test = SparseBinaryMatrix(full.n_users(), full.n_items());
  } else {
    auto folds = kfold_split(full, d.folds, derive_seed(seed, "split"));
    ds.train = std::move(folds[d.fold].train);
    ds.test = std::move(folds[d.fold].test);
  }
  return ds;
}

void require_shape(const ModelParams& p, const SparseBinaryMatrix& x) {
  if (p.n_users() != x.n_users() || p.n_items() != x.n_items()) {
    throw FormatError("checkpoint is " + std::to_string(p.n_users()) + " x " +
                      std::to_string(p.n_items()) + " but the data is " +
                      std::to_string(x.n_users()) + " x " + std::to_string(x.n_items()));
  }
}

fs::path out_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create output directory " + p.string());
  return p;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void validate_hyper(const HyperParams& h) {
  try {
    h.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Indices of the `count` largest values, ties by ascending index.
template <typename Value>
std::vector<std::size_t> top_indices(const Value& value, std::size_t size, std::size_t count) {
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t keep = std::min(count, size);
  std::partial_sort(idx.begin(), idx.begin() + keep, idx.end(), [&](std::size_t a, std::size_t b) {
    const double va = value(a), vb = value(b);
    return va > vb || (va == vb && a < b);
  });
  idx.resize(keep);
  return idx;
}

}  // namespace

int cmd_train(const TrainOptions& o) {
  validate_hyper(o.hyper);
  const Dataset ds = load(o.data, o.hyper.seed);
  HyperParams init = o.hyper;
  init.seed = derive_seed(o.hyper.seed, "init");
  ModelParams params = init_params(init, ds.train.n_users(), ds.train.n_items());
  const StopRule stop{o.hyper.max_epochs, o.hyper.rel_tol};

  TrainResult result;
  if (o.optimizer == "fbgd") {
    result = train(std::move(params), ds.train, o.hyper, stop, {o.threads, o.clip_max_norm});
  } else if (o.optimizer == "bgd-naive") {
    const ObjectiveConfig cfg = o.hyper.objective();
    result.history = run_epochs(params, stop, [&](ModelParams& p) {
      return naive_step(p, ds.train, o.hyper.learning_rate, cfg);
    });
    result.params = std::move(params);
  } else {
    const SamplerKind kind = o.optimizer == "sgd-itempop" ? SamplerKind::itempop : SamplerKind::uniform;
    const SamplerConfig sampler{kind, o.neg_ratio, derive_seed(o.hyper.seed, "sampler")};
    result = sgd_train(std::move(params), ds.train, sampler, o.hyper, stop);
  }

  const fs::path dir = out_dir(o.out);
  save_checkpoint(dir / "model.ckpt", result.params);
  result.history.write_csv(dir / "history.csv");
  if (ds.from_file) {
    write_id_map(dir / "users.tsv", ds.user_ids);
    write_id_map(dir / "items.tsv", ds.item_ids);
  }
  const auto& ep = result.history.epochs;
  std::printf("trained %s on %zu x %zu (%zu positives): %zu epochs", o.optimizer.c_str(),
              ds.train.n_users(), ds.train.n_items(), ds.train.nnz(), ep.size());
  if (!ep.empty()) std::printf(", J %.10g -> %.10g", ep.front().objective, ep.back().objective);
  std::printf("\n");
  return 0;
}

int cmd_eval(const EvalOptions& o) {
  if (o.cutoff < 1) throw UsageError("--k must be at least 1");
  ModelParams params;
  if (o.scorer == "model") {
    params = load_checkpoint(fs::path(o.checkpoint.empty() ? (fs::path(o.out) / "model.ckpt").string()
                                                            : o.checkpoint));
  }
  const Dataset ds = load(o.data, o.seed);
  MetricsReport report;
  if (o.scorer == "model") {
    require_shape(params, ds.train);
    report = evaluate(params, ds.train, ds.test, o.cutoff, o.threads);
  } else {
    const auto pop = item_popularity(ds.train);
    report = evaluate_itempop(pop, ds.train, ds.test, o.cutoff, o.threads);
  }
  const fs::path dir = out_dir(o.out);
  {
    auto out = open_out(dir / "metrics.csv");
    report.write_csv(out);
  }
  open_out(dir / "metrics.json") << report.to_json() << '\n';
  if (o.per_user) {
    auto out = open_out(dir / "metrics_per_user.csv");
    report.write_per_user_csv(out);
  }
  report.write_csv(std::cout);
  return 0;
}

int cmd_gradcheck(const GradcheckOptions& o) {
  if (o.factors < 1 || o.communities < 1) throw UsageError("--k and --d must be at least 1");
  DataOptions data = o.data;
  if (data.path.empty() && data.synthetic.empty()) data.synthetic = "8,9,0.3";
  const SparseBinaryMatrix x = load(data, o.seed).train;
  Rng rng(derive_seed(o.seed, "gradcheck-params"));
  const ModelParams params = random_params(x.n_users(), x.n_items(), o.factors, o.communities, rng);
  const ObjectiveConfig cfg{o.epsilon, o.sigma_clamp};

  GradCheckOptions go;
  go.fast_tol = o.fast_tol;
  go.fd_tol = o.fd_tol;
  go.fd_step = o.fd_step;
  go.fd_samples = o.fd_samples;
  go.seed = derive_seed(o.seed, "gradcheck-coords");

  GradientSet candidate = gradients_fast(params, build_cache(params, x, cfg), x, cfg);
  if (o.inject_fault == "alpha-off-by-one" && candidate.d_alpha.size() > 1) {
    std::rotate(candidate.d_alpha.begin(), candidate.d_alpha.begin() + 1, candidate.d_alpha.end());
  }
  const GradCheckReport report = grad_check(params, x, cfg, go, candidate);

  const fs::path dir = out_dir(o.out);
  {
    auto out = open_out(dir / "gradcheck.txt");
    report.write_text(out);
  }
  open_out(dir / "gradcheck.json") << report.to_json() << '\n';
  report.write_text(std::cout);
  return report.pass ? 0 : 3;
}

int cmd_bench(const BenchOptions& o) {
  using clock = std::chrono::steady_clock;
  std::vector<std::size_t> sizes;
  {
    std::istringstream in(o.sizes);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      try {
        sizes.push_back(std::stoul(tok));
      } catch (const std::exception&) {
        throw UsageError("--sizes expects a comma-separated list of counts");
      }
    }
  }
  if (sizes.empty() || o.epochs < 1) throw UsageError("--sizes and --epochs must be non-empty");

  HyperParams h;
  h.factors = o.factors;
  h.communities = o.communities;
  h.learning_rate = o.lr;
  h.seed = derive_seed(o.seed, "init");
  validate_hyper(h);
  const ObjectiveConfig cfg = h.objective();

  const fs::path dir = out_dir(o.out);
  auto csv = open_out(dir / "bench.csv");
  csv << "n,m,nnz,factors,communities,epochs,fbgd_seconds,naive_seconds,speedup,"
         "max_rel_objective_diff\n";
  for (std::size_t n : sizes) {
    Rng rng(derive_seed(o.seed, "bench-" + std::to_string(n)));
    const SparseBinaryMatrix x = random_matrix(n, n, o.density, rng);
    const ModelParams start = init_params(h, n, n);

    std::vector<double> fast_t, naive_t, fast_j, naive_j;
    ModelParams p = start;
    for (std::size_t e = 0; e < o.epochs; ++e) {
      const auto t0 = clock::now();
      fast_j.push_back(fbgd_step(p, x, o.lr, cfg, {o.threads, 0.0}).objective);
      fast_t.push_back(std::chrono::duration<double>(clock::now() - t0).count());
    }
    const bool naive_ok = static_cast<double>(n) * n <= static_cast<double>(kNaivePairLimit);
    double diff = 0.0;
    if (naive_ok) {
      p = start;
      for (std::size_t e = 0; e < o.epochs; ++e) {
        const auto t0 = clock::now();
        naive_j.push_back(naive_step(p, x, o.lr, cfg).objective);
        naive_t.push_back(std::chrono::duration<double>(clock::now() - t0).count());
        diff = std::max(diff, std::abs(fast_j[e] - naive_j[e]) / std::max(std::abs(naive_j[e]), 1e-300));
      }
    }
    char line[256];
    const double tf = median(fast_t);
    if (naive_ok) {
      const double tn = median(naive_t);
      std::snprintf(line, sizeof line, "%zu,%zu,%zu,%zu,%zu,%zu,%.6g,%.6g,%.4g,%.3g\n", n, n, x.nnz(),
                    o.factors, o.communities, o.epochs, tf, tn, tn / tf, diff);
    } else {
      std::snprintf(line, sizeof line, "%zu,%zu,%zu,%zu,%zu,%zu,%.6g,,,\n", n, n, x.nnz(), o.factors,
                    o.communities, o.epochs, tf);
    }
    csv << line;
    std::cout << line;
  }
  return 0;
}

int cmd_communities(const CommunitiesOptions& o) {
  if (o.top < 1) throw UsageError("--top must be at least 1");
  const ModelParams params = load_checkpoint(fs::path(o.checkpoint));
  const Dataset ds = load(o.data, o.seed);
  require_shape(params, ds.train);

  const std::size_t n = params.n_users();
  const std::size_t m = params.n_items();
  const std::size_t D = params.communities();
  const Matrix theta = softmax_rows(params.beta);
  Matrix q(m, D);
  for (std::size_t j = 0; j < m; ++j) {
    community_activation(params, theta, ds.train, j, o.sigma_clamp, q.row(j));
  }

  std::ostringstream rep;
  char line[256];
  for (std::size_t d = 0; d < D; ++d) {
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) mass += theta(i, d);
    std::snprintf(line, sizeof line, "community %zu mass %.10g\n", d, mass);
    rep << line;
    const auto items = top_indices([&](std::size_t j) { return q(j, d); }, m, o.top);
    for (std::size_t r = 0; r < items.size(); ++r) {
      std::snprintf(line, sizeof line, "  item %zu %s %.10g\n", r + 1,
                    ds.item_ids[items[r]].c_str(), q(items[r], d));
      rep << line;
    }
    const auto users = top_indices([&](std::size_t i) { return theta(i, d); }, n, o.members);
    for (std::size_t r = 0; r < users.size(); ++r) {
      std::snprintf(line, sizeof line, "  member %zu %s %.10g\n", r + 1,
                    ds.user_ids[users[r]].c_str(), theta(users[r], d));
      rep << line;
    }
  }
  open_out(out_dir(o.out) / "communities.txt") << rep.str();
  std::cout << rep.str();
  return 0;
}

}  // namespace fawmf::cli
