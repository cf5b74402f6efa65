// Acceptance runner: one PASS/FAIL/SKIP line per criterion.
//
// Exit status: 0 when nothing failed and something ran, 1 on any failure,
// 77 when every selected criterion was skipped.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include "fawmf/checkpoint.hpp"
#include "fawmf/errors.hpp"
#include "fawmf/evaluation.hpp"
#include "fawmf/fbgd.hpp"
#include "fawmf/ingest.hpp"
#include "fawmf/oracle.hpp"
#include "fawmf/sgd_baseline.hpp"
#include "fawmf/synthetic.hpp"

namespace fs = std::filesystem;
using namespace fawmf;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome verdict(bool ok, std::string detail) {
  return {ok ? Status::pass : Status::fail, std::move(detail)};
}

struct Instance {
  SparseBinaryMatrix x;
  ModelParams params;
};

Instance draw_instance(Rng& rng, std::size_t max_nm) {
  const std::size_t n = 3 + rng.below(max_nm - 2);
  const std::size_t m = 3 + rng.below(max_nm - 2);
  const std::size_t K = 2 + rng.below(7);
  const std::size_t D = 2 + rng.below(7);
  const double density = rng.uniform(0.05, 0.5);
  Instance inst;
  inst.x = random_matrix(n, m, density, rng);
  inst.params = random_params(n, m, K, D, rng);
  return inst;
}

constexpr ParamGroup kGroups[] = {ParamGroup::beta, ParamGroup::alpha, ParamGroup::w,
                                  ParamGroup::b,    ParamGroup::user_factors,
                                  ParamGroup::item_factors};

const ObjectiveConfig kCfg{};

Outcome gradient_equivalence() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(2024, "acceptance-gradients"));
  double worst = 0.0;
  std::string worst_group = "-";
  for (int t = 0; t < 100; ++t) {
    const Instance inst = draw_instance(rng, 50);
    const auto fast = gradients_fast(inst.params, build_cache(inst.params, inst.x, kCfg), inst.x, kCfg);
    const auto naive = gradients_naive(inst.params, inst.x, kCfg);
    for (ParamGroup g : kGroups) {
      const GroupCheck c = compare_group(g, fast.values(g), naive.values(g));
      if (c.max_rel_err > worst || !std::isfinite(c.max_rel_err)) {
        worst = c.max_rel_err;
        worst_group = std::string(group_name(g));
      }
    }
  }
  const double secs = seconds_since(t0);
  return verdict(worst <= 1e-10 && secs < 60.0,
                 fmt("100 instances, max rel err %.3g in %s (tol 1e-10), %.1f s (limit 60 s)",
                     worst, worst_group.c_str(), secs));
}

Outcome finite_difference() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(2024, "acceptance-fd"));
  double worst = 0.0;
  std::string worst_group = "-";
  std::size_t groups_seen = 0;
  for (int t = 0; t < 20; ++t) {
    const Instance inst = draw_instance(rng, 10);
    GradCheckOptions opts;
    opts.fd_step = 1e-5;
    opts.fd_tol = 1e-4;
    opts.fd_samples = 200;
    opts.seed = derive_seed(2024, "acceptance-fd-" + std::to_string(t));
    const GradCheckReport rep = grad_check(inst.params, inst.x, kCfg, opts);
    for (const GroupCheck& c : rep.naive_vs_fd) {
      if (c.compared > 0) ++groups_seen;
      if (c.max_rel_err > worst || !std::isfinite(c.max_rel_err)) {
        worst = c.max_rel_err;
        worst_group = std::string(group_name(c.group));
      }
    }
  }
  const double secs = seconds_since(t0);
  return verdict(worst <= 1e-4 && groups_seen == 20 * 6 && secs < 60.0,
                 fmt("20 instances x %zu/6 groups, max rel err %.3g in %s (tol 1e-4), %.1f s "
                     "(limit 60 s)",
                     groups_seen / 20, worst, worst_group.c_str(), secs));
}

Outcome objective_equivalence() {
  Rng rng(derive_seed(2024, "acceptance-gradients"));
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Instance inst = draw_instance(rng, 50);
    const double fast = objective_fast(inst.params, build_cache(inst.params, inst.x, kCfg), inst.x, kCfg);
    const double naive = objective_naive(inst.params, inst.x, kCfg);
    worst = std::max(worst, std::abs(fast - naive) / std::max(std::abs(naive), 1e-12));
  }
  return verdict(worst <= 1e-9, fmt("100 instances, max rel diff %.3g (tol 1e-9)", worst));
}

Outcome descent() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(2024, "acceptance-descent"));
  const SparseBinaryMatrix x = clustered_matrix(200, 200, 4, 0.8, 0.01, rng);
  HyperParams h;
  h.factors = 8;
  h.communities = 8;
  h.learning_rate = 0.01;
  h.seed = derive_seed(2024, "acceptance-descent-init");
  ModelParams p = init_params(h, 200, 200);
  std::vector<double> j;
  bool finite = true;
  try {
    for (int e = 0; e < 200; ++e) j.push_back(fbgd_step(p, x, h.learning_rate, h.objective()).objective);
    j.push_back(objective_naive(p, x, h.objective()));
  } catch (const NumericError&) {
    finite = false;
  }
  for (double v : j) finite = finite && std::isfinite(v);
  std::size_t rises = 0;
  for (std::size_t t = 1; t < j.size(); ++t) rises += j[t] >= j[t - 1];
  const std::size_t steps = j.empty() ? 0 : j.size() - 1;
  const double secs = seconds_since(t0);
  const bool ok = finite && j.size() == 201 && rises * 20 <= steps && j.back() < 0.5 * j.front() &&
                  secs < 120.0;
  return verdict(ok, fmt("%zu/%zu non-decreasing steps (max 5%%), J %.6g -> %.6g (ratio %.3f, "
                         "need < 0.5), finite=%s, %.1f s (limit 120 s)",
                         rises, steps, j.empty() ? 0.0 : j.front(), j.empty() ? 0.0 : j.back(),
                         j.empty() ? 0.0 : j.back() / j.front(), finite ? "yes" : "no", secs));
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome speedup() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(2024, "acceptance-speedup"));
  const SparseBinaryMatrix x = random_matrix(1000, 1000, 0.01, rng);
  HyperParams h;
  h.factors = 8;
  h.communities = 8;
  h.learning_rate = 0.01;
  h.seed = derive_seed(2024, "acceptance-speedup-init");
  const ModelParams start = init_params(h, 1000, 1000);
  constexpr int kEpochs = 3;

  std::vector<double> fast_t, naive_t, fast_j, naive_j;
  ModelParams p = start;
  for (int e = 0; e < kEpochs; ++e) {
    const auto s = Clock::now();
    fast_j.push_back(fbgd_step(p, x, h.learning_rate, h.objective()).objective);
    fast_t.push_back(seconds_since(s));
  }
  p = start;
  for (int e = 0; e < kEpochs; ++e) {
    const auto s = Clock::now();
    naive_j.push_back(naive_step(p, x, h.learning_rate, h.objective()).objective);
    naive_t.push_back(seconds_since(s));
  }
  double diff = 0.0;
  for (int e = 0; e < kEpochs; ++e) {
    diff = std::max(diff, std::abs(fast_j[e] - naive_j[e]) / std::abs(naive_j[e]));
  }
  const double ratio = median(naive_t) / median(fast_t);
  const double secs = seconds_since(t0);
  return verdict(ratio >= 5.0 && diff <= 1e-9 && secs < 300.0,
                 fmt("nnz %zu, fbgd %.4f s vs naive %.4f s per epoch, speedup %.1fx (need >= 5), "
                     "max rel J diff %.3g (tol 1e-9), %.1f s (limit 300 s)",
                     x.nnz(), median(fast_t), median(naive_t), ratio, diff, secs));
}

Outcome linear_scaling() {
  const std::size_t sizes[] = {10000, 20000, 40000};
  HyperParams h;
  h.factors = 8;
  h.communities = 8;
  h.learning_rate = 0.01;
  h.seed = derive_seed(2024, "acceptance-scaling-init");
  const ModelParams start = init_params(h, 2000, 2000);
  std::vector<SparseBinaryMatrix> data;
  std::vector<double> xs, ys(3, INFINITY);
  for (std::size_t nnz : sizes) {
    Rng rng(derive_seed(2024, "acceptance-scaling-" + std::to_string(nnz)));
    data.push_back(random_matrix_with_nnz(2000, 2000, nnz, rng));
    xs.push_back(static_cast<double>(nnz));
  }
  // Sizes interleaved so drift in machine load hits all three alike.
  for (int r = 0; r < 40; ++r) {
    for (std::size_t k = 0; k < 3; ++k) {
      ModelParams p = start;
      const auto s = Clock::now();
      fbgd_step(p, data[k], h.learning_rate, h.objective());
      ys[k] = std::min(ys[k], seconds_since(s));
    }
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / 3.0;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / 3.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int k = 0; k < 3; ++k) {
    sxy += (xs[k] - mx) * (ys[k] - my);
    sxx += (xs[k] - mx) * (xs[k] - mx);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  const double r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 0.0;
  return verdict(r2 >= 0.9, fmt("epoch seconds %.4f / %.4f / %.4f at nnz 1e4 / 2e4 / 4e4, "
                                "r^2 %.4f (need >= 0.9)",
                                ys[0], ys[1], ys[2], r2));
}

Outcome metric_examples() {
  auto ranked = [](std::vector<Index> items) {
    RankedList r;
    r.items = std::move(items);
    r.scores.assign(r.items.size(), 0.0);
    for (std::size_t k = 0; k < r.scores.size(); ++k) r.scores[k] = -static_cast<double>(k);
    return r;
  };
  const auto pr = precision_recall_at_k(ranked({0, 1, 2, 3, 4}), std::vector<Index>{1, 4}, 5);
  const double ndcg = ndcg_at_k(ranked({10, 11, 12, 13, 14}), std::vector<Index>{11, 14}, 5);
  const double rr = mrr(std::vector<Index>{5, 6, 7, 8, 9}, std::vector<Index>{6, 8});
  const bool ok = std::abs(ndcg - 0.6241) <= 1e-4 && std::abs(pr.precision - 0.4) <= 1e-4 &&
                  std::abs(pr.recall - 1.0) <= 1e-4 && std::abs(rr - 0.75) <= 1e-4;
  return verdict(ok, fmt("NDCG %.6f (0.6241), Pre %.4f (0.4), Rec %.4f (1.0), MRR %.4f (0.75), "
                         "tol 1e-4",
                         ndcg, pr.precision, pr.recall, rr));
}

int run_cli(const std::string& cmd) {
  const int raw = std::system(cmd.c_str());
  return raw == -1 ? -1 : WEXITSTATUS(raw);
}

Outcome checkpoint_round_trip(const std::string& cli) {
  const fs::path dir = fs::temp_directory_path() / ("fawmf-acceptance-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  Rng rng(derive_seed(2024, "acceptance-checkpoint"));
  const ModelParams p = random_params(37, 23, 5, 4, rng);
  save_checkpoint(dir / "model.ckpt", p);
  const ModelParams back = load_checkpoint(dir / "model.ckpt");
  bool identical = back.n_users() == p.n_users() && back.n_items() == p.n_items() &&
                   back.factors() == p.factors() && back.communities() == p.communities();
  for (ParamGroup g : kGroups) {
    if (!identical) break;
    const auto a = group_values(p, g);
    const auto b = group_values(back, g);
    identical = a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
  }

  std::string cli_detail = "no --cli given";
  int code = -1;
  if (!cli.empty()) {
    {
      std::fstream f(dir / "model.ckpt", std::ios::in | std::ios::out | std::ios::binary);
      f.write("JUNK", 4);
    }
    code = run_cli("\"" + cli + "\" eval --synthetic 37,23,0.3 --folds 1 --checkpoint \"" +
                   (dir / "model.ckpt").string() + "\" --out \"" + dir.string() + "\" >/dev/null 2>&1");
    cli_detail = fmt("corrupted magic exit code %d (want 2)", code);
  }
  fs::remove_all(dir);
  return verdict(identical && code == 2,
                 fmt("round trip %s, %s", identical ? "bit-identical" : "MISMATCH", cli_detail.c_str()));
}

// MovieLens criteria.

std::optional<fs::path> movielens_path(const std::string& flag) {
  std::vector<fs::path> candidates;
  if (!flag.empty()) candidates.emplace_back(flag);
  if (const char* env = std::getenv("FAWMF_ML1M")) candidates.emplace_back(env);
  candidates.emplace_back(fs::path(FAWMF_SOURCE_DIR) / "tests/data/ml-1m/ratings.dat");
  for (const auto& c : candidates) {
    if (fs::is_regular_file(c)) return c;
  }
  return std::nullopt;
}

HyperParams movielens_hyper(std::uint64_t seed) {
  HyperParams h;
  h.factors = 20;
  h.communities = 20;
  h.epsilon = 1e-5;
  h.learning_rate = 0.1;
  h.seed = derive_seed(seed, "init");
  return h;
}

Outcome movielens_reproduction(const fs::path& path, std::size_t threads) {
  const auto data = load_dataset(path, InputFormat::movielens_dat, 3);
  const auto folds = kfold_split(data.matrix, 5, derive_seed(1, "split"));
  double model_sum = 0.0, pop_sum = 0.0;
  std::string per_fold;
  for (const FoldSplit& f : folds) {
    const HyperParams h = movielens_hyper(1);
    TrainResult r;
    try {
      r = train(init_params(h, f.train.n_users(), f.train.n_items()), f.train, h,
                StopRule{h.max_epochs, h.rel_tol}, StepOptions{threads, 0.0});
    } catch (const NumericError& e) {
      return {Status::fail, fmt("fold %zu diverged: %s", f.fold_id, e.what())};
    }
    const double pre = evaluate(r.params, f.train, f.test, 5, threads).pre_at_k;
    const double pop = evaluate_itempop(item_popularity(f.train), f.train, f.test, 5, threads).pre_at_k;
    model_sum += pre;
    pop_sum += pop;
    per_fold += fmt(" %.4f/%.4f", pre, pop);
  }
  const double model = model_sum / 5.0;
  const double pop = pop_sum / 5.0;
  return verdict(model >= 0.35 && model >= 1.5 * pop,
                 fmt("5-fold mean Pre@5 %.4f (need >= 0.35), item-pop %.4f, ratio %.2f (need >= "
                     "1.5); folds model/pop:%s",
                     model, pop, model / pop, per_fold.c_str()));
}

SparseBinaryMatrix top_subsample(const SparseBinaryMatrix& x, std::size_t users, std::size_t items) {
  auto top = [](std::vector<std::size_t> counts, std::size_t keep) {
    std::vector<Index> idx(counts.size());
    std::iota(idx.begin(), idx.end(), Index{0});
    keep = std::min(keep, idx.size());
    std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return counts[a] > counts[b]; });
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    return idx;
  };
  std::vector<std::size_t> row_counts(x.n_users());
  for (Index i = 0; i < x.n_users(); ++i) row_counts[i] = x.row(i).size();
  const auto keep_users = top(row_counts, users);
  const auto keep_items = top(item_popularity(x), items);
  std::vector<long> item_pos(x.n_items(), -1);
  for (std::size_t k = 0; k < keep_items.size(); ++k) item_pos[keep_items[k]] = static_cast<long>(k);
  std::vector<Entry> entries;
  for (std::size_t r = 0; r < keep_users.size(); ++r) {
    for (Index j : x.row(keep_users[r])) {
      if (item_pos[j] >= 0) entries.push_back({static_cast<Index>(r), static_cast<Index>(item_pos[j])});
    }
  }
  return SparseBinaryMatrix(keep_users.size(), keep_items.size(), std::move(entries));
}

Outcome sampling_direction(const fs::path& path, std::size_t threads) {
  const auto data = load_dataset(path, InputFormat::movielens_dat, 3);
  const SparseBinaryMatrix sub = top_subsample(data.matrix, 1000, 1000);
  std::vector<double> fb, s25, s1;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const FoldSplit f = kfold_split(sub, 5, derive_seed(seed, "split")).front();
    const HyperParams h = movielens_hyper(seed);
    const StopRule stop{h.max_epochs, h.rel_tol};
    const ModelParams start = init_params(h, f.train.n_users(), f.train.n_items());
    auto score = [&](const ModelParams& p) { return evaluate(p, f.train, f.test, 5, threads).pre_at_k; };
    try {
      fb.push_back(score(train(start, f.train, h, stop, StepOptions{threads, 0.0}).params));
      for (std::size_t ratio : {std::size_t{25}, std::size_t{1}}) {
        const SamplerConfig sc{SamplerKind::uniform, ratio, derive_seed(seed, "sampler")};
        (ratio == 25 ? s25 : s1).push_back(score(sgd_train(start, f.train, sc, h, stop).params));
      }
    } catch (const NumericError& e) {
      return {Status::fail, fmt("seed %llu diverged: %s", static_cast<unsigned long long>(seed), e.what())};
    }
  }
  const double a = median(fb), b = median(s25), c = median(s1);
  return verdict(a >= b && b >= c,
                 fmt("median Pre@5 over 5 seeds: fbgd %.4f, sgd-uniform-25X %.4f, "
                     "sgd-uniform-1X %.4f (need non-increasing)",
                     a, b, c));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria runner"};
  std::string group = "all";
  std::string cli;
  std::string data;
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--group", group)->check(CLI::IsMember({"all", "core", "movielens"}));
  app.add_option("--cli", cli, "fawmf executable for the exit-code check");
  app.add_option("--data", data, "MovieLens-1M ratings.dat (else $FAWMF_ML1M)");
  app.add_option("--threads", threads, "Workers for the MovieLens runs");
  CLI11_PARSE(app, argc, argv);

  const bool core = group != "movielens";
  const bool ml = group != "core";
  std::size_t ran = 0, failed = 0;

  auto run = [&](int id, const char* name, const std::function<Outcome()>& body) {
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
    if (o.status != Status::skip) ++ran;
    if (o.status == Status::fail) ++failed;
    std::printf("%s [%2d] %s: %s\n", tag, id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  if (core) {
    run(1, "gradient oracle equivalence", gradient_equivalence);
    run(2, "finite-difference certification", finite_difference);
    run(3, "objective equivalence", objective_equivalence);
    run(4, "descent property", descent);
    run(5, "speedup over naive BGD", speedup);
    run(6, "linear scaling in positives", linear_scaling);
  }
  if (ml) {
    const auto path = movielens_path(data);
    const Outcome missing{Status::skip,
                          "MovieLens-1M ratings.dat not found (set FAWMF_ML1M or --data)"};
    run(7, "MovieLens-1M reproduction",
        [&] { return path ? movielens_reproduction(*path, threads) : missing; });
    run(8, "sampling-size direction",
        [&] { return path ? sampling_direction(*path, threads) : missing; });
  }
  if (core) {
    run(9, "metric examples", metric_examples);
    run(10, "checkpoint round trip", [&] { return checkpoint_round_trip(cli); });
  }
  if (failed > 0) return 1;
  return ran == 0 ? 77 : 0;
}
