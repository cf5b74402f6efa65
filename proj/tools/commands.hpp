#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "fawmf/model.hpp"

namespace fawmf::cli {

struct DataOptions {
  std::string path;
  std::string format = "movielens-dat";
  std::size_t min_item_count = 3;
  std::string synthetic;  // "n,m,density"; replaces path when set
  std::size_t folds = 5;  // 1 trains on everything and leaves no test set
  std::size_t fold = 0;
};

struct TrainOptions {
  DataOptions data;
  HyperParams hyper;
  std::string optimizer = "fbgd";
  std::size_t neg_ratio = 1;
  double clip_max_norm = 0.0;
  std::size_t threads = 1;
  std::string out = ".";
};

struct EvalOptions {
  DataOptions data;
  std::uint64_t seed = 1;
  std::string checkpoint;
  std::string scorer = "model";
  std::size_t cutoff = 5;
  bool per_user = false;
  std::size_t threads = 1;
  std::string out = ".";
};

struct GradcheckOptions {
  DataOptions data;
  std::size_t factors = 4;
  std::size_t communities = 3;
  double epsilon = 1e-5;
  double sigma_clamp = 1e-8;
  std::uint64_t seed = 1;
  std::size_t fd_samples = 200;
  double fd_step = 1e-5;
  double fast_tol = 1e-10;
  double fd_tol = 1e-4;
  std::string inject_fault = "none";
  std::string out = ".";
};

struct BenchOptions {
  std::string sizes = "50,200,1000";
  double density = 0.01;
  std::size_t factors = 8;
  std::size_t communities = 8;
  double lr = 0.01;
  std::size_t epochs = 3;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string out = ".";
};

struct CommunitiesOptions {
  DataOptions data;
  std::uint64_t seed = 1;
  std::string checkpoint;
  double sigma_clamp = 1e-8;
  std::size_t top = 5;
  std::size_t members = 5;
  std::string out = ".";
};

// Each returns the process exit code; library errors propagate.
int cmd_train(const TrainOptions& opts);
int cmd_eval(const EvalOptions& opts);
int cmd_gradcheck(const GradcheckOptions& opts);
int cmd_bench(const BenchOptions& opts);
int cmd_communities(const CommunitiesOptions& opts);

}  // namespace fawmf::cli
