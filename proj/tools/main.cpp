#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "commands.hpp"
#include "fawmf/errors.hpp"
#include "usage_error.hpp"

using namespace fawmf;
using namespace fawmf::cli;

namespace {

void add_data_options(CLI::App* sub, DataOptions& d) {
  sub->add_option("--data", d.path, "Interaction file");
  sub->add_option("--format", d.format, "Input format")
      ->check(CLI::IsMember({"movielens-dat", "tsv", "csv"}));
  sub->add_option("--min-item-count", d.min_item_count, "Drop items with fewer positives");
  sub->add_option("--synthetic", d.synthetic, "Random n,m,density matrix instead of --data");
  sub->add_option("--folds", d.folds, "Cross-validation folds (1 = no held-out set)");
  sub->add_option("--fold", d.fold, "Fold used as the test set");
}

void add_common(CLI::App* sub, std::string& out) {
  sub->add_option("--out", out, "Output directory");
  sub->add_option("--config", "Config file of key = value lines (CLI flags take precedence)");
  sub->add_flag("--dry-run", "Print the resolved options and exit");
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

/// Reads --config for the chosen subcommand and splices its entries in as
/// --key=value right after the subcommand token, ahead of the user's flags.
std::vector<std::string> layer_config(const CLI::App& app, std::vector<std::string> args) {
  std::size_t sub_pos = 0;
  const CLI::App* sub = nullptr;
  for (std::size_t k = 1; k < args.size() && !sub; ++k) {
    for (const CLI::App* s : app.get_subcommands({})) {
      if (s->check_name(args[k])) {
        sub = s;
        sub_pos = k;
        break;
      }
    }
  }
  if (!sub) return args;

  std::string path;
  for (std::size_t k = sub_pos + 1; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) path = args[k + 1];
    if (args[k].rfind("--config=", 0) == 0) path = args[k].substr(9);
  }
  if (path.empty()) return args;

  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::vector<std::string> injected;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "config" || key == "dry-run" || !sub->get_option_no_throw("--" + key)) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "' for " +
                       sub->get_name());
    }
    injected.push_back("--" + key + "=" + value);
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, injected.begin(),
              injected.end());
  return args;
}

void print_resolved(const CLI::App* sub) {
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string& name = opt->get_single_name();
    if (opt->get_lnames().empty() || name == "help" || name == "config" || name == "dry-run") {
      continue;
    }
    const auto& res = opt->results();
    std::string value = res.empty() ? opt->get_default_str() : res.back();
    std::cout << name << " = " << value << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptively weighted matrix factorization with full-batch training", "fawmf"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();

  TrainOptions train;
  auto* t = app.add_subcommand("train", "Fit a model and write a checkpoint");
  add_data_options(t, train.data);
  t->add_option("--k", train.hyper.factors, "Latent factors");
  t->add_option("--d", train.hyper.communities, "Communities");
  t->add_option("--epsilon", train.hyper.epsilon, "Target for unexposed cells");
  t->add_option("--lr", train.hyper.learning_rate, "Learning rate");
  t->add_option("--max-epochs", train.hyper.max_epochs, "Epoch budget");
  t->add_option("--rel-tol", train.hyper.rel_tol, "Relative objective change that stops training");
  t->add_option("--sigma-clamp", train.hyper.sigma_clamp, "Activation clamp");
  t->add_option("--seed", train.hyper.seed, "Root seed");
  t->add_option("--optimizer", train.optimizer)
      ->check(CLI::IsMember({"fbgd", "bgd-naive", "sgd-uniform", "sgd-itempop"}));
  t->add_option("--neg-ratio", train.neg_ratio, "Negatives per positive for SGD");
  t->add_option("--clip", train.clip_max_norm, "Gradient max-abs clip, 0 = off");
  t->add_option("--threads", train.threads);
  add_common(t, train.out);

  EvalOptions eval;
  auto* e = app.add_subcommand("eval", "Score held-out interactions");
  add_data_options(e, eval.data);
  e->add_option("--seed", eval.seed, "Root seed used for the split");
  e->add_option("--checkpoint", eval.checkpoint, "Model file (default OUT/model.ckpt)");
  e->add_option("--scorer", eval.scorer)->check(CLI::IsMember({"model", "itempop"}));
  e->add_option("--k", eval.cutoff, "Ranking cutoff");
  e->add_flag("--per-user", eval.per_user, "Also write metrics_per_user.csv");
  e->add_option("--threads", eval.threads);
  add_common(e, eval.out);

  GradcheckOptions grad;
  grad.data.folds = 1;
  auto* g = app.add_subcommand("gradcheck", "Compare fast, naive and finite-difference gradients");
  add_data_options(g, grad.data);
  g->add_option("--k", grad.factors);
  g->add_option("--d", grad.communities);
  g->add_option("--epsilon", grad.epsilon);
  g->add_option("--sigma-clamp", grad.sigma_clamp);
  g->add_option("--seed", grad.seed);
  g->add_option("--fd-samples", grad.fd_samples, "Coordinates per parameter group");
  g->add_option("--fd-step", grad.fd_step);
  g->add_option("--fast-tol", grad.fast_tol);
  g->add_option("--fd-tol", grad.fd_tol);
  g->add_option("--inject-fault", grad.inject_fault)
      ->check(CLI::IsMember({"none", "alpha-off-by-one"}));
  add_common(g, grad.out);

  BenchOptions bench;
  auto* b = app.add_subcommand("bench", "Time fast against naive epochs");
  b->add_option("--sizes", bench.sizes, "Comma-separated n (= m) values");
  b->add_option("--density", bench.density);
  b->add_option("--k", bench.factors);
  b->add_option("--d", bench.communities);
  b->add_option("--lr", bench.lr);
  b->add_option("--epochs", bench.epochs, "Timed epochs per size");
  b->add_option("--seed", bench.seed);
  b->add_option("--threads", bench.threads);
  add_common(b, bench.out);

  CommunitiesOptions comm;
  comm.data.folds = 1;
  auto* c = app.add_subcommand("communities", "Summarize learned communities");
  add_data_options(c, comm.data);
  c->add_option("--seed", comm.seed);
  c->add_option("--checkpoint", comm.checkpoint)->required();
  c->add_option("--sigma-clamp", comm.sigma_clamp);
  c->add_option("--top", comm.top, "Items listed per community");
  c->add_option("--members", comm.members, "Users listed per community");
  add_common(c, comm.out);

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = layer_config(app, std::move(args));
    std::vector<char*> raw;
    for (auto& a : args) raw.push_back(a.data());
    try {
      app.parse(static_cast<int>(raw.size()), raw.data());
    } catch (const CLI::CallForHelp& err) {
      return app.exit(err);
    } catch (const CLI::ParseError& err) {
      app.exit(err);
      return 1;
    }

    CLI::App* sub = app.get_subcommands().front();
    if (sub->get_option("--dry-run")->as<bool>()) {
      print_resolved(sub);
      return 0;
    }
    if (sub == t) return cmd_train(train);
    if (sub == e) return cmd_eval(eval);
    if (sub == g) return cmd_gradcheck(grad);
    if (sub == b) return cmd_bench(bench);
    return cmd_communities(comm);
  } catch (const UsageError& err) {
    std::fprintf(stderr, "usage error: %s\n", err.what());
    return 1;
  } catch (const NumericError& err) {
    std::fprintf(stderr, "numeric error: %s\n", err.what());
    return 3;
  } catch (const Error& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 2;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 2;
  }
}
