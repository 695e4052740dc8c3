// Command-line front end: train, eval, compare, replay. Exit code 0 on
// success, 1 when the configuration or an input file is at fault, 2 when the
// run itself fails.
#include <algorithm>
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "stableik/errors.hpp"
#include "stableik/harness.hpp"

namespace {

using namespace stableik;

struct CliArgs {
  std::string config_path;
  std::string checkpoint;
  std::string out_dir;
  std::string trajectory;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool out_set = false;
};

int run_train(const CliArgs& args, const ExperimentConfig& cfg) {
  std::printf("training %d episodes on %s (seed %llu)\n", cfg.episodes,
              cfg.model_path.c_str(),
              static_cast<unsigned long long>(cfg.seed));
  std::printf("episode log: %s/training.csv\n", cfg.out_dir.c_str());
  const TrainResult result = cmd_train(cfg, args.checkpoint);

  int recent_successes = 0;
  const std::size_t window = std::min<std::size_t>(100, result.logs.size());
  for (std::size_t i = result.logs.size() - window; i < result.logs.size(); ++i) {
    recent_successes += result.logs[i].success ? 1 : 0;
  }
  std::printf("ran %zu episodes; last %zu success rate %.3f\n",
              result.logs.size(), window,
              window == 0 ? 0.0 : static_cast<double>(recent_successes) /
                                      static_cast<double>(window));
  std::printf("final checkpoint: %s\n", result.checkpoints.back().c_str());
  return 0;
}

int run_eval(const CliArgs& args, const ExperimentConfig& cfg) {
  const AccuracyReport report = cmd_eval(args.checkpoint, cfg);
  std::printf("checkpoint after %d training episodes\n", report.episode);
  for (std::size_t k = 0; k < report.per_seed.size(); ++k) {
    std::printf("seed %zu: success %.4f over %d episodes\n", k,
                report.per_seed[k], cfg.eval_samples_per_seed);
  }
  std::printf("success min %.4f mean %.4f max %.4f\n", report.min, report.mean,
              report.max);
  std::printf("stable steps re-verified: %ld of %ld\n",
              report.verified_stable_steps, report.stable_steps);
  std::printf("per-episode log: %s/eval.csv\n", cfg.out_dir.c_str());
  return 0;
}

int run_compare(const CliArgs& args, const ExperimentConfig& cfg) {
  const CompareResult result = cmd_compare(args.checkpoint, cfg);

  int learned_ok = 0, filtered_ok = 0, unfiltered_ok = 0;
  long learned_bad = 0, filtered_bad = 0, unfiltered_bad = 0;
  for (const CompareRow& row : result.rows) {
    learned_ok += row.learned_success ? 1 : 0;
    filtered_ok += row.filtered_converged ? 1 : 0;
    unfiltered_ok += row.unfiltered_converged ? 1 : 0;
    learned_bad += row.learned_violations;
    filtered_bad += row.filtered_violations;
    unfiltered_bad += row.unfiltered_violations;
  }
  const int n = static_cast<int>(result.rows.size());
  std::printf("%d shared start/goal pairs\n", n);
  std::printf("learned policy:      %d/%d reached, %ld unstable steps\n",
              learned_ok, n, learned_bad);
  std::printf("filtered baseline:   %d/%d converged, %ld unstable steps\n",
              filtered_ok, n, filtered_bad);
  std::printf("unfiltered baseline: %d/%d converged, %ld unstable steps\n",
              unfiltered_ok, n, unfiltered_bad);
  std::printf("rows: %s\n", result.csv_path.c_str());
  return 0;
}

int run_replay(const CliArgs& args, const ExperimentConfig& cfg) {
  const ReplayResult result = cmd_replay(args.trajectory, cfg);
  int below = 0;
  for (const ZmpTraceRow& row : result.rows) below += row.stable ? 0 : 1;
  std::printf("%zu steps; min margin %.4f m at step %d; %d below threshold\n",
              result.rows.size(), result.min_margin, result.min_margin_step,
              below);
  std::printf("trace: %s\n", result.csv_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stability-aware inverse kinematics: DDPG training, "
               "evaluation, baseline comparison, and ZMP replay"};
  app.require_subcommand(1);

  CliArgs args;
  const auto add_common = [&](CLI::App* sub, bool needs_checkpoint) {
    sub->add_option("--config", args.config_path, "experiment config file")
        ->required();
    sub->add_option("--seed", args.seed, "override the config seed")
        ->each([&](const std::string&) { args.seed_set = true; });
    sub->add_option("--out", args.out_dir, "override the output directory")
        ->each([&](const std::string&) { args.out_set = true; });
    auto* ckpt = sub->add_option("--checkpoint", args.checkpoint,
                                 needs_checkpoint
                                     ? "agent checkpoint to load"
                                     : "checkpoint to resume training from");
    if (needs_checkpoint) ckpt->required();
  };

  CLI::App* train = app.add_subcommand("train", "train a policy");
  add_common(train, false);
  CLI::App* eval = app.add_subcommand("eval", "measure goal-reaching accuracy");
  add_common(eval, true);
  CLI::App* compare =
      app.add_subcommand("compare", "learned policy vs Jacobian baselines");
  add_common(compare, true);
  CLI::App* replay =
      app.add_subcommand("replay", "recompute the ZMP trace of a trajectory");
  add_common(replay, false);
  replay->add_option("trajectory", args.trajectory, "trajectory CSV to replay")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  ExperimentConfig cfg;
  try {
    cfg = load_experiment_config(args.config_path);
    if (args.seed_set) cfg.seed = args.seed;
    if (args.out_set) cfg.out_dir = args.out_dir;
    cfg.validate();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  }

  try {
    if (train->parsed()) return run_train(args, cfg);
    if (eval->parsed()) return run_eval(args, cfg);
    if (compare->parsed()) return run_compare(args, cfg);
    return run_replay(args, cfg);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 1;
  } catch (const LookupError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
