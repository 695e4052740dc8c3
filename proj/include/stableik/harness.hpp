#ifndef STABLEIK_HARNESS_HPP_
#define STABLEIK_HARNESS_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stableik/baseline_ik.hpp"
#include "stableik/ddpg.hpp"
#include "stableik/environment.hpp"

namespace stableik {

/// Everything one experiment needs: the robot, the reward shaping, the agent
/// hyperparameters, the baseline solver settings, and the run bookkeeping.
/// The episode step budget lives here once; environments constructed by the
/// commands receive it as their own max_steps.
struct ExperimentConfig {
  std::string model_path;
  std::string out_dir = "out";
  int episodes = 50000;
  int max_steps = 150;
  std::uint64_t seed = 1;
  int checkpoint_interval = 1000;
  int eval_samples_per_seed = 100;
  int eval_seeds = 3;
  int compare_pairs = 50;
  int ik_max_restarts = 10;
  EnvConfig env;
  AgentConfig agent;
  IkSolverConfig ik;

  void validate() const;  // throws ConfigError
};

/// Parses `key = value` lines ('#' comments, blank lines ignored). Every key
/// must be known; duplicates and malformed values are parse errors carrying
/// the line number. Values left out keep their defaults.
ExperimentConfig load_experiment_config(const std::string& path);

/// Deterministic serialization of every field in a fixed order. Reading the
/// text back yields an identical config, and the provenance hash is defined
/// over exactly this text.
std::string canonical_config_text(const ExperimentConfig& cfg);
void save_experiment_config(const std::string& path, const ExperimentConfig& cfg);

/// FNV-1a (64-bit) of the canonical text, as 16 hex digits. Written into
/// every CSV the harness emits so artifacts can be traced to their config.
std::string config_hash(const ExperimentConfig& cfg);

/// Episode trajectory files: `# config_hash <hex>` comment, then a header
/// `step,q0..q{n-1},ee_x,ee_y,ee_z,goal_x,goal_y,goal_z,reward,stable,done`,
/// then one row per environment step (plus the start row). Positions are in
/// meters; flags are 0/1.
void write_trajectory_csv(const std::string& path,
                          const std::vector<TrajectoryRow>& rows,
                          const std::string& hash);
std::vector<TrajectoryRow> read_trajectory_csv(const std::string& path);

struct TrainResult {
  std::vector<EpisodeLog> logs;
  std::string training_csv;
  std::vector<std::string> checkpoints;  // manifest paths, oldest first
};

/// Trains the agent and writes, under cfg.out_dir: the resolved config, the
/// raw training CSV (one row per episode), min-max normalized curve CSVs for
/// mean Q, cumulative reward, and final error, and a checkpoint every
/// checkpoint_interval episodes plus one at the end. `resume_checkpoint`
/// restarts an interrupted run from a saved agent; the completed episodes
/// recorded in the checkpoint are skipped, and the CSV is appended to.
TrainResult cmd_train(const ExperimentConfig& cfg,
                      const std::string& resume_checkpoint = "");

struct AccuracyReport {
  std::vector<double> per_seed;  // success fraction per evaluation seed
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  int episode = 0;  // training episodes completed by the checkpoint
  long stable_steps = 0;           // steps the environment labeled stable
  long verified_stable_steps = 0;  // of those, independently re-verified
};

/// Runs eval_samples_per_seed fresh episodes for each of eval_seeds seeds
/// under the deterministic (noise-free) policy from the checkpoint. Success
/// means the goal tolerance was met within the step budget. Writes a
/// per-episode CSV; the report aggregates it. Every step the environment
/// called stable is re-checked against the stability module directly. Each
/// seed's first episode is exported as trajectory_seed<k>.csv for replay.
AccuracyReport cmd_eval(const std::string& checkpoint,
                        const ExperimentConfig& cfg);

struct ComparePair {
  Eigen::VectorXd q_start;  // full configuration, stable and collision-free
  Eigen::Vector3d goal;     // meters
};

struct CompareRow {
  int pair = 0;
  bool learned_success = false;
  int learned_steps = 0;
  int learned_violations = 0;
  bool filtered_converged = false;
  int filtered_iterations = 0;
  int filtered_restarts = 0;
  int filtered_violations = 0;
  bool unfiltered_converged = false;
  int unfiltered_iterations = 0;
  int unfiltered_violations = 0;
};

struct CompareResult {
  std::vector<CompareRow> rows;
  std::string csv_path;
};

/// Shared (start, goal) pairs for the comparison: both endpoints are
/// rejection-sampled valid configurations, the goal taken through forward
/// kinematics, so every goal is reachable by construction.
std::vector<ComparePair> sample_compare_pairs(const ExperimentConfig& cfg,
                                              int count);

/// Runs the learned policy, the stability-filtered baseline, and the plain
/// baseline from the same starts to the same goals. Violation counts are
/// independent re-checks of every visited configuration against the
/// stability module, using the environment's margin threshold.
CompareResult cmd_compare(const std::string& checkpoint,
                          const ExperimentConfig& cfg,
                          const std::vector<ComparePair>& pairs);
CompareResult cmd_compare(const std::string& checkpoint,
                          const ExperimentConfig& cfg);

struct ZmpTraceRow {
  int step = 0;
  double px = 0.0;
  double py = 0.0;
  double com_x = 0.0;
  double com_y = 0.0;
  bool stable = false;
  double margin = 0.0;  // [m]
};

struct ReplayResult {
  std::vector<ZmpTraceRow> rows;
  double min_margin = 0.0;
  int min_margin_step = 0;
  std::string csv_path;
};

/// Recomputes the momentum-aware zero-moment point along an exported
/// trajectory. Momentum rates come from central finite differences over the
/// configuration history with dt = env.step_dt; the first two and last two
/// steps lack a full difference stencil and fall back to the quasi-static
/// point, which is exact for a stationary robot. Writes the ZMP trace CSV
/// (step, px, py, com_x, com_y, stable, margin) next to a min-margin summary.
ReplayResult cmd_replay(const std::string& trajectory_path,
                        const ExperimentConfig& cfg);

}  // namespace stableik

#endif  // STABLEIK_HARNESS_HPP_
