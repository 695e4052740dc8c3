#ifndef STABLEIK_ENVIRONMENT_HPP_
#define STABLEIK_ENVIRONMENT_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stableik/kinematics.hpp"
#include "stableik/rng.hpp"
#include "stableik/stability.hpp"

namespace stableik {

/// Reward and episode constants. Distances enter the reward in centimeters
/// (distance_scale converts from model meters) so alpha = 1/70 normalizes a
/// ~70 cm reach to a penalty of 1.
struct EnvConfig {
  double alpha = 1.0 / 70.0;            // distance penalty [1/cm]
  double beta = 10.0 / 6.28318530717958647692;  // joint-travel penalty [1/rad]
  double kappa = 20.0;                  // unstable / colliding penalty
  double lambda = 50.0;                 // goal bonus
  double action_bound = 0.05;           // per-joint clip [rad/step]
  double goal_tolerance = 2.0;          // [cm]
  int max_steps = 150;
  double margin_threshold = 0.005;      // stability margin [m]
  double collision_clearance = 0.01;    // capsule surface gap [m]
  double collision_radius = 0.03;       // capsule radius [m]
  double distance_scale = 100.0;        // m -> cm
  double step_dt = 0.1;                 // nominal step period [s], for export
  int reset_max_attempts = 1000;
  std::string end_effector = "hand";

  void validate() const;  // throws ConfigError
};

/// Observation fed to the agent. Layout of vector():
/// [q_actuated | ee_position | goal | done], dimension n_actuated + 7.
struct EnvState {
  Eigen::VectorXd q;            // actuated joints [rad]
  Eigen::Vector3d ee_position = Eigen::Vector3d::Zero();  // [cm]
  Eigen::Vector3d goal = Eigen::Vector3d::Zero();         // [cm]
  bool done = false;

  Eigen::VectorXd vector() const;
};

struct Transition {
  EnvState s;
  Eigen::VectorXd a;  // clipped action [rad/step]
  double r = 0.0;
  EnvState s_next;
  bool done = false;
};

struct TrajectoryRow {
  int step = 0;
  Eigen::VectorXd q;  // all joints [rad]
  Eigen::Vector3d ee = Eigen::Vector3d::Zero();    // [m]
  Eigen::Vector3d goal = Eigen::Vector3d::Zero();  // [m]
  double reward = 0.0;
  bool stable = false;
  bool done = false;
};

/// Shortest distance between segments [p1, q1] and [p2, q2].
double segment_distance(const Eigen::Vector3d& p1, const Eigen::Vector3d& q1,
                        const Eigen::Vector3d& p2, const Eigen::Vector3d& q2);

/// Point-reaching MDP over a robot model: random stable start and goal,
/// per-step joint increments, reward shaped by distance, joint travel,
/// stability, and self-collision.
class Environment {
 public:
  Environment(RobotModel model, EnvConfig cfg);

  /// Starts an episode: start configuration and goal configuration are both
  /// rejection-sampled until stable and collision-free. Throws
  /// ModelInfeasibleError when reset_max_attempts is exhausted.
  EnvState reset(std::uint64_t rng_seed);

  /// Starts an episode from an explicit start configuration and Cartesian
  /// goal (meters). The start must be stable and collision-free.
  EnvState reset_to(const Eigen::VectorXd& q_full, const Eigen::Vector3d& goal_m);

  /// Applies one clipped joint increment. Throws EpisodeLifecycleError when
  /// the episode is over. The transition's done covers both goal and budget.
  Transition step(const Eigen::VectorXd& action);

  /// Reward of configuration q_full under the current episode's goal and
  /// start reference:
  ///   stable and collision-free:  -alpha*dist_cm - beta*|q - q_start|_2
  ///   otherwise:                  -kappa
  ///   within goal_tolerance:      adds lambda, reports done
  std::pair<double, bool> reward(const Eigen::VectorXd& q_full) const;

  bool collision_free(const Eigen::VectorXd& q_full) const;
  bool stable(const Eigen::VectorXd& q_full) const;     // quasi-static
  double stability_margin(const Eigen::VectorXd& q_full) const;

  /// Uniform joint draw, rejection-sampled to stable and collision-free.
  Eigen::VectorXd sample_valid_config(Rng& rng) const;

  int state_dim() const { return action_dim() + 7; }
  int action_dim() const { return static_cast<int>(actuated_.size()); }
  const EnvState& state() const { return state_; }
  bool episode_active() const { return active_; }
  bool goal_reached() const { return goal_reached_; }
  int steps_taken() const { return step_count_; }
  double distance_cm() const;
  const Eigen::VectorXd& full_q() const { return q_full_; }
  const std::vector<TrajectoryRow>& trajectory() const { return trajectory_; }
  const SupportPolygon& polygon() const { return polygon_; }
  const RobotModel& model() const { return model_; }
  const EnvConfig& config() const { return cfg_; }

 private:
  struct Segment {
    int joint;         // owning joint (segment ends at its origin)
    int parent;        // parent joint index, -1 for base
    int start_class;   // origin-coincidence class of the parent end
    int end_class;     // origin-coincidence class of this joint's origin
  };

  EnvState observe() const;
  void record_row(double reward, bool stable_flag, bool done_flag);

  RobotModel model_;
  EnvConfig cfg_;
  SupportPolygon polygon_;
  std::vector<int> actuated_;
  std::vector<Segment> segments_;
  std::vector<std::pair<int, int>> check_pairs_;  // non-adjacent segment pairs

  Rng rng_{0};
  Eigen::VectorXd q_full_;
  Eigen::VectorXd q_start_;  // episode-start reference for the travel penalty
  Eigen::Vector3d goal_m_ = Eigen::Vector3d::Zero();
  EnvState state_;
  bool active_ = false;
  bool goal_reached_ = false;
  int step_count_ = 0;
  std::vector<TrajectoryRow> trajectory_;
};

}  // namespace stableik

#endif  // STABLEIK_ENVIRONMENT_HPP_
