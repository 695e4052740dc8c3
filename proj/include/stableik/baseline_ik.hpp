#ifndef STABLEIK_BASELINE_IK_HPP_
#define STABLEIK_BASELINE_IK_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "stableik/kinematics.hpp"

namespace stableik {

enum class IkMethod { kPseudoInverse, kTranspose, kDls };

struct IkSolverConfig {
  IkMethod method = IkMethod::kDls;
  double lambda = 0.1;       // DLS damping
  double step_gain = 0.5;
  int max_iterations = 500;
  double position_tolerance = 1e-3;  // [m]
  std::string end_effector = "hand";
  double margin_threshold = 0.005;  // stability filter margin [m]
  std::uint64_t seed = 0;           // restart perturbation stream

  void validate() const;  // throws ConfigError
};

struct IkResult {
  Eigen::VectorXd q_final;
  int iterations = 0;
  bool converged = false;
  bool stable = false;  // set by the stability-filtered wrapper only
  int restarts = 0;
  std::string diagnostic;
  std::vector<Eigen::VectorXd> trajectory;  // includes the start configuration
};

/// One differential-IK update toward a Cartesian goal. Only actuated joints
/// move; the result is clamped to the joint limits.
///   transpose:       q + gain * J^T e
///   pseudo_inverse:  q + gain * pinv(J) e   (SVD; sigma_min < 1e-8 throws
///                    SingularityError so ill-conditioning stays observable)
///   dls:             q + gain * J^T (J J^T + lambda^2 I)^{-1} e
/// with J the 3 x n_actuated position Jacobian and e = goal - fk(q).
Eigen::VectorXd ik_step(const RobotModel& model, const Eigen::VectorXd& q,
                        const Eigen::Vector3d& goal, const IkSolverConfig& cfg);

/// Iterates ik_step until the position error drops to the tolerance or the
/// iteration budget runs out. A SingularityError inside a step ends the solve
/// as non-converged with the message in `diagnostic`.
IkResult solve_ik(const RobotModel& model, const Eigen::VectorXd& q0,
                  const Eigen::Vector3d& goal, const IkSolverConfig& cfg);

/// solve_ik, re-run from perturbed starts (uniform +-0.1 rad on actuated
/// joints) until some attempt converges with every intermediate configuration
/// quasi-statically stable. Requires a model with two contact feet.
IkResult solve_ik_stability_filtered(const RobotModel& model,
                                     const Eigen::VectorXd& q0,
                                     const Eigen::Vector3d& goal,
                                     const IkSolverConfig& cfg,
                                     int max_restarts);

}  // namespace stableik

#endif  // STABLEIK_BASELINE_IK_HPP_
