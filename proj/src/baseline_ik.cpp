#include "stableik/baseline_ik.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "stableik/errors.hpp"
#include "stableik/rng.hpp"
#include "stableik/stability.hpp"

namespace stableik {

void IkSolverConfig::validate() const {
  if (method == IkMethod::kDls && !(lambda > 0.0))
    throw ConfigError("ik: dls requires lambda > 0");
  if (max_iterations < 1) throw ConfigError("ik: max_iterations must be >= 1");
  if (!(position_tolerance > 0.0))
    throw ConfigError("ik: position_tolerance must be > 0");
  if (!(step_gain > 0.0)) throw ConfigError("ik: step_gain must be > 0");
}

Eigen::VectorXd ik_step(const RobotModel& model, const Eigen::VectorXd& q,
                        const Eigen::Vector3d& goal,
                        const IkSolverConfig& cfg) {
  const Eigen::Vector3d e =
      goal - forward_kinematics(model, q, cfg.end_effector).position;

  const std::vector<int> act = model.actuated_indices();
  const Eigen::MatrixXd j_full = jacobian(model, q, cfg.end_effector);
  Eigen::MatrixXd j(3, act.size());
  for (std::size_t k = 0; k < act.size(); ++k)
    j.col(k) = j_full.col(act[k]).head<3>();

  Eigen::VectorXd dq_act;
  switch (cfg.method) {
    case IkMethod::kTranspose:
      dq_act = cfg.step_gain * (j.transpose() * e);
      break;
    case IkMethod::kPseudoInverse: {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(
          j, Eigen::ComputeThinU | Eigen::ComputeThinV);
      if (svd.singularValues().minCoeff() < 1e-8)
        throw SingularityError("pseudo-inverse jacobian is near-singular");
      dq_act = cfg.step_gain * svd.solve(e);
      break;
    }
    case IkMethod::kDls: {
      const Eigen::Matrix3d jjt =
          j * j.transpose() +
          cfg.lambda * cfg.lambda * Eigen::Matrix3d::Identity();
      dq_act = cfg.step_gain * (j.transpose() * jjt.ldlt().solve(e));
      break;
    }
  }

  Eigen::VectorXd q_next = q;
  for (std::size_t k = 0; k < act.size(); ++k) q_next[act[k]] += dq_act[k];
  return clamp_to_limits(model, std::move(q_next));
}

IkResult solve_ik(const RobotModel& model, const Eigen::VectorXd& q0,
                  const Eigen::Vector3d& goal, const IkSolverConfig& cfg) {
  cfg.validate();
  IkResult result;
  Eigen::VectorXd q = clamp_to_limits(model, q0);
  result.trajectory.push_back(q);

  for (int iter = 0; iter <= cfg.max_iterations; ++iter) {
    const double err =
        (goal - forward_kinematics(model, q, cfg.end_effector).position).norm();
    if (err <= cfg.position_tolerance) {
      result.q_final = q;
      result.iterations = iter;
      result.converged = true;
      return result;
    }
    if (iter == cfg.max_iterations) break;
    try {
      q = ik_step(model, q, goal, cfg);
    } catch (const SingularityError& e) {
      result.q_final = q;
      result.iterations = iter;
      result.diagnostic = e.what();
      return result;
    }
    result.trajectory.push_back(q);
  }

  result.q_final = q;
  result.iterations = cfg.max_iterations;
  result.diagnostic = "iteration budget exhausted";
  return result;
}

namespace {

bool trajectory_stable(const RobotModel& model, const SupportPolygon& polygon,
                       const std::vector<Eigen::VectorXd>& trajectory,
                       double margin_threshold) {
  for (const auto& q : trajectory) {
    const Eigen::Vector3d com = center_of_mass(model, q);
    if (!is_stable({com.x(), com.y()}, polygon, margin_threshold).stable)
      return false;
  }
  return true;
}

}  // namespace

IkResult solve_ik_stability_filtered(const RobotModel& model,
                                     const Eigen::VectorXd& q0,
                                     const Eigen::Vector3d& goal,
                                     const IkSolverConfig& cfg,
                                     int max_restarts) {
  const SupportPolygon polygon = support_polygon(model);
  const std::vector<int> act = model.actuated_indices();
  Rng rng(Rng::derive_seed(cfg.seed, 0x1f));

  IkResult last;
  for (int restart = 0; restart <= max_restarts; ++restart) {
    Eigen::VectorXd start = q0;
    if (restart > 0)
      for (int i : act) start[i] += rng.uniform(-0.1, 0.1);

    IkResult attempt = solve_ik(model, start, goal, cfg);
    attempt.restarts = restart;
    attempt.stable = trajectory_stable(model, polygon, attempt.trajectory,
                                       cfg.margin_threshold);
    if (attempt.converged && attempt.stable) return attempt;
    last = std::move(attempt);
  }
  last.restarts = max_restarts;
  if (last.diagnostic.empty() || last.converged)
    last.diagnostic = "no stable converged trajectory within restart budget";
  return last;
}

}  // namespace stableik
