#include "stableik/environment.hpp"

#include <algorithm>
#include <cmath>

#include "stableik/errors.hpp"

namespace stableik {

void EnvConfig::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0))
      throw ConfigError(std::string("env: ") + name + " must be positive");
  };
  positive(alpha, "alpha");
  positive(beta, "beta");
  positive(kappa, "kappa");
  positive(lambda, "lambda");
  positive(action_bound, "action_bound");
  positive(goal_tolerance, "goal_tolerance");
  positive(margin_threshold, "margin_threshold");
  // Zero radius and clearance switch self-collision checking off, which is
  // the right model for planar arms whose links sweep one plane.
  if (collision_clearance < 0.0)
    throw ConfigError("env: collision_clearance must be non-negative");
  if (collision_radius < 0.0)
    throw ConfigError("env: collision_radius must be non-negative");
  positive(distance_scale, "distance_scale");
  positive(step_dt, "step_dt");
  if (max_steps < 1) throw ConfigError("env: max_steps must be >= 1");
  if (reset_max_attempts < 1)
    throw ConfigError("env: reset_max_attempts must be >= 1");
  if (end_effector.empty()) throw ConfigError("env: end_effector unset");
}

Eigen::VectorXd EnvState::vector() const {
  Eigen::VectorXd v(q.size() + 7);
  v.head(q.size()) = q;
  v.segment(q.size(), 3) = ee_position;
  v.segment(q.size() + 3, 3) = goal;
  v[q.size() + 6] = done ? 1.0 : 0.0;
  return v;
}

double segment_distance(const Eigen::Vector3d& p1, const Eigen::Vector3d& q1,
                        const Eigen::Vector3d& p2, const Eigen::Vector3d& q2) {
  // Closest points between two segments, clamped coordinates s, t in [0,1].
  const Eigen::Vector3d d1 = q1 - p1;
  const Eigen::Vector3d d2 = q2 - p2;
  const Eigen::Vector3d r = p1 - p2;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);

  double s = 0.0, t = 0.0;
  constexpr double kEps = 1e-30;
  if (a <= kEps && e <= kEps) {
    return r.norm();  // both segments are points
  }
  if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      if (denom > kEps) s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return (p1 + s * d1 - (p2 + t * d2)).norm();
}

Environment::Environment(RobotModel model, EnvConfig cfg)
    : model_(std::move(model)), cfg_(std::move(cfg)) {
  cfg_.validate();
  model_.validate();
  model_.end_effector_index(cfg_.end_effector);  // throws LookupError if absent
  polygon_ = support_polygon(model_);
  actuated_ = model_.actuated_indices();
  if (actuated_.empty())
    throw ConfigError("environment needs at least one actuated joint");

  // Origin-coincidence classes: a joint whose frame origin sits on its
  // parent's (a = d = 0, a static property) shares the parent's class, so
  // links meeting at a physically shared point count as adjacent.
  const int n = model_.num_joints();
  std::vector<int> cls(n);
  const int base_class = n;  // distinct id for the base origin
  for (int i = 0; i < n; ++i) {
    const DhJoint& j = model_.joints[i];
    const int parent_cls = j.parent < 0 ? base_class : cls[j.parent];
    const bool zero_length = j.a == 0.0 && j.d == 0.0;
    cls[i] = zero_length ? parent_cls : i;
  }
  for (int i = 0; i < n; ++i) {
    const DhJoint& j = model_.joints[i];
    if (j.a == 0.0 && j.d == 0.0) continue;  // zero-length: no physical link
    Segment seg;
    seg.joint = i;
    seg.parent = j.parent;
    seg.start_class = j.parent < 0 ? base_class : cls[j.parent];
    seg.end_class = cls[i];
    segments_.push_back(seg);
  }
  for (std::size_t i = 0; i < segments_.size(); ++i)
    for (std::size_t k = i + 1; k < segments_.size(); ++k) {
      const Segment& a = segments_[i];
      const Segment& b = segments_[k];
      const bool adjacent = a.start_class == b.start_class ||
                            a.start_class == b.end_class ||
                            a.end_class == b.start_class ||
                            a.end_class == b.end_class;
      if (!adjacent) check_pairs_.emplace_back(static_cast<int>(i),
                                               static_cast<int>(k));
    }

  q_full_ = Eigen::VectorXd::Zero(n);
}

bool Environment::collision_free(const Eigen::VectorXd& q_full) const {
  if (check_pairs_.empty()) return true;
  const auto transforms = joint_transforms(model_, q_full);
  std::vector<Eigen::Vector3d> origin(segments_.size());
  std::vector<Eigen::Vector3d> start(segments_.size());
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const Segment& seg = segments_[i];
    origin[i] = transforms[seg.joint].block<3, 1>(0, 3);
    start[i] = seg.parent < 0
                   ? Eigen::Vector3d(Eigen::Vector3d::Zero())
                   : Eigen::Vector3d(transforms[seg.parent].block<3, 1>(0, 3));
  }
  const double min_gap = 2.0 * cfg_.collision_radius + cfg_.collision_clearance;
  for (const auto& [i, k] : check_pairs_) {
    if (segment_distance(start[i], origin[i], start[k], origin[k]) < min_gap)
      return false;
  }
  return true;
}

double Environment::stability_margin(const Eigen::VectorXd& q_full) const {
  const Eigen::Vector3d com = center_of_mass(model_, q_full);
  return polygon_margin({com.x(), com.y()}, polygon_);
}

bool Environment::stable(const Eigen::VectorXd& q_full) const {
  return stability_margin(q_full) >= cfg_.margin_threshold;
}

Eigen::VectorXd Environment::sample_valid_config(Rng& rng) const {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(model_.num_joints());
  for (int attempt = 0; attempt < cfg_.reset_max_attempts; ++attempt) {
    for (int idx : actuated_) {
      const DhJoint& j = model_.joints[idx];
      q[idx] = rng.uniform(j.lower, j.upper);
    }
    if (stable(q) && collision_free(q)) return q;
  }
  throw ModelInfeasibleError(
      "no stable collision-free configuration found in " +
      std::to_string(cfg_.reset_max_attempts) + " attempts");
}

EnvState Environment::observe() const {
  EnvState s;
  s.q.resize(actuated_.size());
  for (std::size_t k = 0; k < actuated_.size(); ++k)
    s.q[k] = q_full_[actuated_[k]];
  const Eigen::Vector3d ee =
      forward_kinematics(model_, q_full_, cfg_.end_effector).position;
  s.ee_position = ee * cfg_.distance_scale;
  s.goal = goal_m_ * cfg_.distance_scale;
  s.done = !active_;
  return s;
}

double Environment::distance_cm() const {
  const Eigen::Vector3d ee =
      forward_kinematics(model_, q_full_, cfg_.end_effector).position;
  return (ee - goal_m_).norm() * cfg_.distance_scale;
}

EnvState Environment::reset(std::uint64_t rng_seed) {
  rng_ = Rng(rng_seed);
  q_full_ = sample_valid_config(rng_);
  const Eigen::VectorXd goal_config = sample_valid_config(rng_);
  goal_m_ =
      forward_kinematics(model_, goal_config, cfg_.end_effector).position;

  q_start_ = q_full_;
  step_count_ = 0;
  active_ = true;
  goal_reached_ = false;
  state_ = observe();

  trajectory_.clear();
  record_row(0.0, stable(q_full_), false);
  return state_;
}

EnvState Environment::reset_to(const Eigen::VectorXd& q_full,
                               const Eigen::Vector3d& goal_m) {
  if (q_full.size() != model_.num_joints())
    throw ShapeError("reset_to: configuration dimension mismatch");
  const Eigen::VectorXd q = clamp_to_limits(model_, q_full);
  if (!stable(q) || !collision_free(q))
    throw ConfigError("reset_to: start configuration must be stable and collision-free");

  q_full_ = q;
  goal_m_ = goal_m;
  q_start_ = q_full_;
  step_count_ = 0;
  active_ = true;
  goal_reached_ = false;
  state_ = observe();

  trajectory_.clear();
  record_row(0.0, true, false);
  return state_;
}

std::pair<double, bool> Environment::reward(
    const Eigen::VectorXd& q_full) const {
  const Eigen::Vector3d ee =
      forward_kinematics(model_, q_full, cfg_.end_effector).position;
  const double dist_cm = (ee - goal_m_).norm() * cfg_.distance_scale;

  double r;
  if (stable(q_full) && collision_free(q_full)) {
    double travel2 = 0.0;
    for (int idx : actuated_) {
      const double dq = q_full[idx] - q_start_[idx];
      travel2 += dq * dq;
    }
    r = -cfg_.alpha * dist_cm - cfg_.beta * std::sqrt(travel2);
  } else {
    r = -cfg_.kappa;
  }

  bool done = false;
  if (dist_cm <= cfg_.goal_tolerance) {
    r += cfg_.lambda;
    done = true;
  }
  return {r, done};
}

Transition Environment::step(const Eigen::VectorXd& action) {
  if (!active_)
    throw EpisodeLifecycleError("step called on a finished episode");
  if (action.size() != action_dim())
    throw ConfigError("action dimension mismatch");

  Transition tr;
  tr.s = state_;

  tr.a = action;
  for (int k = 0; k < tr.a.size(); ++k)
    tr.a[k] = std::clamp(tr.a[k], -cfg_.action_bound, cfg_.action_bound);

  for (std::size_t k = 0; k < actuated_.size(); ++k)
    q_full_[actuated_[k]] += tr.a[static_cast<int>(k)];
  q_full_ = clamp_to_limits(model_, q_full_);

  const auto [r, at_goal] = reward(q_full_);
  step_count_ += 1;
  goal_reached_ = at_goal;
  const bool out_of_budget = step_count_ >= cfg_.max_steps;
  active_ = !(at_goal || out_of_budget);

  state_ = observe();
  tr.r = r;
  tr.s_next = state_;
  tr.done = at_goal || out_of_budget;
  record_row(r, stable(q_full_), tr.done);
  return tr;
}

void Environment::record_row(double reward_value, bool stable_flag,
                             bool done_flag) {
  TrajectoryRow row;
  row.step = step_count_;
  row.q = q_full_;
  row.ee = forward_kinematics(model_, q_full_, cfg_.end_effector).position;
  row.goal = goal_m_;
  row.reward = reward_value;
  row.stable = stable_flag;
  row.done = done_flag;
  trajectory_.push_back(std::move(row));
}

}  // namespace stableik
