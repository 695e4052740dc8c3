#include "stableik/kinematics.hpp"

#include <cmath>

#include "stableik/errors.hpp"

namespace stableik {

namespace {
constexpr double kPi = 3.141592653589793;
}

int RobotModel::num_actuated() const {
  int n = 0;
  for (auto flag : actuated) n += flag ? 1 : 0;
  return n;
}

std::vector<int> RobotModel::actuated_indices() const {
  std::vector<int> idx;
  idx.reserve(actuated.size());
  for (int i = 0; i < num_joints(); ++i)
    if (actuated[i]) idx.push_back(i);
  return idx;
}

double RobotModel::total_mass() const {
  double m = 0.0;
  for (const auto& j : joints) m += j.mass;
  return m;
}

int RobotModel::end_effector_index(const std::string& ee_name) const {
  auto it = end_effectors.find(ee_name);
  if (it == end_effectors.end())
    throw LookupError("unknown end effector: " + ee_name);
  return it->second;
}

void RobotModel::validate() const {
  if (joints.empty()) throw ConfigError("model has no joints");
  if (actuated.size() != joints.size())
    throw ConfigError("actuated mask length does not match joint count");
  for (int i = 0; i < num_joints(); ++i) {
    const DhJoint& j = joints[i];
    if (j.parent < -1 || j.parent >= i)
      throw ConfigError("joint '" + j.name +
                        "': parent must be declared before the joint");
    if (!(j.lower < j.upper))
      throw ConfigError("joint '" + j.name + "': lower limit must be < upper");
    if (j.mass < 0.0)
      throw ConfigError("joint '" + j.name + "': negative mass");
    if (std::abs(j.alpha) > kPi + 1e-12 || std::abs(j.theta_offset) > kPi + 1e-12)
      throw ConfigError("joint '" + j.name +
                        "': alpha and theta_offset must lie in [-pi, pi]");
  }
  for (const auto& [ee_name, idx] : end_effectors)
    if (idx < 0 || idx >= num_joints())
      throw ConfigError("end effector '" + ee_name + "': joint index out of range");
  // Feet are optional at this level (bare arms are valid chains); consumers
  // that need ground support, like support_polygon, enforce double support.
  for (const auto& [foot, pts] : foot_contacts)
    if (pts.empty())
      throw ConfigError("foot '" + foot + "' has no contact vertices");
}

Eigen::Matrix4d dh_transform(const DhJoint& joint, double q) {
  const double theta = q + joint.theta_offset;
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  const double ca = std::cos(joint.alpha);
  const double sa = std::sin(joint.alpha);
  const double a = joint.a;
  const double d = joint.d;

  Eigen::Matrix4d t;
  t << ct, -st * ca, st * sa, a * ct,
       st, ct * ca, -ct * sa, a * st,
       0.0, sa, ca, d,
       0.0, 0.0, 0.0, 1.0;
  return t;
}

std::vector<Eigen::Matrix4d> joint_transforms(const RobotModel& model,
                                              const Eigen::VectorXd& q) {
  if (q.size() != model.num_joints())
    throw ShapeError("joint vector length does not match model");
  std::vector<Eigen::Matrix4d> transforms(model.joints.size());
  for (int i = 0; i < model.num_joints(); ++i) {
    const DhJoint& j = model.joints[i];
    const Eigen::Matrix4d local = dh_transform(j, q[i]);
    transforms[i] = (j.parent < 0) ? local : transforms[j.parent] * local;
  }
  return transforms;
}

Pose forward_kinematics(const RobotModel& model, const Eigen::VectorXd& q,
                        int joint_index) {
  if (joint_index < 0 || joint_index >= model.num_joints())
    throw LookupError("joint index out of range");
  const auto transforms = joint_transforms(model, q);
  Pose pose;
  pose.position = transforms[joint_index].block<3, 1>(0, 3);
  pose.orientation = transforms[joint_index].block<3, 3>(0, 0);
  return pose;
}

Pose forward_kinematics(const RobotModel& model, const Eigen::VectorXd& q,
                        const std::string& end_effector) {
  return forward_kinematics(model, q, model.end_effector_index(end_effector));
}

Eigen::MatrixXd jacobian(const RobotModel& model, const Eigen::VectorXd& q,
                         const std::string& end_effector) {
  const int ee = model.end_effector_index(end_effector);
  const auto transforms = joint_transforms(model, q);
  const Eigen::Vector3d p_ee = transforms[ee].block<3, 1>(0, 3);

  // Ancestors of the end effector, including the end-effector joint itself.
  std::vector<std::uint8_t> on_chain(model.joints.size(), 0);
  for (int i = ee; i >= 0; i = model.joints[i].parent) on_chain[i] = 1;

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(6, model.num_joints());
  for (int i = 0; i < model.num_joints(); ++i) {
    if (!on_chain[i]) continue;
    // Joint i rotates about the z axis of its parent frame, anchored there.
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
    Eigen::Vector3d anchor = Eigen::Vector3d::Zero();
    const int parent = model.joints[i].parent;
    if (parent >= 0) {
      axis = transforms[parent].block<3, 1>(0, 2);
      anchor = transforms[parent].block<3, 1>(0, 3);
    }
    jac.block<3, 1>(0, i) = axis.cross(p_ee - anchor);
    jac.block<3, 1>(3, i) = axis;
  }
  return jac;
}

std::vector<Eigen::Vector3d> link_com_positions(const RobotModel& model,
                                                const Eigen::VectorXd& q) {
  const auto transforms = joint_transforms(model, q);
  std::vector<Eigen::Vector3d> points(model.joints.size());
  for (int i = 0; i < model.num_joints(); ++i) {
    points[i] = transforms[i].block<3, 3>(0, 0) * model.joints[i].com_local +
                transforms[i].block<3, 1>(0, 3);
  }
  return points;
}

Eigen::Vector3d center_of_mass(const RobotModel& model, const Eigen::VectorXd& q) {
  const double total = model.total_mass();
  if (total <= 0.0)
    throw DegenerateModelError("center of mass undefined: total mass is zero");
  const auto points = link_com_positions(model, q);
  Eigen::Vector3d weighted = Eigen::Vector3d::Zero();
  for (int i = 0; i < model.num_joints(); ++i)
    weighted += model.joints[i].mass * points[i];
  return weighted / total;
}

Eigen::VectorXd clamp_to_limits(const RobotModel& model, Eigen::VectorXd q) {
  if (q.size() != model.num_joints())
    throw ShapeError("joint vector length does not match model");
  for (int i = 0; i < model.num_joints(); ++i) {
    const DhJoint& j = model.joints[i];
    q[i] = std::min(std::max(q[i], j.lower), j.upper);
  }
  return q;
}

}  // namespace stableik
