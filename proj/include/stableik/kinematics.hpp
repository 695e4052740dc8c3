#ifndef STABLEIK_KINEMATICS_HPP_
#define STABLEIK_KINEMATICS_HPP_

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace stableik {

/// One revolute joint in standard (distal) D-H convention, together with the
/// inertial properties of the link that ends at this joint's frame.
struct DhJoint {
  std::string name;
  double a = 0.0;             // link length [m]
  double alpha = 0.0;         // link twist [rad]
  double d = 0.0;             // link offset [m]
  double theta_offset = 0.0;  // joint angle offset [rad]
  double lower = -3.141592653589793;  // joint limit [rad]
  double upper = 3.141592653589793;
  double mass = 0.0;  // link mass [kg]
  Eigen::Vector3d com_local = Eigen::Vector3d::Zero();  // link CoM, link frame [m]
  int parent = -1;  // index of parent joint, -1 for the base
};

/// Pose of a frame expressed in the base (right foot sole) frame.
struct Pose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Matrix3d orientation = Eigen::Matrix3d::Identity();
};

/// A serial or branched kinematic chain rooted at the base frame.
///
/// Joints are stored parent-before-child so a single forward pass composes
/// all transforms. The actuated mask selects the joints a controller may
/// move; the rest stay at their commanded value (typically the home pose).
struct RobotModel {
  std::string name;
  std::vector<DhJoint> joints;
  std::vector<std::uint8_t> actuated;
  std::map<std::string, int> end_effectors;
  std::map<std::string, std::vector<Eigen::Vector3d>> foot_contacts;
  double gravity = 9.81;  // [m/s^2]

  int num_joints() const { return static_cast<int>(joints.size()); }
  int num_actuated() const;
  std::vector<int> actuated_indices() const;
  double total_mass() const;
  int end_effector_index(const std::string& name) const;  // throws LookupError

  /// Checks the structural invariants; throws ConfigError on violation.
  void validate() const;
};

/// Standard D-H transform Rot_z(q + theta_offset) Trans_z(d) Trans_x(a) Rot_x(alpha).
Eigen::Matrix4d dh_transform(const DhJoint& joint, double q);

/// Base-frame transform of every joint frame, one forward pass over the forest.
std::vector<Eigen::Matrix4d> joint_transforms(const RobotModel& model,
                                              const Eigen::VectorXd& q);

Pose forward_kinematics(const RobotModel& model, const Eigen::VectorXd& q,
                        int joint_index);
Pose forward_kinematics(const RobotModel& model, const Eigen::VectorXd& q,
                        const std::string& end_effector);

/// Geometric Jacobian of an end effector, 6 x n (linear rows on top).
/// Columns of joints that are not ancestors of the end effector are zero.
Eigen::MatrixXd jacobian(const RobotModel& model, const Eigen::VectorXd& q,
                         const std::string& end_effector);

/// Mass-weighted average of all link CoM points in the base frame.
Eigen::Vector3d center_of_mass(const RobotModel& model, const Eigen::VectorXd& q);

/// Base-frame CoM point of every link, aligned with the joint list.
std::vector<Eigen::Vector3d> link_com_positions(const RobotModel& model,
                                                const Eigen::VectorXd& q);

/// Component-wise clamp of q to the model's joint limits.
Eigen::VectorXd clamp_to_limits(const RobotModel& model, Eigen::VectorXd q);

/// Reads a robot model description file (key=value joint records plus
/// end_effector / foot_contact / gravity sections, versioned).
RobotModel load_robot_model(const std::string& path);
void save_robot_model(const std::string& path, const RobotModel& model);

}  // namespace stableik

#endif  // STABLEIK_KINEMATICS_HPP_
