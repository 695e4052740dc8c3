#ifndef STABLEIK_STABILITY_HPP_
#define STABLEIK_STABILITY_HPP_

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "stableik/kinematics.hpp"

namespace stableik {

/// Rates of change of linear and angular momentum about the base frame.
struct MomentumState {
  Eigen::Vector3d linear_rate = Eigen::Vector3d::Zero();   // P_dot [kg m/s^2]
  Eigen::Vector3d angular_rate = Eigen::Vector3d::Zero();  // L_dot [kg m^2/s^2]
};

/// Counter-clockwise convex polygon in the ground plane.
struct SupportPolygon {
  std::vector<Eigen::Vector2d> vertices;
};

struct StabilityReport {
  Eigen::Vector2d zmp = Eigen::Vector2d::Zero();
  SupportPolygon polygon;
  bool stable = false;
  double margin = 0.0;  // signed distance to the boundary, positive inside [m]
};

/// Zero-moment point with momentum terms:
///   px = (M g x - Ldot_y) / (M g + Pdot_z)
///   py = (M g y + Ldot_x) / (M g + Pdot_z)
/// Evaluated in a rearranged form that reduces to the CoM projection exactly
/// when the momentum rates are zero. Throws DegenerateDynamicsError when the
/// denominator magnitude falls below 1e-9.
Eigen::Vector2d zmp(const Eigen::Vector3d& com, double mass, double gravity,
                    const MomentumState& momentum);

/// Finite-difference momentum rates from three consecutive samples spaced dt
/// apart: second central difference of the CoM for P_dot, first central
/// difference of the angular momentum for L_dot.
MomentumState momentum_derivatives(
    const std::array<Eigen::Vector3d, 3>& com_window,
    const std::array<Eigen::Vector3d, 3>& angular_momentum_window, double dt,
    double mass);

/// Convex hull (monotone chain) of 2D points, counter-clockwise, collinear
/// points dropped. Throws DegeneratePolygonError if the hull has no area.
SupportPolygon convex_hull(std::vector<Eigen::Vector2d> points);

/// Hull of all foot contact vertices projected to the ground plane.
/// Requires at least two feet with contact points (double support).
SupportPolygon support_polygon(const RobotModel& model);

/// Signed distance from a point to the polygon boundary, positive inside.
/// Boundary points have margin exactly zero.
double polygon_margin(const Eigen::Vector2d& point, const SupportPolygon& polygon);

/// Stable iff the margin is at least margin_threshold (closed polygon, so a
/// boundary point is stable at threshold zero).
StabilityReport is_stable(const Eigen::Vector2d& zmp_point,
                          const SupportPolygon& polygon,
                          double margin_threshold);

}  // namespace stableik

#endif  // STABLEIK_STABILITY_HPP_
