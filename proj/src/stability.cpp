#include "stableik/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stableik/errors.hpp"

namespace stableik {

Eigen::Vector2d zmp(const Eigen::Vector3d& com, double mass, double gravity,
                    const MomentumState& momentum) {
  const double denom = mass * gravity + momentum.linear_rate.z();
  if (std::abs(denom) < 1e-9)
    throw DegenerateDynamicsError("ZMP denominator vanished (Mg + Pdot_z ~ 0)");
  // Rearranged so zero momentum gives the CoM projection with no rounding:
  // (Mgx - Ldot_y)/(Mg + Pdot_z) = x - (Ldot_y + x Pdot_z)/(Mg + Pdot_z).
  const double px =
      com.x() - (momentum.angular_rate.y() + com.x() * momentum.linear_rate.z()) / denom;
  const double py =
      com.y() + (momentum.angular_rate.x() - com.y() * momentum.linear_rate.z()) / denom;
  return {px, py};
}

MomentumState momentum_derivatives(
    const std::array<Eigen::Vector3d, 3>& com_window,
    const std::array<Eigen::Vector3d, 3>& angular_momentum_window, double dt,
    double mass) {
  if (!(dt > 0.0)) throw ConfigError("momentum_derivatives: dt must be positive");
  MomentumState m;
  m.linear_rate =
      mass * (com_window[2] - 2.0 * com_window[1] + com_window[0]) / (dt * dt);
  m.angular_rate =
      (angular_momentum_window[2] - angular_momentum_window[0]) / (2.0 * dt);
  return m;
}

SupportPolygon convex_hull(std::vector<Eigen::Vector2d> points) {
  std::sort(points.begin(), points.end(),
            [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
              return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
            });
  points.erase(std::unique(points.begin(), points.end(),
                           [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
                             return a.x() == b.x() && a.y() == b.y();
                           }),
               points.end());
  if (points.size() < 3)
    throw DegeneratePolygonError("support polygon needs at least 3 distinct points");

  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a,
                  const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };

  const std::size_t n = points.size();
  std::vector<Eigen::Vector2d> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {  // lower chain
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], points[i]) <= 0.0) --k;
    hull[k++] = points[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = n - 1; i-- > 0;) {  // upper chain
    while (k >= lower && cross(hull[k - 2], hull[k - 1], points[i]) <= 0.0) --k;
    hull[k++] = points[i];
  }
  hull.resize(k - 1);
  if (hull.size() < 3)
    throw DegeneratePolygonError("foot contact points are collinear");
  return SupportPolygon{std::move(hull)};
}

SupportPolygon support_polygon(const RobotModel& model) {
  int feet_with_points = 0;
  std::vector<Eigen::Vector2d> points;
  for (const auto& [foot, pts] : model.foot_contacts) {
    if (!pts.empty()) ++feet_with_points;
    for (const auto& p : pts) points.emplace_back(p.x(), p.y());
  }
  if (feet_with_points < 2)
    throw ConfigError("double support requires contact points on both feet");
  return convex_hull(std::move(points));
}

double polygon_margin(const Eigen::Vector2d& point, const SupportPolygon& polygon) {
  const auto& v = polygon.vertices;
  const std::size_t n = v.size();
  if (n < 3) throw DegeneratePolygonError("polygon has fewer than 3 vertices");

  bool inside = true;
  double min_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d& a = v[i];
    const Eigen::Vector2d& b = v[(i + 1) % n];
    const Eigen::Vector2d edge = b - a;
    const Eigen::Vector2d rel = point - a;
    if (edge.x() * rel.y() - edge.y() * rel.x() < 0.0) inside = false;
    const double len2 = edge.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp(rel.dot(edge) / len2, 0.0, 1.0) : 0.0;
    min_dist = std::min(min_dist, (rel - t * edge).norm());
  }
  return inside ? min_dist : -min_dist;
}

StabilityReport is_stable(const Eigen::Vector2d& zmp_point,
                          const SupportPolygon& polygon,
                          double margin_threshold) {
  StabilityReport report;
  report.zmp = zmp_point;
  report.polygon = polygon;
  report.margin = polygon_margin(zmp_point, polygon);
  report.stable = report.margin >= margin_threshold;
  return report;
}

}  // namespace stableik
