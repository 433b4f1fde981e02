#include "scenegram/segment_stats.hpp"

#include <algorithm>
#include <stdexcept>

namespace scenegram {

Eigen::Vector3d SegmentStats::centroid() const {
  if (point_count == 0) return Eigen::Vector3d::Zero();
  return sum / static_cast<double>(point_count);
}

Eigen::Matrix3d SegmentStats::centered_scatter() const {
  if (point_count == 0) return Eigen::Matrix3d::Zero();
  Eigen::Matrix3d c = scatter - sum * sum.transpose() / static_cast<double>(point_count);
  // Symmetrize away round-off.
  return 0.5 * (c + c.transpose());
}

Eigen::Matrix3d SegmentStats::covariance() const {
  if (point_count == 0) return Eigen::Matrix3d::Zero();
  return centered_scatter() / static_cast<double>(point_count);
}

void SegmentStats::add_point(const Eigen::Vector3d& p) {
  ++point_count;
  sum += p;
  scatter += p * p.transpose();
  z_min = std::min(z_min, p.z());
  z_max = std::max(z_max, p.z());
}

SegmentStats stats_from_points(std::span<const Eigen::Vector3d> points, double hull_area) {
  SegmentStats s;
  for (const auto& p : points) s.add_point(p);
  s.hull_area = hull_area;
  return s;
}

SegmentStats merge_stats(const SegmentStats& a, const SegmentStats& b) {
  SegmentStats r;
  r.point_count = a.point_count + b.point_count;
  r.sum = a.sum + b.sum;
  r.scatter = a.scatter + b.scatter;
  r.z_min = std::min(a.z_min, b.z_min);
  r.z_max = std::max(a.z_max, b.z_max);
  r.hull_area = a.hull_area + b.hull_area;
  return r;
}

Eigen::Vector3d orient_normal(Eigen::Vector3d n) {
  constexpr double kTie = 1e-12;
  if (n.z() < -kTie) return -n;
  if (n.z() > kTie) return n;
  if (n.x() < -kTie) return -n;
  if (n.x() > kTie) return n;
  if (n.y() < 0.0) return -n;
  return n;
}

Principal principal_axes(const Eigen::Matrix3d& symmetric) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(symmetric);
  // Eigen returns ascending order.
  const Eigen::Vector3d asc = solver.eigenvalues();
  Principal p;
  for (int i = 0; i < 3; ++i) p.eigenvalues[i] = std::max(0.0, asc[2 - i]);
  p.normal = orient_normal(solver.eigenvectors().col(0).normalized());
  return p;
}

PlaneFit plane_fit(const SegmentStats& stats) {
  if (stats.point_count < 3) throw std::invalid_argument("insufficient points for plane");
  const Principal p = principal_axes(stats.centered_scatter());
  return {p.normal, p.eigenvalues[2]};
}

}  // namespace scenegram
