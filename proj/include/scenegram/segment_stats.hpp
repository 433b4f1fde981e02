#pragma once

#include <cstdint>
#include <limits>
#include <span>

#include <Eigen/Dense>

namespace scenegram {

/// Additive second-moment summary of a point set. Everything downstream
/// (plane costs, features) is computed from these; raw points are never kept.
struct SegmentStats {
  std::int64_t point_count = 0;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  /// Second moments about the origin: sum of p p^T.
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  double z_min = std::numeric_limits<double>::infinity();
  double z_max = -std::numeric_limits<double>::infinity();
  /// Convex-hull area of the dominant plane projection (m^2).
  double hull_area = 0.0;

  Eigen::Vector3d centroid() const;

  /// Scatter about the centroid: scatter - sum sum^T / n.
  Eigen::Matrix3d centered_scatter() const;

  /// Centered scatter divided by point_count.
  Eigen::Matrix3d covariance() const;

  void add_point(const Eigen::Vector3d& p);

  bool operator==(const SegmentStats&) const = default;
};

SegmentStats stats_from_points(std::span<const Eigen::Vector3d> points, double hull_area);

/// Componentwise sum; z extents take min/max; hull areas add.
SegmentStats merge_stats(const SegmentStats& a, const SegmentStats& b);

struct PlaneFit {
  Eigen::Vector3d normal;
  /// Sum of squared point-to-plane distances (smallest centered eigenvalue).
  double residual = 0.0;
};

/// Best-fit plane through the centroid. Throws std::invalid_argument when
/// fewer than three points are summarized.
PlaneFit plane_fit(const SegmentStats& stats);

/// Eigen decomposition of a symmetric 3x3 matrix.
struct Principal {
  /// Descending; negatives from round-off are clamped to 0.
  Eigen::Vector3d eigenvalues;
  /// Unit eigenvector of the smallest eigenvalue, canonically oriented.
  Eigen::Vector3d normal;
};

Principal principal_axes(const Eigen::Matrix3d& symmetric);

/// Flip so that z > 0; ties broken on x, then y.
Eigen::Vector3d orient_normal(Eigen::Vector3d n);

}  // namespace scenegram
