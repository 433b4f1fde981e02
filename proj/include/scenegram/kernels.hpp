#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "scenegram/inference.hpp"
#include "scenegram/segment_stats.hpp"

namespace scenegram {

/// Bulk kernels with an OpenMP path and a plain serial path. The serial path
/// is the reference the tests compare against.
enum class Execution { Serial, Parallel };

/// Per-label SegmentStats of a labeled point cloud; labels are in
/// [0, segments). hull_areas, when given, is copied into the result.
std::vector<SegmentStats> accumulate_stats(std::span<const Eigen::Vector3d> points, std::span<const int> labels,
                                           int segments, std::span<const double> hull_areas = {},
                                           Execution exec = Execution::Parallel);

/// Planar parallelogram {origin + s u + t v : s, t in [0, 1]}.
struct Rect3 {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d u = Eigen::Vector3d::UnitX();
  Eigen::Vector3d v = Eigen::Vector3d::UnitY();

  Eigen::Vector3d center() const { return origin + 0.5 * (u + v); }
  double area() const { return u.cross(v).norm(); }
};

/// Exact distance from a point to a rectangle (u and v orthogonal).
double point_rect_distance(const Eigen::Vector3d& p, const Rect3& r);

/// Minimum distance between two rectangles, from boundary samples spaced at
/// most `step` apart measured against the other rectangle. Crossing interiors
/// are reported as touching.
double rect_distance(const Rect3& a, const Rect3& b, double step = 0.01);

/// Row-major n x n matrix of rect_distance; zero diagonal.
std::vector<double> rect_distance_matrix(std::span<const Rect3> rects, Execution exec = Execution::Parallel,
                                         double step = 0.01);

/// parse_scene over many scenes; results in input order.
std::vector<ParseOutcome> parse_many(std::span<const Scene> scenes, const TrainedGrammar& tg,
                                     const ParseRequest& request = {}, Execution exec = Execution::Parallel);

}  // namespace scenegram
