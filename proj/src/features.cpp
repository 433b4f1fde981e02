#include "scenegram/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace scenegram {

namespace {

const double kCoplanarCos = std::cos(15.0 * std::numbers::pi / 180.0);

}  // namespace

FeatureVector node_features(const SegmentStats& stats) {
  const Eigen::Matrix3d cov = stats.covariance();
  const Principal p = principal_axes(cov);
  const Eigen::Vector3d& l = p.eigenvalues;
  FeatureVector f(kNodeFeatureCount);
  f << stats.centroid().z(),
      std::abs(p.normal.z()),
      stats.hull_area,
      std::max(0.0, l[0] - l[1]),
      std::max(0.0, l[1] - l[2]),
      l[0],
      std::max(0.0, stats.z_max - stats.z_min),
      std::sqrt(std::max(0.0, 12.0 * (cov(0, 0) + cov(1, 1))));
  return f;
}

FeatureVector pair_features(const SegmentStats& a, const SegmentStats& b, double min_distance) {
  const Eigen::Vector3d ca = a.centroid();
  const Eigen::Vector3d cb = b.centroid();
  const Eigen::Vector3d na = principal_axes(a.covariance()).normal;
  const Eigen::Vector3d nb = principal_axes(b.covariance()).normal;
  const Eigen::Vector3d d = ca - cb;
  const double dot = std::min(1.0, std::abs(na.dot(nb)));
  const double coplanarity = dot > kCoplanarCos ? std::exp(-std::abs(d.dot(na))) : 0.0;
  FeatureVector f(kPairFeatureCount);
  f << d.head<2>().norm(), d.z(), dot, min_distance, coplanarity, a.z_min - b.z_max;
  return f;
}

std::vector<Part> canonical_order(std::span<const Part> parts) {
  std::vector<Part> sorted(parts.begin(), parts.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const Part& x, const Part& y) {
    if (x.name != y.name) return x.name < y.name;
    const double zx = x.stats.centroid().z(), zy = y.stats.centroid().z();
    if (zx != zy) return zx < zy;
    if (x.stats.hull_area != y.stats.hull_area) return x.stats.hull_area < y.stats.hull_area;
    return x.stats.point_count < y.stats.point_count;
  });
  return sorted;
}

FeatureVector rule_features(std::span<const Part> parts, const Scene& scene) {
  return rule_features_with(parts, [&](const Part& a, const Part& b) { return scene.min_distance(a.span, b.span); });
}

}  // namespace scenegram
