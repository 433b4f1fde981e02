#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "scenegram/scene.hpp"
#include "scenegram/segment_stats.hpp"
#include "scenegram/terminal_set.hpp"

namespace scenegram {

inline constexpr std::string_view kFeatureSchemaId = "geom-v1";
inline constexpr int kNodeFeatureCount = 8;
inline constexpr int kPairFeatureCount = 6;

inline constexpr std::array<std::string_view, kNodeFeatureCount> kNodeFeatureNames = {
    "centroid_z", "normal_z", "hull_area", "linearness",
    "planarness", "scatter",  "vertical_extent", "horizontal_extent"};
inline constexpr std::array<std::string_view, kPairFeatureCount> kPairFeatureNames = {
    "horiz_centroid_dist", "vert_centroid_disp", "normal_dot", "min_dist", "coplanarity", "z_gap_signed"};

using FeatureVector = Eigen::VectorXd;

/// A non-intermediate constituent of a rule application: its symbol name,
/// summary statistics, and the terminals it spans.
struct Part {
  std::string_view name;
  SegmentStats stats;
  TerminalSet span;
};

/// Length of f over k leaf parts: 8k + 6 k(k-1)/2.
constexpr int feature_length(int parts) {
  return kNodeFeatureCount * parts + kPairFeatureCount * parts * (parts - 1) / 2;
}

FeatureVector node_features(const SegmentStats& stats);

/// Ordered: asymmetric entries (vert_centroid_disp, z_gap_signed) measure
/// `a` relative to `b`.
FeatureVector pair_features(const SegmentStats& a, const SegmentStats& b, double min_distance);

/// Canonical part order: by name, ties broken by centroid height, hull area
/// and point count so the result does not depend on listing order.
std::vector<Part> canonical_order(std::span<const Part> parts);

/// Node blocks for every part followed by pair blocks for every unordered
/// pair, both in canonical order. Pair min_dist comes from the scene.
FeatureVector rule_features(std::span<const Part> parts, const Scene& scene);

/// As rule_features, with pair distances supplied by `distance(a, b)`.
template <typename DistanceFn>
FeatureVector rule_features_with(std::span<const Part> parts, DistanceFn&& distance) {
  const std::vector<Part> sorted = canonical_order(parts);
  const int k = static_cast<int>(sorted.size());
  FeatureVector f(feature_length(k));
  int at = 0;
  for (const auto& p : sorted) {
    f.segment(at, kNodeFeatureCount) = node_features(p.stats);
    at += kNodeFeatureCount;
  }
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      f.segment(at, kPairFeatureCount) =
          pair_features(sorted[i].stats, sorted[j].stats, distance(sorted[i], sorted[j]));
      at += kPairFeatureCount;
    }
  }
  return f;
}

}  // namespace scenegram
