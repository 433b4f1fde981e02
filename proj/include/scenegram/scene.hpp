#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "scenegram/segment_stats.hpp"
#include "scenegram/terminal_set.hpp"

namespace scenegram {

/// Two segments closer than this are adjacent.
inline constexpr double kContactDistance = 0.05;
/// Threshold used instead when the region between two segments is occluded.
inline constexpr double kOccludedContactDistance = 0.5;

struct Segment {
  int id = 0;
  SegmentStats stats;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  /// Descending eigenvalues of the centered scatter.
  Eigen::Vector3d eigenvalues = Eigen::Vector3d::Zero();

  static Segment from_stats(int id, const SegmentStats& stats);
};

using SegmentPair = std::pair<int, int>;

/// Minimum distance between two segments, by segment id.
struct PairDistance {
  int a = 0;
  int b = 0;
  double meters = 0.0;
};

/// A segmented scene: terminals plus their adjacency graph. Segments are
/// addressed internally by dense index (position in segments()).
class Scene {
 public:
  Scene() = default;

  /// Edges and occlusion flags are unordered id pairs. Distances not listed in
  /// `min_distances` are approximated from centroids and bounding radii.
  Scene(std::vector<Segment> segments, std::vector<SegmentPair> edges,
        std::vector<SegmentPair> occluded, std::vector<PairDistance> min_distances = {});

  int size() const { return static_cast<int>(segments_.size()); }
  const std::vector<Segment>& segments() const { return segments_; }
  const Segment& segment(int index) const { return segments_.at(index); }

  int index_of(int id) const;
  std::optional<int> find_index(int id) const;

  /// Edges as sorted (index, index) pairs with first < second.
  const std::vector<SegmentPair>& edges() const { return edges_; }
  const std::vector<SegmentPair>& occluded() const { return occluded_; }

  bool adjacent(int i, int j) const { return neighbors_.at(i).contains(j); }
  const TerminalSet& neighbors(int index) const { return neighbors_.at(index); }

  /// Union of neighbor sets of every terminal in `span`.
  TerminalSet neighborhood(const TerminalSet& span) const;

  double min_distance(int i, int j) const { return distance_[i * size() + j]; }
  /// Minimum over terminal pairs drawn from the two spans.
  double min_distance(const TerminalSet& a, const TerminalSet& b) const;

  /// True when the distance for (i, j) came from the file, not the approximation.
  bool has_measured_distance(int i, int j) const { return measured_[i * size() + j]; }

  TerminalSet all_terminals() const { return TerminalSet::first_n(size()); }

 private:
  std::vector<Segment> segments_;
  std::vector<SegmentPair> edges_;
  std::vector<SegmentPair> occluded_;
  std::vector<TerminalSet> neighbors_;
  std::vector<double> distance_;
  std::vector<char> measured_;
  std::unordered_map<int, int> index_;
};

/// Centroid distance minus bounding radii, clamped at zero. The radius of a
/// segment is sqrt(3 * trace(covariance)), half the diagonal of a uniformly
/// sampled rectangle.
double approximate_min_distance(const Segment& a, const Segment& b);

/// Edge iff distance < kContactDistance, or < kOccludedContactDistance when
/// the pair is flagged occluded.
bool should_connect(double min_distance, bool occluded);

/// Builds the adjacency graph from pairwise minimum distances. Pairs missing
/// from `min_distances` use approximate_min_distance.
Scene build_adjacency(std::vector<Segment> segments, const std::vector<PairDistance>& min_distances,
                      const std::vector<SegmentPair>& occluded);

/// Ground-truth parse tree as authored in tree files. Leaves are segment ids.
struct GroundTruthTree {
  std::string label;
  std::optional<int> leaf;
  std::vector<GroundTruthTree> children;

  bool is_leaf() const { return leaf.has_value(); }

  static GroundTruthTree make_leaf(int segment_id) {
    GroundTruthTree t;
    t.label = "segment";
    t.leaf = segment_id;
    return t;
  }
  static GroundTruthTree make_node(std::string label, std::vector<GroundTruthTree> children) {
    GroundTruthTree t;
    t.label = std::move(label);
    t.children = std::move(children);
    return t;
  }

  std::vector<int> leaf_ids() const;
  int node_count() const;
};

/// Checks leaf-id uniqueness and that internal nodes have children.
void validate_tree(const GroundTruthTree& tree);

Scene scene_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const Scene& scene);
GroundTruthTree tree_from_json(const nlohmann::json& j);
nlohmann::json tree_to_json(const GroundTruthTree& tree);

Scene load_scene(const std::filesystem::path& path);
GroundTruthTree load_tree(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json load_json(const std::filesystem::path& path);

}  // namespace scenegram
