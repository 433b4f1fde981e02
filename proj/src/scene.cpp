#include "scenegram/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "scenegram/errors.hpp"

namespace scenegram {

using nlohmann::json;

Segment Segment::from_stats(int id, const SegmentStats& stats) {
  Segment s;
  s.id = id;
  s.stats = stats;
  s.centroid = stats.centroid();
  const Principal p = principal_axes(stats.centered_scatter());
  s.normal = p.normal;
  s.eigenvalues = p.eigenvalues;
  return s;
}

namespace {

SegmentPair ordered(int a, int b) { return a < b ? SegmentPair{a, b} : SegmentPair{b, a}; }

}  // namespace

Scene::Scene(std::vector<Segment> segments, std::vector<SegmentPair> edges,
             std::vector<SegmentPair> occluded, std::vector<PairDistance> min_distances)
    : segments_(std::move(segments)) {
  const int n = size();
  if (n > TerminalSet::kCapacity) {
    throw ValidationError("scene has " + std::to_string(n) + " segments; at most " +
                          std::to_string(TerminalSet::kCapacity) + " supported");
  }
  for (int i = 0; i < n; ++i) {
    if (!index_.emplace(segments_[i].id, i).second) {
      throw ValidationError("segments: duplicate id " + std::to_string(segments_[i].id));
    }
  }

  auto to_index_pair = [&](const SegmentPair& p, const char* field) {
    auto a = find_index(p.first);
    auto b = find_index(p.second);
    if (!a || !b) {
      throw ValidationError(std::string(field) + ": unknown segment id in pair [" +
                            std::to_string(p.first) + "," + std::to_string(p.second) + "]");
    }
    if (*a == *b) {
      throw ValidationError(std::string(field) + ": self pair on segment " + std::to_string(p.first));
    }
    return ordered(*a, *b);
  };

  std::set<SegmentPair> edge_set;
  for (const auto& e : edges) edge_set.insert(to_index_pair(e, "edges"));
  edges_.assign(edge_set.begin(), edge_set.end());

  std::set<SegmentPair> occ_set;
  for (const auto& e : occluded) occ_set.insert(to_index_pair(e, "occluded"));
  occluded_.assign(occ_set.begin(), occ_set.end());

  neighbors_.assign(n, TerminalSet{});
  for (const auto& [a, b] : edges_) {
    neighbors_[a].insert(b);
    neighbors_[b].insert(a);
  }

  distance_.assign(static_cast<std::size_t>(n) * n, 0.0);
  measured_.assign(static_cast<std::size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = approximate_min_distance(segments_[i], segments_[j]);
      distance_[i * n + j] = distance_[j * n + i] = d;
    }
  }
  for (const auto& pd : min_distances) {
    auto [a, b] = to_index_pair({pd.a, pd.b}, "min_dist");
    if (!(pd.meters >= 0.0) || !std::isfinite(pd.meters)) {
      throw ValidationError("min_dist: distance must be finite and nonnegative");
    }
    distance_[a * n + b] = distance_[b * n + a] = pd.meters;
    measured_[a * n + b] = measured_[b * n + a] = 1;
  }
}

int Scene::index_of(int id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw std::out_of_range("unknown segment id " + std::to_string(id));
  return it->second;
}

std::optional<int> Scene::find_index(int id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TerminalSet Scene::neighborhood(const TerminalSet& span) const {
  TerminalSet out;
  span.for_each([&](int i) { out |= neighbors_[i]; });
  return out;
}

double Scene::min_distance(const TerminalSet& a, const TerminalSet& b) const {
  double best = std::numeric_limits<double>::infinity();
  a.for_each([&](int i) {
    b.for_each([&](int j) {
      if (i != j) best = std::min(best, min_distance(i, j));
      else best = 0.0;
    });
  });
  return std::isfinite(best) ? best : 0.0;
}

double approximate_min_distance(const Segment& a, const Segment& b) {
  auto radius = [](const Segment& s) { return std::sqrt(3.0 * std::max(0.0, s.stats.covariance().trace())); };
  return std::max(0.0, (a.centroid - b.centroid).norm() - radius(a) - radius(b));
}

bool should_connect(double min_distance, bool occluded) {
  return min_distance < (occluded ? kOccludedContactDistance : kContactDistance);
}

Scene build_adjacency(std::vector<Segment> segments, const std::vector<PairDistance>& min_distances,
                      const std::vector<SegmentPair>& occluded) {
  // Build once without edges to resolve ids and fill in approximations.
  Scene probe(segments, {}, occluded, min_distances);
  std::set<SegmentPair> occ;
  for (const auto& p : probe.occluded()) occ.insert(p);

  std::vector<SegmentPair> edges;
  const int n = probe.size();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (should_connect(probe.min_distance(i, j), occ.count({i, j}) > 0)) {
        edges.emplace_back(probe.segment(i).id, probe.segment(j).id);
      }
    }
  }
  return Scene(std::move(segments), std::move(edges), occluded, min_distances);
}

std::vector<int> GroundTruthTree::leaf_ids() const {
  std::vector<int> out;
  auto walk = [&](const GroundTruthTree& t, auto&& self) -> void {
    if (t.is_leaf()) {
      out.push_back(*t.leaf);
      return;
    }
    for (const auto& c : t.children) self(c, self);
  };
  walk(*this, walk);
  return out;
}

int GroundTruthTree::node_count() const {
  int n = 1;
  for (const auto& c : children) n += c.node_count();
  return n;
}

void validate_tree(const GroundTruthTree& tree) {
  std::set<int> seen;
  auto walk = [&](const GroundTruthTree& t, auto&& self) -> void {
    if (t.is_leaf()) {
      if (!seen.insert(*t.leaf).second) {
        throw ValidationError("tree: duplicate leaf id " + std::to_string(*t.leaf));
      }
      return;
    }
    if (t.label.empty()) throw ValidationError("tree: node with empty label");
    if (t.children.empty()) throw ValidationError("tree: internal node '" + t.label + "' has no children");
    for (const auto& c : t.children) self(c, self);
  };
  walk(tree, walk);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError(where + ": missing field '" + key + "'");
  }
  return j.at(key);
}

double as_double(const json& j, const std::string& where) {
  if (!j.is_number()) throw ValidationError(where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(where + ": non-finite value");
  return v;
}

int as_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ValidationError(where + ": expected an integer");
  return j.get<int>();
}

Eigen::Vector3d as_vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(where + ": expected 3 numbers");
  return {as_double(j[0], where), as_double(j[1], where), as_double(j[2], where)};
}

std::vector<SegmentPair> as_pairs(const json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + ": expected an array of pairs");
  std::vector<SegmentPair> out;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) throw ValidationError(where + ": expected [i,j] pairs");
    out.emplace_back(as_int(p[0], where), as_int(p[1], where));
  }
  return out;
}

}  // namespace

Scene scene_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("scene: expected a JSON object");
  const json& segs = require(j, "segments", "scene");
  if (!segs.is_array()) throw ValidationError("segments: expected an array");

  std::vector<Segment> segments;
  for (std::size_t k = 0; k < segs.size(); ++k) {
    const json& s = segs[k];
    const std::string where = "segments[" + std::to_string(k) + "]";
    SegmentStats st;
    const int id = as_int(require(s, "id", where), where + ".id");
    const int count = as_int(require(s, "count", where), where + ".count");
    if (count < 1) throw ValidationError(where + ".count: must be >= 1");
    st.point_count = count;
    st.sum = as_vec3(require(s, "sum", where), where + ".sum");
    const json& sc = require(s, "scatter", where);
    if (!sc.is_array() || sc.size() != 3) throw ValidationError(where + ".scatter: expected 3x3");
    for (int r = 0; r < 3; ++r) st.scatter.row(r) = as_vec3(sc[r], where + ".scatter").transpose();
    if ((st.scatter - st.scatter.transpose()).cwiseAbs().maxCoeff() >
        1e-9 * std::max(1.0, st.scatter.cwiseAbs().maxCoeff())) {
      throw ValidationError(where + ".scatter: not symmetric");
    }
    st.z_min = as_double(require(s, "z_min", where), where + ".z_min");
    st.z_max = as_double(require(s, "z_max", where), where + ".z_max");
    if (st.z_min > st.z_max) throw ValidationError(where + ".z_min: exceeds z_max");
    st.hull_area = as_double(require(s, "hull_area", where), where + ".hull_area");
    if (st.hull_area < 0) throw ValidationError(where + ".hull_area: negative");
    segments.push_back(Segment::from_stats(id, st));
  }

  std::vector<SegmentPair> edges;
  if (j.contains("edges")) edges = as_pairs(j.at("edges"), "edges");
  std::vector<SegmentPair> occluded;
  if (j.contains("occluded")) occluded = as_pairs(j.at("occluded"), "occluded");
  std::vector<PairDistance> dists;
  if (j.contains("min_dist")) {
    const json& md = j.at("min_dist");
    if (!md.is_array()) throw ValidationError("min_dist: expected an array");
    for (const auto& t : md) {
      if (!t.is_array() || t.size() != 3) throw ValidationError("min_dist: expected [i,j,meters] triples");
      dists.push_back({as_int(t[0], "min_dist"), as_int(t[1], "min_dist"), as_double(t[2], "min_dist")});
    }
  }
  return Scene(std::move(segments), std::move(edges), std::move(occluded), std::move(dists));
}

json scene_to_json(const Scene& scene) {
  json segs = json::array();
  for (const auto& s : scene.segments()) {
    json sc = json::array();
    for (int r = 0; r < 3; ++r) sc.push_back({s.stats.scatter(r, 0), s.stats.scatter(r, 1), s.stats.scatter(r, 2)});
    segs.push_back({{"id", s.id},
                    {"count", s.stats.point_count},
                    {"sum", {s.stats.sum.x(), s.stats.sum.y(), s.stats.sum.z()}},
                    {"scatter", sc},
                    {"z_min", s.stats.z_min},
                    {"z_max", s.stats.z_max},
                    {"hull_area", s.stats.hull_area}});
  }
  auto id_pairs = [&](const std::vector<SegmentPair>& v) {
    json out = json::array();
    for (const auto& [a, b] : v) out.push_back({scene.segment(a).id, scene.segment(b).id});
    return out;
  };
  json md = json::array();
  for (int i = 0; i < scene.size(); ++i) {
    for (int k = i + 1; k < scene.size(); ++k) {
      if (scene.has_measured_distance(i, k)) {
        md.push_back({scene.segment(i).id, scene.segment(k).id, scene.min_distance(i, k)});
      }
    }
  }
  json out = {{"segments", segs}, {"edges", id_pairs(scene.edges())}, {"occluded", id_pairs(scene.occluded())}};
  if (!md.empty()) out["min_dist"] = md;
  return out;
}

GroundTruthTree tree_from_json(const json& j) {
  auto parse = [](const json& node, auto&& self) -> GroundTruthTree {
    if (!node.is_object()) throw ValidationError("tree: expected an object");
    if (node.contains("leaf")) return GroundTruthTree::make_leaf(as_int(node.at("leaf"), "tree.leaf"));
    const json& label = require(node, "label", "tree");
    if (!label.is_string()) throw ValidationError("tree.label: expected a string");
    const json& kids = require(node, "children", "tree node '" + label.get<std::string>() + "'");
    if (!kids.is_array()) throw ValidationError("tree.children: expected an array");
    std::vector<GroundTruthTree> children;
    for (const auto& c : kids) children.push_back(self(c, self));
    return GroundTruthTree::make_node(label.get<std::string>(), std::move(children));
  };
  GroundTruthTree t = parse(j, parse);
  validate_tree(t);
  return t;
}

json tree_to_json(const GroundTruthTree& tree) {
  if (tree.is_leaf()) return {{"leaf", *tree.leaf}};
  json kids = json::array();
  for (const auto& c : tree.children) kids.push_back(tree_to_json(c));
  return {{"label", tree.label}, {"children", kids}};
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void save_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

Scene load_scene(const std::filesystem::path& path) { return scene_from_json(load_json(path)); }

GroundTruthTree load_tree(const std::filesystem::path& path) { return tree_from_json(load_json(path)); }

}  // namespace scenegram
