#include "scenegram/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>

#include "scenegram/errors.hpp"

namespace scenegram {

using nlohmann::json;

namespace {

struct PartSpec {
  std::string label;
  Rect3 rect;
};

struct Layout {
  std::vector<PartSpec> parts;
  bool has(const std::string& label) const {
    for (const auto& p : parts)
      if (p.label == label) return true;
    return false;
  }
};

Rect3 rect(Eigen::Vector3d o, Eigen::Vector3d u, Eigen::Vector3d v) { return {o, u, v}; }

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
  bool chance(double p) { return uniform(0.0, 1.0) < p; }
  double normal(double sigma) { return sigma > 0 ? std::normal_distribution<double>(0.0, sigma)(gen_) : 0.0; }

 private:
  std::mt19937_64 gen_;
};

using V = Eigen::Vector3d;

Layout office_layout(const SceneTemplate& t, Rng& rng) {
  Layout l;
  const double W = rng.uniform(2.5, 3.5);
  const double D = rng.uniform(2.5, 3.5);
  const double wall = 2.4;
  l.parts.push_back({"Floor", rect(V(0, 0, 0), V(W, 0, 0), V(0, D, 0))});
  l.parts.push_back({"Wall", rect(V(0, D, 0), V(W, 0, 0), V(0, 0, wall))});
  if (rng.chance(t.left_wall_probability)) l.parts.push_back({"Wall", rect(V(0, 0, 0), V(0, D, 0), V(0, 0, wall))});

  const double h = rng.uniform(0.6, 0.8);
  const double L = rng.uniform(1.2, 1.6);
  const double d = rng.uniform(0.6, 0.8);
  const double x0 = rng.uniform(0.4, W - L - 0.4);
  const double yb = D - 0.03;
  const double yf = yb - d;
  l.parts.push_back({"tableTop", rect(V(x0, yf, h), V(L, 0, 0), V(0, d, 0))});
  l.parts.push_back({"tableLeg", rect(V(x0 + L - 0.02, yf, 0), V(0, d, 0), V(0, 0, h))});

  const double cw = rng.uniform(0.18, 0.22);
  const double cd = rng.uniform(0.40, 0.45);
  const double ch = rng.uniform(0.35, 0.45);
  const double cx = x0 + 0.05;
  const double cy = yf + 0.05;
  l.parts.push_back({"CPUFront", rect(V(cx, cy, h), V(cw, 0, 0), V(0, 0, ch))});
  l.parts.push_back({"CPUTop", rect(V(cx, cy, h + ch), V(cw, 0, 0), V(0, cd, 0))});

  const double free_x = cx + cw + 0.12;
  const double mw = rng.uniform(0.45, 0.6);
  const double mh = rng.uniform(0.3, 0.4);
  const double mx = rng.uniform(free_x, x0 + L - 0.1 - mw);
  l.parts.push_back({"monitor", rect(V(mx, yb - 0.15, h + 0.01), V(mw, 0, 0), V(0, 0, mh))});

  const double kw = rng.uniform(0.42, 0.48);
  const double kd = rng.uniform(0.14, 0.18);
  const double kx = rng.uniform(free_x, x0 + L - 0.1 - kw);
  l.parts.push_back({"keyboard", rect(V(kx, yf + 0.08, h + 0.03), V(kw, 0, 0), V(0, kd, 0))});

  const double bw = rng.uniform(0.42, 0.48);
  const double gap = rng.uniform(0.15, 0.3);
  const double bx = x0 + L / 2 - bw / 2 + rng.uniform(-0.1, 0.1);
  const double by = yf - gap - bw;
  const double seat = 0.45;
  l.parts.push_back({"chairBase", rect(V(bx, by, seat), V(bw, 0, 0), V(0, bw, 0))});
  l.parts.push_back({"chairBackRest", rect(V(bx, by, seat), V(bw, 0, 0), V(0, 0, rng.uniform(0.4, 0.5)))});
  return l;
}

Layout tiny_layout(const SceneTemplate&, Rng& rng) {
  Layout l;
  const double W = rng.uniform(2.0, 3.0);
  const double D = rng.uniform(2.0, 3.0);
  l.parts.push_back({"Floor", rect(V(0, 0, 0), V(W, 0, 0), V(0, D, 0))});
  const bool wall = rng.chance(0.5);
  const double h = rng.uniform(0.6, 0.8);
  const double L = rng.uniform(1.2, 1.6);
  const double d = rng.uniform(0.6, 0.8);
  const double x0 = rng.uniform(0.3, W - L - 0.3);
  const double yb = D - 0.03;
  const double yf = yb - d;
  l.parts.push_back({"tableTop", rect(V(x0, yf, h), V(L, 0, 0), V(0, d, 0))});
  l.parts.push_back({"tableLeg", rect(V(x0 + L - 0.02, yf, 0), V(0, d, 0), V(0, 0, h))});
  if (wall) l.parts.push_back({"Wall", rect(V(0, D, 0), V(W, 0, 0), V(0, 0, 2.4))});
  if (rng.chance(0.5)) {
    const double mw = rng.uniform(0.45, 0.6);
    l.parts.push_back({"monitor", rect(V(x0 + 0.1, yb - 0.15, h + 0.01), V(mw, 0, 0), V(0, 0, rng.uniform(0.3, 0.4)))});
  }
  if (rng.chance(0.5)) {
    const double kw = rng.uniform(0.42, 0.48);
    l.parts.push_back({"keyboard", rect(V(x0 + 0.1, yf + 0.08, h + 0.03), V(kw, 0, 0), V(0, rng.uniform(0.14, 0.18), 0))});
  }
  return l;
}

// Splits into 1-3 pieces. With three, the second half is cut across the
// first cut so every piece touches every other.
std::vector<Rect3> split(const Rect3& r, int pieces, Rng& rng) {
  if (pieces <= 1) return {r};
  const bool along_u = r.u.norm() >= r.v.norm();
  const double f = rng.uniform(0.35, 0.65);
  Rect3 a = r, b = r;
  if (along_u) {
    a.u = r.u * f;
    b.origin = r.origin + r.u * f;
    b.u = r.u * (1 - f);
  } else {
    a.v = r.v * f;
    b.origin = r.origin + r.v * f;
    b.v = r.v * (1 - f);
  }
  if (pieces == 2) return {a, b};
  const double g = rng.uniform(0.35, 0.65);
  Rect3 b1 = b, b2 = b;
  if (along_u) {
    b1.v = b.v * g;
    b2.origin = b.origin + b.v * g;
    b2.v = b.v * (1 - g);
  } else {
    b1.u = b.u * g;
    b2.origin = b.origin + b.u * g;
    b2.u = b.u * (1 - g);
  }
  return {a, b1, b2};
}

GroundTruthTree plane_chain(const std::vector<int>& ids) {
  GroundTruthTree t = GroundTruthTree::make_node("Plane", {GroundTruthTree::make_leaf(ids.front())});
  for (std::size_t i = 1; i < ids.size(); ++i) {
    t = GroundTruthTree::make_node("Plane", {std::move(t), GroundTruthTree::make_leaf(ids[i])});
  }
  return t;
}

}  // namespace

SceneTemplate builtin_template(const std::string& name) {
  SceneTemplate t;
  if (name == "office") return t;
  if (name == "tiny") {
    t.name = "tiny";
    t.layout = "tiny";
    t.max_pieces = 2;
    t.max_terminals = 6;
    return t;
  }
  throw ValidationError("unknown template '" + name + "' (builtin: office, tiny)");
}

SceneTemplate template_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("template: expected a JSON object");
  SceneTemplate t = j.contains("layout") ? builtin_template(j.at("layout").get<std::string>()) : SceneTemplate{};
  auto num = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_number() && !j.at(key).is_boolean()) throw ValidationError(std::string("template: bad '") + key + "'");
    field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  if (j.contains("name")) t.name = j.at("name").get<std::string>();
  num("noise_sigma", t.noise_sigma);
  num("points_per_m2", t.points_per_m2);
  num("min_points", t.min_points);
  num("max_points", t.max_points);
  num("min_pieces", t.min_pieces);
  num("max_pieces", t.max_pieces);
  num("left_wall_probability", t.left_wall_probability);
  num("max_terminals", t.max_terminals);
  num("occlude_chair", t.occlude_chair);
  if (t.min_pieces < 1 || t.max_pieces > 3 || t.min_pieces > t.max_pieces) {
    throw ValidationError("template: pieces per part must satisfy 1 <= min_pieces <= max_pieces <= 3");
  }
  if (t.min_points < 3 || t.max_points < t.min_points) throw ValidationError("template: need 3 <= min_points <= max_points");
  if (t.noise_sigma < 0) throw ValidationError("template: noise_sigma must be nonnegative");
  return t;
}

json template_to_json(const SceneTemplate& t) {
  return {{"name", t.name},
          {"layout", t.layout},
          {"noise_sigma", t.noise_sigma},
          {"points_per_m2", t.points_per_m2},
          {"min_points", t.min_points},
          {"max_points", t.max_points},
          {"min_pieces", t.min_pieces},
          {"max_pieces", t.max_pieces},
          {"left_wall_probability", t.left_wall_probability},
          {"max_terminals", t.max_terminals},
          {"occlude_chair", t.occlude_chair}};
}

GeneratedScene gen_scene(const SceneTemplate& tmpl, std::uint64_t seed) {
  Rng rng(seed);
  Layout layout;
  if (tmpl.layout == "office") {
    layout = office_layout(tmpl, rng);
  } else if (tmpl.layout == "tiny") {
    layout = tiny_layout(tmpl, rng);
  } else {
    throw ValidationError("unknown layout '" + tmpl.layout + "'");
  }

  // Optional parts of the tiny layout come last; drop them when the terminal
  // cap cannot fit one piece each. Piece counts then shrink to fit.
  if (tmpl.layout == "tiny" && tmpl.max_terminals > 0 && static_cast<int>(layout.parts.size()) > tmpl.max_terminals) {
    layout.parts.resize(std::max(tmpl.max_terminals, 3));
  }
  GeneratedScene out;
  std::map<std::string, std::vector<std::vector<int>>> ids_by_label;
  const int nparts = static_cast<int>(layout.parts.size());
  for (int p = 0; p < nparts; ++p) {
    int k = rng.integer(tmpl.min_pieces, tmpl.max_pieces);
    if (tmpl.max_terminals > 0) {
      const int room = tmpl.max_terminals - static_cast<int>(out.pieces.size()) - (nparts - p - 1);
      k = std::max(1, std::min(k, room));
    }
    std::vector<int> ids;
    for (const Rect3& r : split(layout.parts[p].rect, k, rng)) {
      const int id = static_cast<int>(out.pieces.size());
      out.pieces.push_back({id, layout.parts[p].label, r});
      ids.push_back(id);
    }
    ids_by_label[layout.parts[p].label].push_back(std::move(ids));
  }

  // Sample points and summarize each piece.
  std::vector<Eigen::Vector3d> points;
  std::vector<int> labels;
  std::vector<double> areas;
  for (const auto& piece : out.pieces) {
    const double area = piece.rect.area();
    const int n = std::clamp(static_cast<int>(std::lround(area * tmpl.points_per_m2)), tmpl.min_points, tmpl.max_points);
    for (int i = 0; i < n; ++i) {
      const double s = rng.uniform(0.0, 1.0);
      const double t = rng.uniform(0.0, 1.0);
      Eigen::Vector3d p = piece.rect.origin + s * piece.rect.u + t * piece.rect.v;
      for (int c = 0; c < 3; ++c) p[c] += rng.normal(tmpl.noise_sigma);
      points.push_back(p);
      labels.push_back(piece.segment_id);
    }
    areas.push_back(area);
  }
  const int count = static_cast<int>(out.pieces.size());
  const auto stats = accumulate_stats(points, labels, count, areas);
  std::vector<Segment> segments;
  for (int i = 0; i < count; ++i) segments.push_back(Segment::from_stats(i, stats[i]));

  std::vector<Rect3> rects;
  for (const auto& piece : out.pieces) rects.push_back(piece.rect);
  const auto dist = rect_distance_matrix(rects);
  std::vector<PairDistance> pairs;
  for (int i = 0; i < count; ++i)
    for (int j = i + 1; j < count; ++j) pairs.push_back({i, j, dist[static_cast<std::size_t>(i) * count + j]});

  std::vector<SegmentPair> occluded;
  if (tmpl.occlude_chair) {
    for (const auto& a : out.pieces) {
      if (a.part != "chairBase") continue;
      for (const auto& b : out.pieces)
        if (b.part == "Floor") occluded.emplace_back(std::min(a.segment_id, b.segment_id), std::max(a.segment_id, b.segment_id));
    }
  }
  out.scene = build_adjacency(std::move(segments), pairs, occluded);

  // Ground truth.
  auto part = [&](const std::string& label, std::size_t which = 0) {
    return GroundTruthTree::make_node(label, {plane_chain(ids_by_label.at(label).at(which))});
  };
  GroundTruthTree tc = GroundTruthTree::make_node(
      "TableComplex", {GroundTruthTree::make_node("Table", {part("tableTop"), part("tableLeg")})});
  for (const char* obj : {"monitor", "keyboard"}) {
    if (layout.has(obj)) tc = GroundTruthTree::make_node("TableComplex", {std::move(tc), part(obj)});
  }
  if (layout.has("CPUTop")) {
    tc = GroundTruthTree::make_node("TableComplex",
                                    {std::move(tc), GroundTruthTree::make_node("CPU", {part("CPUTop"), part("CPUFront")})});
  }
  GroundTruthTree fc = GroundTruthTree::make_node("FloorComplex", {part("Floor")});
  if (layout.has("Wall")) {
    for (std::size_t w = 0; w < ids_by_label.at("Wall").size(); ++w) {
      fc = GroundTruthTree::make_node("FloorComplex", {std::move(fc), part("Wall", w)});
    }
  }
  fc = GroundTruthTree::make_node("FloorComplex", {std::move(fc), std::move(tc)});
  if (layout.has("chairBase")) {
    fc = GroundTruthTree::make_node(
        "FloorComplex", {std::move(fc), GroundTruthTree::make_node("Chair", {part("chairBase"), part("chairBackRest")})});
  }
  out.tree = GroundTruthTree::make_node("S", {std::move(fc)});
  return out;
}

std::uint64_t corpus_seed(std::uint64_t seed, int index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void gen_corpus(const SceneTemplate& tmpl, int n, std::uint64_t seed, const std::filesystem::path& dir) {
  if (n < 0) throw ValidationError("gen: n must be nonnegative");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create corpus directory '" + dir.string() + "': " + ec.message());

  std::vector<GeneratedScene> generated(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) generated[i] = gen_scene(tmpl, corpus_seed(seed, i));

  json entries = json::array();
  for (int i = 0; i < n; ++i) {
    char scene_name[32], tree_name[32];
    std::snprintf(scene_name, sizeof scene_name, "scene_%03d.json", i);
    std::snprintf(tree_name, sizeof tree_name, "tree_%03d.json", i);
    save_json(dir / scene_name, scene_to_json(generated[i].scene));
    save_json(dir / tree_name, tree_to_json(generated[i].tree));
    entries.push_back({{"index", i},
                       {"seed", corpus_seed(seed, i)},
                       {"fold", i % kCorpusFolds},
                       {"scene", scene_name},
                       {"tree", tree_name}});
  }
  save_json(dir / "manifest.json",
            {{"template", template_to_json(tmpl)}, {"seed", seed}, {"count", n}, {"folds", kCorpusFolds}, {"entries", entries}});
}

Corpus load_corpus(const std::filesystem::path& path) {
  Corpus c;
  const std::filesystem::path manifest =
      std::filesystem::is_directory(path) ? path / "manifest.json" : path;
  c.root = manifest.parent_path();
  const json j = load_json(manifest);
  if (!j.contains("entries") || !j.at("entries").is_array()) throw ValidationError("manifest: missing field 'entries'");
  for (const auto& e : j.at("entries")) {
    CorpusEntry entry;
    entry.index = e.at("index").get<int>();
    entry.seed = e.value("seed", std::uint64_t{0});
    entry.fold = e.value("fold", entry.index % kCorpusFolds);
    entry.scene_path = c.root / e.at("scene").get<std::string>();
    entry.tree_path = c.root / e.at("tree").get<std::string>();
    c.scenes.push_back(load_scene(entry.scene_path));
    c.trees.push_back(load_tree(entry.tree_path));
    c.entries.push_back(std::move(entry));
  }
  return c;
}

}  // namespace scenegram
