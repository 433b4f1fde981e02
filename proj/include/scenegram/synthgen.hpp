#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "scenegram/kernels.hpp"
#include "scenegram/scene.hpp"

namespace scenegram {

/// Parameters of a procedural desk-scale room. Two layouts exist: "office"
/// (floor, walls, a table with monitor, keyboard and CPU, and a chair) and
/// "tiny" (floor and table, optionally a wall, monitor or keyboard), the
/// latter meant for scenes small enough for the exhaustive parser.
struct SceneTemplate {
  std::string name = "office";
  std::string layout = "office";
  /// Standard deviation of isotropic point jitter (m).
  double noise_sigma = 0.003;
  double points_per_m2 = 300.0;
  int min_points = 40;
  int max_points = 400;
  /// Each part plane is split into a uniform number of pieces in this range.
  int min_pieces = 1;
  int max_pieces = 3;
  double left_wall_probability = 0.5;
  /// Upper bound on terminals; parts fall back to one piece to respect it,
  /// and the tiny layout drops optional parts. The office layout always has
  /// at least ten parts. 0 disables the bound.
  int max_terminals = 0;
  /// Flag chair/floor pairs as occluded so the floating chair seat connects.
  bool occlude_chair = true;
};

SceneTemplate builtin_template(const std::string& name);
SceneTemplate template_from_json(const nlohmann::json& j);
nlohmann::json template_to_json(const SceneTemplate& t);

/// One labeled planar piece of a generated scene.
struct GeneratedPiece {
  int segment_id = 0;
  std::string part;
  Rect3 rect;
};

struct GeneratedScene {
  Scene scene;
  GroundTruthTree tree;
  std::vector<GeneratedPiece> pieces;
};

GeneratedScene gen_scene(const SceneTemplate& tmpl, std::uint64_t seed);

/// Seed of corpus entry `index`; a splitmix64 step from the corpus seed.
std::uint64_t corpus_seed(std::uint64_t seed, int index);

inline constexpr int kCorpusFolds = 4;

struct CorpusEntry {
  int index = 0;
  std::uint64_t seed = 0;
  int fold = 0;
  std::filesystem::path scene_path;
  std::filesystem::path tree_path;
};

struct Corpus {
  std::filesystem::path root;
  std::vector<CorpusEntry> entries;
  std::vector<Scene> scenes;
  std::vector<GroundTruthTree> trees;
};

/// Writes n scene/tree file pairs plus manifest.json into `dir`; fold of
/// entry i is i mod 4. Throws std::runtime_error when `dir` is not writable.
void gen_corpus(const SceneTemplate& tmpl, int n, std::uint64_t seed, const std::filesystem::path& dir);

/// Reads a corpus directory (or its manifest.json path) with all files.
Corpus load_corpus(const std::filesystem::path& path);

}  // namespace scenegram
