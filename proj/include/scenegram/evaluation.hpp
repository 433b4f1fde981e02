#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "scenegram/inference.hpp"
#include "scenegram/synthgen.hpp"
#include "scenegram/training.hpp"

namespace scenegram {

inline constexpr std::string_view kNoLabel = "none";

/// Segment id -> label.
using LabelMap = std::map<int, std::string>;

/// Symbols that never name a segment: segment, Plane, S and *Complex.
bool is_generic_symbol(std::string_view name);

/// Each terminal takes the symbol of its lowest ancestor that is neither an
/// intermediate nor generic; terminals outside the tree get "none".
LabelMap extract_labels(const ParseTree& tree, const Grammar& grammar, const Scene& scene);

/// As above for a ground-truth tree. `grammar`, when given, identifies
/// intermediates (needed only for rederived trees).
LabelMap extract_labels(const GroundTruthTree& tree, const Scene& scene, const Grammar* grammar = nullptr);

struct LabelScore {
  double precision = 0.0;
  double recall = 0.0;
  int true_positives = 0;
  int gold_count = 0;
  int predicted_count = 0;
};

struct LabelReport {
  /// Gold labels other than "none", sorted.
  std::vector<std::string> labels;
  std::map<std::string, LabelScore> scores;
  /// Unweighted means over `labels`.
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  /// confusion[gold][predicted] = count.
  std::map<std::string, std::map<std::string, int>> confusion;
};

/// Percentages in [0, 100]. A label never predicted has precision 0.
/// Throws ValidationError when the two maps cover different segment ids.
LabelReport precision_recall(const LabelMap& predicted, const LabelMap& gold);

/// Same, over aligned label lists pooled from several scenes.
LabelReport precision_recall(const std::vector<std::string>& predicted, const std::vector<std::string>& gold);

/// Header of labels plus "macro avg.", then a recall row and a precision
/// row with integer-rounded percentages.
std::string report_tsv(const LabelReport& report);
nlohmann::json report_json(const LabelReport& report);

/// Graphviz digraph: internal nodes show symbol and subtree cost, leaves the
/// segment id.
std::string export_dot(const ParseTree& tree, const Grammar& grammar, const Scene& scene);

struct EvalOptions {
  int folds = kCorpusFolds;
  TrainOptions train;
  ParseRequest parse;
  Execution exec = Execution::Parallel;
  /// Score the ground-truth trees themselves instead of parses.
  bool predictions_from_gold = false;
};

struct FoldResult {
  int fold = 0;
  int train_scenes = 0;
  int test_scenes = 0;
  double train_seconds = 0.0;
  double parse_seconds = 0.0;
  int budget_exhausted = 0;
  int without_goal = 0;
};

struct EvalResult {
  LabelReport report;
  std::vector<FoldResult> folds;
};

/// k-fold protocol: for each fold, train on the other folds with `grammar`
/// and label the held-out scenes. Labels are pooled over all folds.
EvalResult cross_validate(const Corpus& corpus, const Grammar& grammar, const EvalOptions& options = {});

}  // namespace scenegram
