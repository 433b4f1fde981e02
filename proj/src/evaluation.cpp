#include "scenegram/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "scenegram/errors.hpp"

namespace scenegram {

using nlohmann::json;

bool is_generic_symbol(std::string_view name) {
  constexpr std::string_view complex = "Complex";
  return name == kTerminalSymbol || name == kPlaneSymbol || name == kStartSymbol ||
         (name.size() >= complex.size() && name.substr(name.size() - complex.size()) == complex);
}

namespace {

LabelMap unlabeled(const Scene& scene) {
  LabelMap out;
  for (const auto& s : scene.segments()) out[s.id] = std::string(kNoLabel);
  return out;
}

}  // namespace

LabelMap extract_labels(const ParseTree& tree, const Grammar& grammar, const Scene& scene) {
  LabelMap out = unlabeled(scene);
  if (tree.empty()) return out;
  auto visit = [&](int id, const std::string* label, auto&& self) -> void {
    const ParseNode& n = tree.nodes[id];
    if (n.terminal >= 0) {
      if (label) out[scene.segment(n.terminal).id] = *label;
      return;
    }
    const std::string& name = grammar.name(n.symbol);
    if (!grammar.is_intermediate(n.symbol) && !is_generic_symbol(name)) label = &name;
    for (int c : n.children) self(c, label, self);
  };
  visit(tree.root, nullptr, visit);
  return out;
}

LabelMap extract_labels(const GroundTruthTree& tree, const Scene& scene, const Grammar* grammar) {
  LabelMap out = unlabeled(scene);
  auto visit = [&](const GroundTruthTree& t, const std::string* label, auto&& self) -> void {
    if (t.is_leaf()) {
      if (!out.contains(*t.leaf)) throw ValidationError("tree: leaf id " + std::to_string(*t.leaf) + " not in scene");
      if (label) out[*t.leaf] = *label;
      return;
    }
    bool intermediate = false;
    if (grammar) {
      const auto s = grammar->find(t.label);
      intermediate = s && grammar->is_intermediate(*s);
    }
    if (!intermediate && !is_generic_symbol(t.label)) label = &t.label;
    for (const auto& c : t.children) self(c, label, self);
  };
  visit(tree, nullptr, visit);
  return out;
}

LabelReport precision_recall(const std::vector<std::string>& predicted, const std::vector<std::string>& gold) {
  if (predicted.size() != gold.size()) throw ValidationError("precision_recall: label lists differ in length");
  LabelReport r;
  std::set<std::string> gold_labels;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++r.confusion[gold[i]][predicted[i]];
    if (gold[i] != kNoLabel) gold_labels.insert(gold[i]);
    if (predicted[i] != kNoLabel) ++r.scores[predicted[i]].predicted_count;
    if (gold[i] != kNoLabel) ++r.scores[gold[i]].gold_count;
    if (gold[i] == predicted[i] && gold[i] != kNoLabel) ++r.scores[gold[i]].true_positives;
  }
  for (auto& [label, s] : r.scores) {
    s.recall = s.gold_count ? 100.0 * s.true_positives / s.gold_count : 0.0;
    s.precision = s.predicted_count ? 100.0 * s.true_positives / s.predicted_count : 0.0;
  }
  r.labels.assign(gold_labels.begin(), gold_labels.end());
  for (const auto& l : r.labels) {
    r.macro_precision += r.scores[l].precision;
    r.macro_recall += r.scores[l].recall;
  }
  if (!r.labels.empty()) {
    r.macro_precision /= static_cast<double>(r.labels.size());
    r.macro_recall /= static_cast<double>(r.labels.size());
  }
  return r;
}

LabelReport precision_recall(const LabelMap& predicted, const LabelMap& gold) {
  std::vector<std::string> p, g;
  if (predicted.size() != gold.size()) throw ValidationError("precision_recall: segment id sets differ");
  for (const auto& [id, label] : gold) {
    auto it = predicted.find(id);
    if (it == predicted.end()) throw ValidationError("precision_recall: segment " + std::to_string(id) + " has no prediction");
    p.push_back(it->second);
    g.push_back(label);
  }
  return precision_recall(p, g);
}

std::string report_tsv(const LabelReport& report) {
  std::ostringstream os;
  for (const auto& l : report.labels) os << '\t' << l;
  os << "\tmacro avg.\n";
  auto row = [&](const char* name, auto metric, double macro) {
    os << name;
    for (const auto& l : report.labels) os << '\t' << std::lround(metric(report.scores.at(l)));
    os << '\t' << std::lround(macro) << '\n';
  };
  row("recall", [](const LabelScore& s) { return s.recall; }, report.macro_recall);
  row("precision", [](const LabelScore& s) { return s.precision; }, report.macro_precision);
  return os.str();
}

json report_json(const LabelReport& report) {
  json labels = json::object();
  for (const auto& [name, s] : report.scores) {
    labels[name] = {{"precision", s.precision},
                    {"recall", s.recall},
                    {"true_positives", s.true_positives},
                    {"gold_count", s.gold_count},
                    {"predicted_count", s.predicted_count}};
  }
  return {{"labels", report.labels},
          {"scores", labels},
          {"macro_precision", report.macro_precision},
          {"macro_recall", report.macro_recall},
          {"confusion", report.confusion}};
}

std::string export_dot(const ParseTree& tree, const Grammar& grammar, const Scene& scene) {
  std::ostringstream os;
  os << "digraph parse {\n";
  for (int i = 0; i < tree.size(); ++i) {
    const ParseNode& n = tree.nodes[i];
    os << "  n" << i << " [label=\"";
    if (n.terminal >= 0) {
      os << scene.segment(n.terminal).id << "\" shape=box];\n";
    } else {
      char cost[32];
      std::snprintf(cost, sizeof cost, "%.4g", n.cost);
      os << grammar.name(n.symbol) << "\\n" << cost << "\"];\n";
    }
  }
  for (int i = 0; i < tree.size(); ++i) {
    for (int c : tree.nodes[i].children) os << "  n" << i << " -> n" << c << ";\n";
  }
  os << "}\n";
  return os.str();
}

EvalResult cross_validate(const Corpus& corpus, const Grammar& grammar, const EvalOptions& options) {
  if (options.folds < 2) throw ValidationError("eval: need at least two folds");
  EvalResult result;
  std::vector<std::string> predicted, gold;
  for (int fold = 0; fold < options.folds; ++fold) {
    std::vector<GroundTruthTree> train_trees;
    std::vector<Scene> train_scenes, test_scenes;
    std::vector<const GroundTruthTree*> test_trees;
    for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
      if (corpus.entries[i].fold % options.folds == fold) {
        test_scenes.push_back(corpus.scenes[i]);
        test_trees.push_back(&corpus.trees[i]);
      } else {
        train_trees.push_back(corpus.trees[i]);
        train_scenes.push_back(corpus.scenes[i]);
      }
    }
    FoldResult fr;
    fr.fold = fold;
    fr.train_scenes = static_cast<int>(train_scenes.size());
    fr.test_scenes = static_cast<int>(test_scenes.size());
    if (test_scenes.empty()) {
      result.folds.push_back(fr);
      continue;
    }

    const auto t0 = std::chrono::steady_clock::now();
    const TrainedGrammar tg = train(train_trees, train_scenes, grammar, options.train);
    const auto t1 = std::chrono::steady_clock::now();
    fr.train_seconds = std::chrono::duration<double>(t1 - t0).count();

    std::vector<LabelMap> labels(test_scenes.size());
    if (options.predictions_from_gold) {
      for (std::size_t i = 0; i < test_scenes.size(); ++i) {
        const ParseTree t = parse_tree_from_ground_truth(rederive(*test_trees[i], tg.grammar()), test_scenes[i], tg);
        labels[i] = extract_labels(t, tg.grammar(), test_scenes[i]);
      }
    } else {
      const auto outcomes = parse_many(test_scenes, tg, options.parse, options.exec);
      for (std::size_t i = 0; i < test_scenes.size(); ++i) {
        fr.budget_exhausted += outcomes[i].budget_exhausted ? 1 : 0;
        fr.without_goal += outcomes[i].has_goal ? 0 : 1;
        labels[i] = extract_labels(outcomes[i].result.tree, tg.grammar(), test_scenes[i]);
      }
    }
    fr.parse_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();

    for (std::size_t i = 0; i < test_scenes.size(); ++i) {
      const LabelMap g = extract_labels(*test_trees[i], test_scenes[i]);
      for (const auto& [id, label] : g) {
        gold.push_back(label);
        predicted.push_back(labels[i].at(id));
      }
    }
    result.folds.push_back(fr);
  }
  result.report = precision_recall(predicted, gold);
  return result;
}

}  // namespace scenegram
