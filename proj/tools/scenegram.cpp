// Command-line front end: gen, extract-rules, train, parse, eval, compose.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "scenegram/errors.hpp"
#include "scenegram/evaluation.hpp"
#include "scenegram/grammar_io.hpp"
#include "scenegram/inference.hpp"
#include "scenegram/synthgen.hpp"
#include "scenegram/training.hpp"

namespace sg = scenegram;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitNoGoal = 3;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

sg::SceneTemplate load_template(const std::string& name_or_path) {
  if (name_or_path == "office" || name_or_path == "tiny") return sg::builtin_template(name_or_path);
  return sg::template_from_json(sg::load_json(name_or_path));
}

json tree_json(const sg::ParseTree& tree, const sg::Grammar& g, const sg::Scene& scene, int id) {
  const sg::ParseNode& n = tree.nodes[id];
  if (n.terminal >= 0) return {{"leaf", scene.segment(n.terminal).id}};
  json children = json::array();
  for (int c : n.children) children.push_back(tree_json(tree, g, scene, c));
  return {{"label", g.name(n.symbol)}, {"cost", n.cost}, {"children", children}};
}

sg::ParseAlgorithm algorithm_from(const std::string& s) {
  if (s == "auto") return sg::ParseAlgorithm::Auto;
  if (s == "kld") return sg::ParseAlgorithm::Kld;
  if (s == "beam") return sg::ParseAlgorithm::Beam;
  return sg::ParseAlgorithm::Exhaustive;
}

struct ParseFlags {
  std::string algo = "kld";
  std::size_t beam_width = 200;
  std::size_t samples = 4;
  std::uint64_t seed = 0;
  std::int64_t budget_expansions = 2'000'000;
  double budget_seconds = 30.0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--algo", algo, "kld, beam, exhaustive, or auto (kld, then beam on failure)")
        ->check(CLI::IsMember({"kld", "beam", "exhaustive", "auto"}));
    cmd->add_option("--beam-width", beam_width, "Forests kept per beam step (0 = unbounded)");
    cmd->add_option("--samples", samples, "Successors sampled per forest per step");
    cmd->add_option("--seed", seed, "Beam search seed");
    cmd->add_option("--budget-expansions", budget_expansions, "KLD expansion budget");
    cmd->add_option("--budget-seconds", budget_seconds, "KLD wall-time budget");
  }

  sg::ParseRequest request() const {
    sg::ParseRequest r;
    r.algorithm = algorithm_from(algo);
    r.budget = {budget_expansions, budget_seconds};
    r.beam.beam_width = beam_width == 0 ? sg::kUnboundedBeam : beam_width;
    r.beam.samples_per_state = samples;
    r.beam.seed = seed;
    return r;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic scene-grammar parsing of segmented 3D scenes"};
  app.require_subcommand(1);

  // gen
  std::string gen_template = "office", gen_out;
  int gen_n = 84;
  std::uint64_t gen_seed = 1;
  auto* gen = app.add_subcommand("gen", "Generate a labeled synthetic corpus");
  gen->add_option("--template", gen_template, "office, tiny, or a template JSON file");
  gen->add_option("-n,--count", gen_n, "Number of scenes");
  gen->add_option("--seed", gen_seed, "Corpus seed");
  gen->add_option("--out", gen_out, "Output directory")->required();

  // extract-rules
  std::string ex_corpus, ex_out;
  std::vector<std::string> ex_trees;
  auto* ex = app.add_subcommand("extract-rules", "Extract a binarized grammar skeleton from ground-truth trees");
  ex->add_option("--corpus", ex_corpus, "Corpus directory");
  ex->add_option("--trees", ex_trees, "Tree files");
  ex->add_option("--out", ex_out, "Output grammar file")->required();

  // train
  std::string tr_grammar, tr_corpus, tr_out;
  double tr_k = sg::kDefaultGoalPenalty;
  auto* tr = app.add_subcommand("train", "Fit rule models on a corpus");
  tr->add_option("--grammar", tr_grammar, "Grammar file")->required();
  tr->add_option("--corpus", tr_corpus, "Corpus directory")->required();
  tr->add_option("--out", tr_out, "Trained grammar output")->required();
  tr->add_option("--goal-k", tr_k, "Penalty per unspanned terminal");

  // parse
  std::string pa_grammar, pa_scene, pa_dot, pa_out;
  ParseFlags pa_flags;
  auto* pa = app.add_subcommand("parse", "Parse one scene");
  pa->add_option("--grammar", pa_grammar, "Trained grammar file")->required();
  pa->add_option("--scene", pa_scene, "Scene file")->required();
  pa->add_option("--dot", pa_dot, "Write the tree as Graphviz DOT");
  pa->add_option("--out", pa_out, "Write the result JSON here instead of stdout");
  pa_flags.add_to(pa);

  // eval
  std::string ev_grammar, ev_corpus, ev_out, ev_json;
  int ev_folds = sg::kCorpusFolds;
  bool ev_gold = false;
  ParseFlags ev_flags;
  ev_flags.algo = "auto";
  auto* ev = app.add_subcommand("eval", "Cross-validated segment labeling report");
  ev->add_option("--grammar", ev_grammar, "Grammar file (models, if any, are refit per fold)")->required();
  ev->add_option("--corpus", ev_corpus, "Corpus directory")->required();
  ev->add_option("--folds", ev_folds, "Number of folds");
  ev->add_option("--out", ev_out, "TSV report path (default stdout)");
  ev->add_option("--json", ev_json, "Full-precision JSON report path");
  ev->add_flag("--from-gold", ev_gold, "Score ground-truth trees instead of parses");
  ev_flags.add_to(ev);

  // compose
  std::string co_base, co_donor, co_out;
  auto* co = app.add_subcommand("compose", "Union of two trained grammars");
  co->add_option("g1", co_base, "Base trained grammar")->required();
  co->add_option("g2", co_donor, "Donor trained grammar")->required();
  co->add_option("--out", co_out, "Output file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      sg::gen_corpus(load_template(gen_template), gen_n, gen_seed, gen_out);
      std::cout << "wrote " << gen_n << " scenes to " << gen_out << "\n";
    } else if (*ex) {
      std::vector<sg::GroundTruthTree> trees;
      if (!ex_corpus.empty()) trees = sg::load_corpus(ex_corpus).trees;
      for (const auto& p : ex_trees) trees.push_back(sg::load_tree(p));
      if (trees.empty()) throw sg::ValidationError("extract-rules: no trees given");
      const auto rules = sg::extract_rules(trees);
      const sg::Grammar g = sg::Grammar::from_rules(sg::binarize(rules));
      sg::save_json(ex_out, sg::grammar_to_json(g, nullptr));
      std::cout << "extracted " << rules.size() << " rules (" << g.rule_count() << " after binarization)\n";
    } else if (*tr) {
      const sg::GrammarFile gf = sg::load_grammar(tr_grammar);
      const sg::Corpus corpus = sg::load_corpus(tr_corpus);
      sg::TrainOptions opts;
      opts.goal_k = tr_k;
      const auto t0 = std::chrono::steady_clock::now();
      const sg::TrainedGrammar tg = sg::train(corpus.trees, corpus.scenes, gf.grammar, opts);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      sg::save_json(tr_out, sg::trained_to_json(tg));
      std::printf("trained %d rules on %zu scenes in %.3f s\n", tg.grammar().rule_count(), corpus.scenes.size(), secs);
    } else if (*pa) {
      const sg::TrainedGrammar tg = sg::load_trained(pa_grammar);
      const sg::Scene scene = sg::load_scene(pa_scene);
      const sg::ParseOutcome out = sg::parse_scene(scene, tg, pa_flags.request());
      const auto& r = out.result;
      json j = {{"algorithm", std::string(sg::to_string(r.algorithm))},
                {"has_goal", out.has_goal},
                {"budget_exhausted", out.budget_exhausted},
                {"cost", r.cost},
                {"unspanned", r.unspanned},
                {"clamped", r.clamped},
                {"expansions", r.stats.expansions},
                {"queue_peak", r.stats.queue_peak},
                {"statements", r.stats.statements}};
      json labels = json::object();
      for (const auto& [id, label] : sg::extract_labels(r.tree, tg.grammar(), scene)) labels[std::to_string(id)] = label;
      j["labels"] = labels;
      if (!r.tree.empty()) j["tree"] = tree_json(r.tree, tg.grammar(), scene, r.tree.root);
      if (pa_out.empty()) {
        std::cout << j.dump(1) << "\n";
      } else {
        sg::save_json(pa_out, j);
      }
      std::fprintf(stderr, "parse time %.3f s\n", r.stats.seconds);
      if (!pa_dot.empty()) write_text(pa_dot, sg::export_dot(r.tree, tg.grammar(), scene));
      if (!out.has_goal) {
        std::fprintf(stderr, out.budget_exhausted ? "budget exhausted without a goal derivation\n"
                                                  : "no goal derivation exists\n");
        return kExitNoGoal;
      }
    } else if (*ev) {
      const sg::GrammarFile gf = sg::load_grammar(ev_grammar);
      const sg::Corpus corpus = sg::load_corpus(ev_corpus);
      sg::EvalOptions opts;
      opts.folds = ev_folds;
      opts.train.goal_k = gf.goal_k;
      opts.parse = ev_flags.request();
      opts.predictions_from_gold = ev_gold;
      const sg::EvalResult res = sg::cross_validate(corpus, gf.grammar, opts);
      const std::string tsv = sg::report_tsv(res.report);
      if (ev_out.empty()) {
        std::cout << tsv;
      } else {
        write_text(ev_out, tsv);
      }
      if (!ev_json.empty()) {
        json j = sg::report_json(res.report);
        json folds = json::array();
        for (const auto& f : res.folds) {
          folds.push_back({{"fold", f.fold},
                           {"train_scenes", f.train_scenes},
                           {"test_scenes", f.test_scenes},
                           {"budget_exhausted", f.budget_exhausted},
                           {"without_goal", f.without_goal}});
        }
        j["folds"] = folds;
        sg::save_json(ev_json, j);
      }
      for (const auto& f : res.folds) {
        std::fprintf(stderr, "fold %d: train %.3f s, parse %.3f s, %d budget-exhausted, %d without goal\n", f.fold,
                     f.train_seconds, f.parse_seconds, f.budget_exhausted, f.without_goal);
      }
    } else if (*co) {
      const sg::TrainedGrammar g = sg::compose(sg::load_trained(co_base), sg::load_trained(co_donor));
      sg::save_json(co_out, sg::trained_to_json(g));
      std::cout << "composed grammar has " << g.grammar().rule_count() << " rules\n";
    }
  } catch (const sg::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: malformed JSON: %s\n", e.what());
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}
