// Acceptance checks. Prints one PASS/FAIL line per criterion; with numeric
// arguments runs only those criteria. Exit status is nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "scenegram/errors.hpp"
#include "scenegram/evaluation.hpp"
#include "scenegram/grammar_io.hpp"
#include "scenegram/inference.hpp"
#include "scenegram/kernels.hpp"
#include "scenegram/parse_tree.hpp"
#include "scenegram/synthgen.hpp"
#include "scenegram/training.hpp"

#include "test_support.hpp"

namespace sg = scenegram;
namespace st = scenegram::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Criterion tolerances.
constexpr double kOracleTol = 1e-9;
constexpr double kOracleSeconds = 60.0;
constexpr int kOracleScenes = 200;
constexpr double kBeamMatchRate = 0.95;
constexpr int kBeamSeeds = 100;
constexpr double kBeamSecondsPerScene = 5.0;
constexpr double kFitRelTol = 1e-12;
constexpr double kPriorSumTol = 1e-12;
constexpr double kTrainSeconds = 1.0;
constexpr double kDoubledRatio = 2.5;
constexpr double kInvarianceTol = 1e-9;
// Fixed from the first full run (macro recall 99, precision 100 on the
// seed-7 corpus); the floor leaves room for platform noise in sampling.
constexpr double kMacroFloor = 95.0;

sg::TrainedGrammar tiny_trained() {
  const sg::Corpus train = st::memory_corpus(st::tiny_template(), 84, 100);
  return st::self_trained(train);
}

// 1. KLD equals the exhaustive oracle.
Verdict oracle_optimality() {
  Verdict v;
  const sg::TrainedGrammar tg = tiny_trained();
  const sg::Corpus test = st::memory_corpus(st::tiny_template(), kOracleScenes, 200);
  const auto t0 = Clock::now();
  int worst = -1;
  double worst_gap = 0.0;
  for (int i = 0; i < kOracleScenes; ++i) {
    const sg::Scene& scene = test.scenes[i];
    if (scene.size() > 6) v.fail(fmt("scene %d has %d terminals", i, scene.size()));
    const sg::KldOutcome kld = sg::parse_kld(scene, tg);
    const sg::ParseResult ex = sg::parse_exhaustive(scene, tg);
    if (!kld.result) {
      if (!ex.tree.empty()) v.fail(fmt("scene %d: kld found no goal, exhaustive did", i));
      continue;
    }
    const double gap = std::abs(kld.result->cost - ex.cost);
    if (gap > worst_gap) worst_gap = gap, worst = i;
    if (gap > kOracleTol) v.fail(fmt("scene %d: kld %.12g vs exhaustive %.12g", i, kld.result->cost, ex.cost));
    const double tk = sg::tree_cost(kld.result->tree, scene, tg);
    const double te = sg::tree_cost(ex.tree, scene, tg);
    if (std::abs(tk - te) > kOracleTol) v.fail(fmt("scene %d: trees not cost-tied (%.12g vs %.12g)", i, tk, te));
  }
  const double secs = seconds_since(t0);
  if (secs >= kOracleSeconds) v.fail(fmt("took %.1f s", secs));
  if (v.pass) v.detail = fmt("%d scenes, max gap %.3g (scene %d), %.2f s", kOracleScenes, worst_gap, worst, secs);
  return v;
}

// 2. Beam search sanity.
Verdict beam_sanity() {
  Verdict v;
  const sg::TrainedGrammar tiny = tiny_trained();
  const sg::Corpus small = st::memory_corpus(st::tiny_template(4), kBeamSeeds, 300);
  int matched = 0;
  for (int i = 0; i < kBeamSeeds; ++i) {
    const sg::Scene& scene = small.scenes[i];
    if (scene.size() > 4) v.fail(fmt("scene %d has %d terminals", i, scene.size()));
    sg::BeamConfig cfg;
    cfg.beam_width = sg::kUnboundedBeam;
    cfg.seed = static_cast<std::uint64_t>(i);
    const sg::ParseResult beam = sg::parse_beam(scene, tiny, cfg);
    const sg::ParseResult ex = sg::parse_exhaustive(scene, tiny);
    if (std::abs(beam.cost - ex.cost) <= kOracleTol) ++matched;
  }
  const double rate = static_cast<double>(matched) / kBeamSeeds;
  if (rate < kBeamMatchRate) v.fail(fmt("matched %d/%d", matched, kBeamSeeds));

  // 20-terminal office scenes.
  const sg::Corpus train = st::memory_corpus(sg::builtin_template("office"), 84, 7);
  const sg::TrainedGrammar office = sg::train(train.trees, train.scenes, st::appendix_grammar());
  sg::SceneTemplate tmpl = sg::builtin_template("office");
  std::vector<sg::Scene> twenty;
  for (int i = 0; twenty.size() < 5 && i < 2000; ++i) {
    sg::GeneratedScene g = sg::gen_scene(tmpl, sg::corpus_seed(400, i));
    if (g.scene.size() == 20) twenty.push_back(std::move(g.scene));
  }
  if (twenty.size() < 5) v.fail("could not generate five 20-terminal scenes");
  double slowest = 0.0;
  for (const auto& scene : twenty) {
    sg::BeamConfig cfg;
    cfg.beam_width = 200;
    const auto t0 = Clock::now();
    sg::parse_beam(scene, office, cfg);
    slowest = std::max(slowest, seconds_since(t0));
  }
  if (slowest >= kBeamSecondsPerScene) v.fail(fmt("B=200 parse took %.2f s", slowest));
  if (v.pass) {
    v.detail = fmt("unbounded beam matched %d/%d; B=200 on %zu 20-terminal scenes, slowest %.3f s", matched,
                   kBeamSeeds, twenty.size(), slowest);
  }
  return v;
}

// 3. Gaussian and prior fitting against independent computations.
Verdict learning_correctness() {
  Verdict v;
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> dim_d(1, 12), n_d(1, 60);
  std::normal_distribution<double> x_d(0.0, 1.0);
  std::uniform_real_distribution<double> scale_d(0.01, 50.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = dim_d(rng), n = n_d(rng);
    const double scale = scale_d(rng), shift = scale_d(rng);
    std::vector<sg::FeatureVector> xs(n, sg::FeatureVector(d));
    for (auto& x : xs)
      for (int k = 0; k < d; ++k) x[k] = shift + scale * x_d(rng);
    const sg::GaussianParams p = sg::fit_gaussian(xs);

    // Two-pass reference with plain loops.
    std::vector<double> mu(d, 0.0);
    for (const auto& x : xs)
      for (int k = 0; k < d; ++k) mu[k] += x[k];
    for (double& m : mu) m /= n;
    std::vector<double> cov(d * d, 0.0);
    if (n == 1) {
      for (int k = 0; k < d; ++k) cov[k * d + k] = 1.0;
    } else {
      for (const auto& x : xs)
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b) cov[a * d + b] += (x[a] - mu[a]) * (x[b] - mu[b]);
      for (double& c : cov) c /= n;
    }
    double mu_err = 0.0, mu_norm = 0.0, cov_err = 0.0, cov_norm = 0.0;
    for (int k = 0; k < d; ++k) {
      mu_err = std::max(mu_err, std::abs(p.mu[k] - mu[k]));
      mu_norm = std::max(mu_norm, std::abs(mu[k]));
    }
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        cov_err = std::max(cov_err, std::abs(p.sigma(a, b) - cov[a * d + b]));
        cov_norm = std::max(cov_norm, std::abs(cov[a * d + b]));
      }
    const double rel = std::max(mu_err / mu_norm, cov_err / cov_norm);
    worst = std::max(worst, rel);
    if (rel > kFitRelTol) v.fail(fmt("trial %d: relative error %.3g", trial, rel));
  }

  // Priors: random counts over a small grammar.
  sg::Grammar g;
  const auto a = g.add_symbol("A", sg::SymbolKind::Nonterminal);
  const auto b = g.add_symbol("B", sg::SymbolKind::Nonterminal);
  const auto c = g.add_symbol("C", sg::SymbolKind::Nonterminal);
  g.add_rule(a, {b}, sg::RuleKind::ObjectFormation);
  g.add_rule(a, {c}, sg::RuleKind::ObjectFormation);
  g.add_rule(a, {b, c}, sg::RuleKind::ObjectFormation);
  g.add_rule(b, {c}, sg::RuleKind::ObjectFormation);
  g.add_rule(b, {g.terminal()}, sg::RuleKind::Segmentation);
  std::uniform_int_distribution<int> count_d(0, 1000);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::int64_t> counts(g.rule_count());
    for (auto& n : counts) n = count_d(rng);
    const auto pri = sg::fit_priors(g, counts);
    for (sg::SymbolId s : {a, b}) {
      double sum = 0.0;
      for (sg::RuleId r : g.rules_with_lhs(s)) sum += pri[r];
      if (std::abs(sum - 1.0) > kPriorSumTol) v.fail(fmt("priors of %s sum to %.17g", g.name(s).c_str(), sum));
    }
  }
  sg::Grammar h;
  const auto x = h.add_symbol("X", sg::SymbolKind::Nonterminal);
  const auto y = h.add_symbol("Y", sg::SymbolKind::Nonterminal);
  const auto z = h.add_symbol("Z", sg::SymbolKind::Nonterminal);
  h.add_rule(x, {y}, sg::RuleKind::ObjectFormation);
  h.add_rule(x, {z}, sg::RuleKind::ObjectFormation);
  const std::vector<std::int64_t> fixture = {3, 2};
  const auto pri = sg::fit_priors(h, fixture);
  if (std::abs(pri[0] - 0.6) > kPriorSumTol || std::abs(pri[1] - 0.4) > kPriorSumTol) {
    v.fail(fmt("0.6/0.4 fixture gave %.17g/%.17g", pri[0], pri[1]));
  }
  if (v.pass) v.detail = fmt("1000 sample sets, worst relative error %.3g; priors exact", worst);
  return v;
}

// Copy of `g` with every symbol but segment and S renamed, giving a second,
// disjoint rule family reachable only through a second goal rule.
std::string dummy_name(const std::string& s) {
  if (s == sg::kTerminalSymbol || s == sg::kStartSymbol) return s;
  return "dup" + s;
}

sg::GroundTruthTree renamed(const sg::GroundTruthTree& t) {
  if (t.is_leaf()) return t;
  std::vector<sg::GroundTruthTree> children;
  for (const auto& c : t.children) children.push_back(renamed(c));
  return sg::GroundTruthTree::make_node(dummy_name(t.label), std::move(children));
}

sg::Grammar doubled(const sg::Grammar& g) {
  sg::Grammar out;
  for (int copy = 0; copy < 2; ++copy) {
    for (sg::SymbolId s = 0; s < g.symbol_count(); ++s) {
      out.add_symbol(copy ? dummy_name(g.name(s)) : g.name(s), g.symbol(s).kind);
    }
    for (const auto& r : g.rules()) {
      std::vector<sg::SymbolId> rhs;
      for (auto c : r.rhs) rhs.push_back(out.id(copy ? dummy_name(g.name(c)) : g.name(c)));
      out.add_rule(out.id(copy ? dummy_name(g.name(r.lhs)) : g.name(r.lhs)), rhs, r.kind);
    }
  }
  return out;
}

double min_train_seconds(const std::vector<sg::GroundTruthTree>& trees, const std::vector<sg::Scene>& scenes,
                         const sg::Grammar& g, int runs) {
  double best = 1e300;
  for (int i = 0; i < runs; ++i) {
    const auto t0 = Clock::now();
    const sg::TrainedGrammar tg = sg::train(trees, scenes, g);
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

// 4. Training time and its growth with the rule count.
Verdict training_speed() {
  Verdict v;
  const sg::Corpus c = st::memory_corpus(sg::builtin_template("office"), 84, 7);
  const sg::Grammar g = st::appendix_grammar();
  const auto t0 = Clock::now();
  const sg::TrainedGrammar tg = sg::train(c.trees, c.scenes, g);
  const double first = seconds_since(t0);
  if (first >= kTrainSeconds) v.fail(fmt("training took %.3f s", first));

  // Doubled: every rule gets a renamed twin, every tree a renamed copy, so
  // each dummy rule is fitted on as many instances as its original.
  const sg::Grammar g2 = doubled(g);
  std::vector<sg::GroundTruthTree> trees2 = c.trees;
  std::vector<sg::Scene> scenes2 = c.scenes;
  for (std::size_t i = 0; i < c.trees.size(); ++i) {
    trees2.push_back(renamed(c.trees[i]));
    scenes2.push_back(c.scenes[i]);
  }
  const double base = min_train_seconds(c.trees, c.scenes, g, 15);
  const double twice = min_train_seconds(trees2, scenes2, g2, 15);
  const sg::TrainedGrammar tg2 = sg::train(trees2, scenes2, g2);
  if (tg2.grammar().rule_count() < 2 * tg.grammar().rule_count() - 1) {
    v.fail(fmt("doubled grammar trained %d rules vs %d", tg2.grammar().rule_count(), tg.grammar().rule_count()));
  }
  const double ratio = twice / base;
  if (ratio > kDoubledRatio) v.fail(fmt("doubled rules took %.2fx", ratio));
  if (v.pass) {
    v.detail = fmt("84 scenes in %.3f s (%d rules); doubled %d rules %.4f s vs %.4f s = %.2fx", first,
                   tg.grammar().rule_count(), tg2.grammar().rule_count(), twice, base, ratio);
  }
  return v;
}

struct FlatCheck {
  int nodes = 0;
  int intermediate_nodes = 0;
  std::string error;
};

// Walks a rederived tree. At every node whose rule has an intermediate
// child, f from application_parts must equal f over the node's flat child
// list (found by descending through intermediates).
sg::Entity check_flat(const sg::GroundTruthTree& t, const sg::Grammar& g, const sg::Scene& scene, FlatCheck& out) {
  if (t.is_leaf()) return sg::terminal_entity(scene, scene.index_of(*t.leaf), g);
  std::vector<sg::Entity> kids;
  for (const auto& c : t.children) kids.push_back(check_flat(c, g, scene, out));
  std::vector<const sg::Entity*> ptrs;
  for (const auto& k : kids) ptrs.push_back(&k);
  const sg::SymbolId sym = g.id(t.label);
  sg::Entity self = sg::combine_entities(g, sym, ptrs);
  ++out.nodes;

  bool has_intermediate = false;
  for (const auto& c : t.children)
    if (!c.is_leaf() && g.is_intermediate(g.id(c.label))) has_intermediate = true;
  if (!has_intermediate || g.is_intermediate(sym)) return self;
  ++out.intermediate_nodes;

  std::vector<sg::Part> flat;
  std::function<void(const sg::GroundTruthTree&, const sg::Entity&)> expand = [&](const sg::GroundTruthTree& c,
                                                                                  const sg::Entity& e) {
    if (!c.is_leaf() && g.is_intermediate(g.id(c.label))) {
      for (const auto& cc : c.children) expand(cc, check_flat(cc, g, scene, out));
      return;
    }
    flat.push_back({c.is_leaf() ? std::string_view(sg::kTerminalSymbol) : std::string_view(g.name(g.id(c.label))),
                    e.stats, e.span});
  };
  for (std::size_t i = 0; i < t.children.size(); ++i) expand(t.children[i], kids[i]);

  const sg::FeatureVector via = sg::rule_features(sg::application_parts(ptrs), scene);
  const sg::FeatureVector direct = sg::rule_features(flat, scene);
  if (via.size() != direct.size() || via != direct) {
    if (out.error.empty()) out.error = "f differs at node '" + t.label + "'";
  }
  return self;
}

// 5. Binarization fidelity.
Verdict binarization_fidelity() {
  Verdict v;
  const sg::Corpus c = st::memory_corpus(sg::builtin_template("office"), 50, 5);
  const sg::Grammar extracted = st::extracted_grammar(c.trees);
  const sg::Grammar appendix = st::appendix_grammar();
  int nodes = 0, checked = 0;
  for (const sg::Grammar* g : {&extracted, &appendix}) {
    for (std::size_t i = 0; i < c.trees.size(); ++i) {
      try {
        const sg::GroundTruthTree r = sg::rederive(c.trees[i], *g);
        FlatCheck fc;
        check_flat(r, *g, c.scenes[i], fc);
        nodes += fc.nodes;
        checked += fc.intermediate_nodes;
        if (!fc.error.empty()) v.fail(fmt("tree %zu: %s", i, fc.error.c_str()));
      } catch (const sg::ValidationError& e) {
        v.fail(fmt("tree %zu: %s", i, e.what()));
      }
    }
  }
  if (checked == 0) v.fail("no intermediate-bearing rule applications found");
  if (v.pass) {
    v.detail = fmt("50 trees under 2 grammars, %d nodes, %d intermediate-bearing applications bitwise equal", nodes,
                   checked);
  }
  return v;
}

// Cost of every rule application in the rederived gold trees, keyed by rule
// spec so tables from different grammars line up.
std::map<std::string, std::vector<double>> cost_table(const sg::Corpus& c, const sg::TrainedGrammar& tg) {
  std::map<std::string, std::vector<double>> out;
  for (std::size_t i = 0; i < c.trees.size(); ++i) {
    const sg::ParseTree t = sg::parse_tree_from_ground_truth(sg::rederive(c.trees[i], tg.grammar()), c.scenes[i], tg);
    for (const auto& n : t.nodes) {
      if (n.rule >= 0) out[tg.grammar().spec(n.rule).key()].push_back(n.rule_cost);
    }
  }
  return out;
}

sg::RuleModel random_gaussian(int dim, std::int64_t count, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<sg::FeatureVector> xs(40, sg::FeatureVector(dim));
  for (auto& x : xs)
    for (int k = 0; k < dim; ++k) x[k] = d(rng);
  sg::RuleModel m;
  m.variant = sg::GaussianModel{std::make_shared<const sg::GaussianDensity>(sg::fit_gaussian(xs))};
  m.count = count;
  return m;
}

// 6. Composition.
Verdict composition() {
  Verdict v;
  const sg::Corpus c = st::memory_corpus(sg::builtin_template("office"), 40, 9);
  const sg::TrainedGrammar base = sg::train(c.trees, c.scenes, st::appendix_grammar());
  std::mt19937_64 rng(6);

  // Disjoint left-hand sides: laptop -> Plane.
  sg::Grammar dg;
  const auto laptop = dg.add_symbol("laptop", sg::SymbolKind::Nonterminal);
  const auto plane = dg.add_symbol(sg::kPlaneSymbol, sg::SymbolKind::Nonterminal);
  dg.add_rule(laptop, {plane}, sg::RuleKind::ObjectFormation);
  std::vector<sg::RuleModel> dm = {random_gaussian(sg::feature_length(1), 12, rng)};
  const sg::TrainedGrammar donor(dg, dm);
  const sg::TrainedGrammar composed = sg::compose(base, donor);

  const auto before = cost_table(c, base);
  const auto after = cost_table(c, composed);
  std::size_t values = 0;
  if (before.size() != after.size()) v.fail("composed grammar changed which rules the gold trees use");
  for (const auto& [key, costs] : before) {
    auto it = after.find(key);
    if (it == after.end() || it->second.size() != costs.size()) {
      v.fail("rule " + key + " missing after compose");
      continue;
    }
    for (std::size_t i = 0; i < costs.size(); ++i, ++values) {
      if (std::memcmp(&costs[i], &it->second[i], sizeof(double)) != 0) v.fail("cost of " + key + " changed");
    }
  }

  // Shared left-hand side: TableComplex -> TableComplex laptop.
  sg::Grammar sg2;
  const auto tc = sg2.add_symbol("TableComplex", sg::SymbolKind::Nonterminal);
  const auto lap2 = sg2.add_symbol("laptop", sg::SymbolKind::Nonterminal);
  const auto pl2 = sg2.add_symbol(sg::kPlaneSymbol, sg::SymbolKind::Nonterminal);
  sg2.add_rule(lap2, {pl2}, sg::RuleKind::ObjectFormation);
  sg2.add_rule(tc, {tc, lap2}, sg::RuleKind::ObjectGrouping);
  std::vector<sg::RuleModel> sm = {random_gaussian(sg::feature_length(1), 15, rng),
                                   random_gaussian(sg::feature_length(2), 15, rng)};
  const sg::TrainedGrammar shared_donor(sg2, sm);
  const sg::TrainedGrammar merged = sg::compose(base, shared_donor);

  auto params_equal = [](const sg::RuleModel& a, const sg::RuleModel& b) {
    if (a.variant.index() != b.variant.index()) return false;
    const auto* ga = std::get_if<sg::GaussianModel>(&a.variant);
    if (!ga) return true;
    const auto& pa = ga->density->params();
    const auto& pb = std::get<sg::GaussianModel>(b.variant).density->params();
    return pa.mu.size() == pb.mu.size() && pa.sigma.size() == pb.sigma.size() &&
           std::memcmp(pa.mu.data(), pb.mu.data(), sizeof(double) * pa.mu.size()) == 0 &&
           std::memcmp(pa.sigma.data(), pb.sigma.data(), sizeof(double) * pa.sigma.size()) == 0;
  };
  auto check_source = [&](const sg::TrainedGrammar& src) {
    for (sg::RuleId r = 0; r < src.grammar().rule_count(); ++r) {
      const sg::RuleSpec spec = src.grammar().spec(r);
      std::vector<sg::SymbolId> rhs;
      for (const auto& n : spec.rhs) rhs.push_back(merged.grammar().id(n));
      const auto id = merged.grammar().find_rule(merged.grammar().id(spec.lhs), rhs);
      if (!id) {
        v.fail("rule " + spec.key() + " lost in shared compose");
      } else if (!params_equal(src.model(r), merged.model(*id))) {
        v.fail("parameters of " + spec.key() + " changed");
      }
    }
  };
  check_source(base);
  check_source(shared_donor);
  double worst_sum = 0.0;
  for (sg::SymbolId s = 0; s < merged.grammar().symbol_count(); ++s) {
    const auto& family = merged.grammar().rules_with_lhs(s);
    if (family.empty()) continue;
    double sum = 0.0;
    for (auto r : family) sum += merged.model(r).prior;
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
  }
  if (worst_sum > kPriorSumTol) v.fail(fmt("renormalized priors off by %.3g", worst_sum));
  if (v.pass) {
    v.detail = fmt("%zu rule costs bit-identical; shared-lhs compose kept %d models, prior sums within %.2g",
                   values, merged.grammar().rule_count(), worst_sum);
  }
  return v;
}

// 7. Four-fold labeling on the office corpus.
Verdict end_to_end() {
  Verdict v;
  const sg::Corpus c = st::memory_corpus(sg::builtin_template("office"), 84, 7);
  sg::EvalOptions opts;
  const sg::EvalResult r = sg::cross_validate(c, st::appendix_grammar(), opts);
  for (const auto& f : r.folds) {
    if (f.train_scenes != 63 || f.test_scenes != 21) v.fail(fmt("fold %d split %d/%d", f.fold, f.train_scenes, f.test_scenes));
  }
  if (r.report.macro_recall < kMacroFloor) v.fail(fmt("macro recall %.2f", r.report.macro_recall));
  if (r.report.macro_precision < kMacroFloor) v.fail(fmt("macro precision %.2f", r.report.macro_precision));
  if (v.pass) {
    v.detail = fmt("macro recall %.2f, precision %.2f (floor %.0f)", r.report.macro_recall, r.report.macro_precision,
                   kMacroFloor);
  }
  return v;
}

sg::SegmentStats moved(std::span<const Eigen::Vector3d> pts, double angle, const Eigen::Vector2d& shift,
                       double hull) {
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  std::vector<Eigen::Vector3d> out;
  for (const auto& p : pts) out.push_back(rot * p + Eigen::Vector3d(shift.x(), shift.y(), 0.0));
  return sg::stats_from_points(out, hull);
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs the CLI; output files land in `dir`.
int run_cli(const std::string& args) {
  const std::string cmd = std::string(SCENEGRAM_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::filesystem::path> files_under(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out.push_back(std::filesystem::relative(e.path(), dir));
  std::sort(out.begin(), out.end());
  return out;
}

// One full CLI session into `dir`; returns "" or the first failure.
std::string cli_session(const std::filesystem::path& dir) {
  const std::string d = dir.string();
  const std::string grammar = (st::source_dir() / "grammars" / "office_appendix.json").string();
  const std::vector<std::pair<std::string, int>> steps = {
      {"gen --template office -n 24 --seed 3 --out " + d + "/corpus", 0},
      {"gen --template tiny -n 12 --seed 4 --out " + d + "/tiny", 0},
      {"extract-rules --corpus " + d + "/corpus --out " + d + "/extracted.json", 0},
      {"train --grammar " + grammar + " --corpus " + d + "/corpus --out " + d + "/trained.json", 0},
      {"train --grammar " + d + "/extracted.json --corpus " + d + "/tiny --out " + d + "/tiny_trained.json", 0},
      {"parse --grammar " + d + "/trained.json --scene " + d + "/corpus/scene_005.json --out " + d +
           "/kld.json --dot " + d + "/kld.dot",
       0},
      {"parse --algo beam --seed 9 --grammar " + d + "/trained.json --scene " + d + "/corpus/scene_006.json --out " +
           d + "/beam.json",
       0},
      {"eval --grammar " + grammar + " --corpus " + d + "/corpus --out " + d + "/report.tsv --json " + d +
           "/report.json",
       0},
      {"compose " + d + "/trained.json " + d + "/trained.json --out " + d + "/composed.json", 0},
      {"compose " + d + "/trained.json " + d + "/tiny_trained.json --out " + d + "/conflict.json", 2},
  };
  for (const auto& [args, want] : steps) {
    const int got = run_cli(args);
    if (got != want) return fmt("'%s' exited %d", args.substr(0, 40).c_str(), got);
  }
  return "";
}

// 8. Invariants.
Verdict invariants() {
  Verdict v;
  const sg::Corpus train = st::memory_corpus(sg::builtin_template("office"), 84, 7);
  const sg::TrainedGrammar office = sg::train(train.trees, train.scenes, st::appendix_grammar());
  const sg::Corpus test = st::memory_corpus(sg::builtin_template("office"), 30, 8);
  const sg::TrainedGrammar tiny = tiny_trained();
  const sg::Corpus tiny_test = st::memory_corpus(st::tiny_template(), 30, 9);

  std::int64_t statements = 0;
  int trees = 0;
  auto check_kld = [&](const sg::Scene& scene, const sg::TrainedGrammar& tg) {
    sg::KldOptions opts;
    opts.keep_statements = true;
    const sg::KldOutcome out = sg::parse_kld(scene, tg, opts);
    const sg::StatementPool& pool = *out.pool;
    double last = -1.0;
    for (int id : out.derived) {
      const sg::Statement& s = pool[id];
      ++statements;
      if (s.cost < last - kOracleTol) v.fail("derived costs not popped in order");
      last = std::max(last, s.cost);
      for (int k = 0; k < s.arity; ++k) {
        if (s.cost < pool[s.children[k]].cost) v.fail("statement cheaper than its child");
      }
      if (!sg::is_connected(s.span(), scene)) v.fail("derived statement with disconnected span");
    }
    if (out.result) {
      ++trees;
      if (!sg::spans_well_formed(out.result->tree, scene)) v.fail("kld tree with malformed spans");
    }
    sg::BeamConfig cfg;
    cfg.beam_width = 50;
    const sg::ParseResult b = sg::parse_beam(scene, tg, cfg);
    if (!b.tree.empty()) {
      ++trees;
      if (!sg::spans_well_formed(b.tree, scene)) v.fail("beam tree with malformed spans");
    }
  };
  for (const auto& s : test.scenes) check_kld(s, office);
  for (const auto& s : tiny_test.scenes) {
    check_kld(s, tiny);
    const sg::ParseResult ex = sg::parse_exhaustive(s, tiny);
    if (!ex.tree.empty()) {
      ++trees;
      if (!sg::spans_well_formed(ex.tree, s)) v.fail("exhaustive tree with malformed spans");
    }
  }

  // Permutation invariance of f and rigid-motion invariance of node features.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  int perms = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const sg::Scene& scene = test.scenes[trial % test.scenes.size()];
    const int k = 2 + trial % 4;
    if (scene.size() < k) continue;
    std::vector<int> idx(scene.size());
    for (int i = 0; i < scene.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    static const char* names[] = {"Plane", "monitor", "Plane", "keyboard", "Plane"};
    std::vector<sg::Part> parts;
    for (int i = 0; i < k; ++i) {
      parts.push_back({names[i], scene.segment(idx[i]).stats, sg::TerminalSet::single(idx[i])});
    }
    const sg::FeatureVector f0 = sg::rule_features(parts, scene);
    for (int p = 0; p < 5; ++p, ++perms) {
      std::shuffle(parts.begin(), parts.end(), rng);
      if (sg::rule_features(parts, scene) != f0) v.fail("f depends on part order");
    }

    std::vector<Eigen::Vector3d> pts;
    const Eigen::Vector3d n = Eigen::Vector3d(u(rng), u(rng), u(rng)).normalized();
    const Eigen::Vector3d a = n.unitOrthogonal(), b = n.cross(a);
    for (int i = 0; i < 200; ++i) pts.push_back(Eigen::Vector3d(0.5, 0.2, 1.0) + u(rng) * a + 0.4 * u(rng) * b + 0.01 * u(rng) * n);
    const sg::FeatureVector base = sg::node_features(sg::stats_from_points(pts, 0.8));
    const sg::FeatureVector moved_f =
        sg::node_features(moved(pts, 6.0 * u(rng), Eigen::Vector2d(5 * u(rng), 5 * u(rng)), 0.8));
    worst = std::max(worst, (base - moved_f).cwiseAbs().maxCoeff());
  }
  if (worst > kInvarianceTol) v.fail(fmt("node features moved by %.3g under a rigid motion", worst));

  // CLI determinism.
  std::string cli = "skipped";
  {
    st::TempDir a("accept-a"), b("accept-b");
    const std::string ea = cli_session(a.path());
    const std::string eb = ea.empty() ? cli_session(b.path()) : ea;
    if (!ea.empty() || !eb.empty()) {
      v.fail("cli: " + (ea.empty() ? eb : ea));
    } else {
      const auto fa = files_under(a.path()), fb = files_under(b.path());
      if (fa != fb) v.fail("cli runs wrote different file sets");
      for (const auto& f : fa) {
        if (read_file(a.path() / f) != read_file(b.path() / f)) v.fail("cli output differs: " + f.string());
      }
      cli = fmt("%zu files byte-identical", fa.size());
    }
  }
  if (v.pass) {
    v.detail = fmt("%lld statements monotone, %d trees well-formed, %d permutations, rigid motion %.2g, cli %s",
                   static_cast<long long>(statements), trees, perms, worst, cli.c_str());
  }
  return v;
}

struct Criterion {
  int id;
  const char* name;
  Verdict (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "oracle optimality", oracle_optimality}, {2, "beam sanity", beam_sanity},
      {3, "learning correctness", learning_correctness}, {4, "training speed", training_speed},
      {5, "binarization fidelity", binarization_fidelity}, {6, "composition", composition},
      {7, "end-to-end labeling", end_to_end}, {8, "invariants", invariants},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    Verdict v;
    const auto t0 = Clock::now();
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.fail(std::string("exception: ") + e.what());
    }
    std::printf("%s %d %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
