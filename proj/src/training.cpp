#include "scenegram/training.hpp"

#include "scenegram/errors.hpp"
#include "scenegram/parse_tree.hpp"

namespace scenegram {

namespace {

class SampleCollector {
 public:
  SampleCollector(const Grammar& g, RuleSamples& out) : g_(g), out_(out) {}

  void run(const GroundTruthTree& rederived, const Scene& scene) {
    scene_ = &scene;
    visit(rederived);
  }

 private:
  struct Visited {
    SymbolId symbol;
    Entity entity;
  };

  Visited visit(const GroundTruthTree& t) {
    if (t.is_leaf()) {
      auto idx = scene_->find_index(*t.leaf);
      if (!idx) throw ValidationError("tree: leaf id " + std::to_string(*t.leaf) + " not in scene");
      return {g_.terminal(), terminal_entity(*scene_, *idx, g_)};
    }
    std::vector<Visited> kids;
    kids.reserve(t.children.size());
    for (const auto& c : t.children) kids.push_back(visit(c));

    const SymbolId lhs = g_.id(t.label);
    std::vector<SymbolId> rhs;
    for (const auto& k : kids) rhs.push_back(k.symbol);
    auto rule = g_.find_rule(lhs, rhs);
    if (!rule) throw NotDerivableError("node '" + t.label + "': no matching rule");
    const Rule& r = g_.rule(*rule);
    if (r.rhs.size() == 2 && kids[0].symbol != r.rhs[0]) std::swap(kids[0], kids[1]);

    std::vector<const Entity*> ents;
    for (const auto& k : kids) ents.push_back(&k.entity);
    ++out_.counts[*rule];
    if (model_type_for(g_, r) == ModelType::Gaussian) {
      const std::vector<Part> parts = application_parts(ents);
      out_.features[*rule].push_back(rule_features(parts, *scene_));
    }
    return {lhs, combine_entities(g_, lhs, ents)};
  }

  const Grammar& g_;
  RuleSamples& out_;
  const Scene* scene_ = nullptr;
};

}  // namespace

RuleSamples collect_rule_samples(std::span<const GroundTruthTree> trees, std::span<const Scene> scenes,
                                 const Grammar& grammar) {
  if (trees.size() != scenes.size()) throw std::invalid_argument("train: one scene per tree required");
  RuleSamples samples;
  samples.counts.assign(grammar.rule_count(), 0);
  samples.features.resize(grammar.rule_count());
  SampleCollector collector(grammar, samples);
  for (std::size_t i = 0; i < trees.size(); ++i) {
    collector.run(rederive(trees[i], grammar), scenes[i]);
  }
  return samples;
}

TrainedGrammar train(std::span<const GroundTruthTree> trees, std::span<const Scene> scenes, const Grammar& grammar,
                     const TrainOptions& options) {
  RuleSamples samples = collect_rule_samples(trees, scenes, grammar);

  // Keep rules that were applied, plus goal rules.
  Grammar kept;
  std::vector<RuleId> source;
  for (RuleId r = 0; r < grammar.rule_count(); ++r) {
    const Rule& rule = grammar.rule(r);
    if (samples.counts[r] == 0 && rule.kind != RuleKind::Goal) continue;
    const SymbolId lhs = kept.add_symbol(grammar.name(rule.lhs), grammar.symbol(rule.lhs).kind);
    std::vector<SymbolId> rhs;
    for (auto c : rule.rhs) rhs.push_back(kept.add_symbol(grammar.name(c), grammar.symbol(c).kind));
    kept.add_rule(lhs, std::move(rhs), rule.kind);
    source.push_back(r);
  }

  std::vector<std::int64_t> counts;
  for (RuleId r : source) counts.push_back(samples.counts[r]);
  const std::vector<double> priors = fit_priors(kept, counts);

  std::vector<RuleModel> models;
  models.reserve(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    const RuleId r = source[i];
    RuleModel m;
    m.prior = priors[i];
    m.count = counts[i];
    switch (model_type_for(kept, kept.rule(static_cast<RuleId>(i)))) {
      case ModelType::Goal:
        m.variant = GoalModel{options.goal_k};
        break;
      case ModelType::PlaneFit:
        m.variant = PlaneFitModel{};
        break;
      case ModelType::Gaussian: {
        if (samples.features[r].empty()) {
          throw ValidationError("rule '" + grammar.spec(r).key() + "' has no training instances");
        }
        GaussianParams p;
        try {
          p = fit_gaussian(samples.features[r]);
        } catch (const std::invalid_argument& e) {
          throw ValidationError("rule '" + grammar.spec(r).key() + "': " + e.what());
        }
        p.reg_epsilon = options.reg_epsilon;
        m.variant = GaussianModel{std::make_shared<const GaussianDensity>(std::move(p))};
        break;
      }
    }
    models.push_back(std::move(m));
  }
  return TrainedGrammar(std::move(kept), std::move(models));
}

}  // namespace scenegram
