#include "scenegram/parse_tree.hpp"

#include "scenegram/errors.hpp"

namespace scenegram {

Entity terminal_entity(const Scene& scene, int index, const Grammar& grammar) {
  Entity e;
  e.stats = scene.segment(index).stats;
  e.span = TerminalSet::single(index);
  e.parts.push_back({grammar.name(grammar.terminal()), e.stats, e.span});
  return e;
}

std::vector<Part> application_parts(std::span<const Entity* const> children) {
  std::vector<Part> parts;
  for (const Entity* c : children) parts.insert(parts.end(), c->parts.begin(), c->parts.end());
  return parts;
}

Entity combine_entities(const Grammar& grammar, SymbolId symbol, std::span<const Entity* const> children) {
  Entity e;
  e.stats = children.front()->stats;
  e.span = children.front()->span;
  for (std::size_t i = 1; i < children.size(); ++i) {
    e.stats = merge_stats(e.stats, children[i]->stats);
    e.span |= children[i]->span;
  }
  if (grammar.is_intermediate(symbol)) {
    e.parts = application_parts(children);
  } else {
    e.parts.push_back({grammar.name(symbol), e.stats, e.span});
  }
  return e;
}

namespace {

struct Built {
  int node;
  Entity entity;
};

class GroundTruthConverter {
 public:
  GroundTruthConverter(const Scene& scene, const TrainedGrammar& tg) : scene_(scene), tg_(tg), g_(tg.grammar()) {}

  ParseTree run(const GroundTruthTree& t) {
    Built b = build(t);
    tree_.root = b.node;
    return std::move(tree_);
  }

 private:
  Built build(const GroundTruthTree& t) {
    if (t.is_leaf()) {
      auto idx = scene_.find_index(*t.leaf);
      if (!idx) throw ValidationError("tree: leaf id " + std::to_string(*t.leaf) + " not in scene");
      ParseNode n;
      n.symbol = g_.terminal();
      n.terminal = *idx;
      n.span = TerminalSet::single(*idx);
      tree_.nodes.push_back(n);
      return {tree_.size() - 1, terminal_entity(scene_, *idx, g_)};
    }
    std::vector<Built> kids;
    for (const auto& c : t.children) kids.push_back(build(c));
    auto lhs = g_.find(t.label);
    if (!lhs) throw NotDerivableError("node '" + t.label + "': symbol not in grammar");
    std::vector<SymbolId> rhs;
    for (const auto& k : kids) rhs.push_back(tree_.nodes[k.node].symbol);
    auto rule = g_.find_rule(*lhs, rhs);
    if (!rule) throw NotDerivableError("node '" + t.label + "': no matching rule");
    // Order children as the rule lists them.
    const Rule& r = g_.rule(*rule);
    if (r.rhs.size() == 2 && rhs[0] != r.rhs[0]) std::swap(kids[0], kids[1]);

    std::vector<const Entity*> ents;
    for (const auto& k : kids) ents.push_back(&k.entity);
    Entity e = combine_entities(g_, *lhs, ents);
    const std::vector<Part> parts = application_parts(ents);
    const int unspanned = scene_.size() - e.span.size();
    const RuleCost rc = rule_cost(tg_.model(*rule), {parts, &e.stats, unspanned}, scene_);

    ParseNode n;
    n.symbol = *lhs;
    n.rule = *rule;
    n.span = e.span;
    n.rule_cost = rc.cost;
    n.cost = rc.cost;
    n.clamped = rc.clamped;
    for (const auto& k : kids) {
      n.children.push_back(k.node);
      n.cost += tree_.nodes[k.node].cost;
      n.clamped = n.clamped || tree_.nodes[k.node].clamped;
    }
    tree_.nodes.push_back(std::move(n));
    return {tree_.size() - 1, std::move(e)};
  }

  const Scene& scene_;
  const TrainedGrammar& tg_;
  const Grammar& g_;
  ParseTree tree_;
};

}  // namespace

ParseTree parse_tree_from_ground_truth(const GroundTruthTree& rederived, const Scene& scene, const TrainedGrammar& tg) {
  return GroundTruthConverter(scene, tg).run(rederived);
}

double tree_cost(const ParseTree& tree, const Scene& scene, const TrainedGrammar& tg) {
  if (tree.empty()) return 0.0;
  const Grammar& g = tg.grammar();
  std::vector<Entity> ents(tree.nodes.size());
  double total = 0.0;
  auto visit = [&](int id, auto&& self) -> void {
    const ParseNode& n = tree.nodes[id];
    if (n.terminal >= 0) {
      ents[id] = terminal_entity(scene, n.terminal, g);
      return;
    }
    std::vector<const Entity*> kids;
    for (int c : n.children) {
      self(c, self);
      kids.push_back(&ents[c]);
    }
    if (n.rule < 0) throw ValidationError("tree_cost: internal node without a rule");
    ents[id] = combine_entities(g, n.symbol, kids);
    const std::vector<Part> parts = application_parts(kids);
    const int unspanned = scene.size() - ents[id].span.size();
    total += rule_cost(tg.model(n.rule), {parts, &ents[id].stats, unspanned}, scene).cost;
  };
  visit(tree.root, visit);
  return total;
}

bool is_connected(const TerminalSet& span, const Scene& scene) {
  if (span.empty()) return false;
  const auto idx = span.indices();
  TerminalSet reached = TerminalSet::single(idx.front());
  TerminalSet frontier = reached;
  while (!frontier.empty()) {
    TerminalSet next = scene.neighborhood(frontier) & span;
    TerminalSet fresh;
    next.for_each([&](int i) {
      if (!reached.contains(i)) fresh.insert(i);
    });
    reached |= fresh;
    frontier = fresh;
  }
  return reached == span;
}

bool spans_well_formed(const ParseTree& tree, const Scene& scene) {
  for (const auto& n : tree.nodes) {
    if (!is_connected(n.span, scene)) return false;
    if (n.terminal >= 0) {
      if (!(n.span == TerminalSet::single(n.terminal))) return false;
      continue;
    }
    TerminalSet u;
    int total = 0;
    for (int c : n.children) {
      if (u.intersects(tree.nodes[c].span)) return false;
      u |= tree.nodes[c].span;
      total += tree.nodes[c].span.size();
    }
    if (!(u == n.span) || total != n.span.size()) return false;
  }
  return true;
}

}  // namespace scenegram
