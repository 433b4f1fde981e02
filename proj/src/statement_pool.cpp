#include <algorithm>

#include "scenegram/inference.hpp"

namespace scenegram {

std::size_t EntityKeyHash::operator()(const EntityKey& k) const {
  std::size_t h = k.span.hash() ^ (static_cast<std::size_t>(k.symbol) * 0x9e3779b97f4a7c15ull);
  for (const auto& p : k.parts) {
    h ^= p.span.hash() + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h ^= static_cast<std::size_t>(p.symbol) + (h << 6) + (h >> 2);
  }
  return h;
}

StatementPool::StatementPool(const Scene& scene, const TrainedGrammar& tg) : scene_(&scene), tg_(&tg) {}

int StatementPool::add_terminal(int index) {
  Statement s;
  s.symbol = grammar().terminal();
  s.entity = terminal_entity(*scene_, index, grammar());
  s.frontier = scene_->neighbors(index);
  s.terminal = index;
  return add(std::move(s));
}

Statement StatementPool::make(RuleId rule, std::span<const int> children) const {
  const Grammar& g = grammar();
  const Rule& r = g.rule(rule);
  Statement s;
  s.symbol = r.lhs;
  s.rule = rule;
  s.arity = static_cast<int>(children.size());

  std::array<const Entity*, 2> ents{};
  for (int i = 0; i < s.arity; ++i) {
    const Statement& c = statements_[children[i]];
    s.children[i] = children[i];
    ents[i] = &c.entity;
    s.cost += c.cost;
    s.clamped = s.clamped || c.clamped;
    if (i == 0) {
      s.frontier = c.frontier;
    } else {
      s.frontier |= c.frontier;
    }
    if (g.is_intermediate(r.lhs)) {
      if (g.is_intermediate(c.symbol)) {
        s.signature.insert(s.signature.end(), c.signature.begin(), c.signature.end());
      } else {
        s.signature.push_back({c.symbol, c.span()});
      }
    }
  }
  std::sort(s.signature.begin(), s.signature.end());

  const std::span<const Entity* const> kids(ents.data(), s.arity);
  s.entity = combine_entities(g, r.lhs, kids);
  const std::vector<Part> parts = application_parts(kids);
  const int unspanned = scene_->size() - s.entity.span.size();
  const RuleCost rc = rule_cost(tg_->model(rule), {parts, &s.entity.stats, unspanned}, *scene_);
  s.rule_cost = rc.cost;
  s.cost += rc.cost;
  s.clamped = s.clamped || rc.clamped;
  return s;
}

int StatementPool::add(Statement s) {
  statements_.push_back(std::move(s));
  return size() - 1;
}

ParseTree StatementPool::to_tree(int root) const {
  ParseTree tree;
  auto emit = [&](int id, auto&& self) -> int {
    const Statement& s = statements_[id];
    ParseNode n;
    n.symbol = s.symbol;
    n.rule = s.rule;
    n.terminal = s.terminal;
    n.span = s.span();
    n.rule_cost = s.rule_cost;
    n.cost = s.cost;
    n.clamped = s.clamped;
    for (int i = 0; i < s.arity; ++i) n.children.push_back(self(s.children[i], self));
    tree.nodes.push_back(std::move(n));
    return tree.size() - 1;
  };
  tree.root = emit(root, emit);
  return tree;
}

bool applicable(const Rule& rule, std::span<const Statement* const> items, const Scene& scene) {
  if (items.size() != rule.rhs.size()) return false;
  if (items.size() == 1) return items[0]->symbol == rule.rhs[0];
  const Statement& a = *items[0];
  const Statement& b = *items[1];
  const bool symbols = (a.symbol == rule.rhs[0] && b.symbol == rule.rhs[1]) ||
                       (a.symbol == rule.rhs[1] && b.symbol == rule.rhs[0]);
  if (!symbols || a.span().intersects(b.span())) return false;
  // The stored frontier saves recomputing the neighborhood; fall back when unset.
  const TerminalSet& fa = a.frontier.empty() ? scene.neighborhood(a.span()) : a.frontier;
  return fa.intersects(b.span());
}

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Kld:
      return "kld";
    case Algorithm::Beam:
      return "beam";
    case Algorithm::Exhaustive:
      return "exhaustive";
  }
  return "?";
}

}  // namespace scenegram
