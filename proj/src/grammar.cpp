#include "scenegram/grammar.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <sstream>

#include "scenegram/errors.hpp"

namespace scenegram {

std::string_view to_string(SymbolKind k) {
  switch (k) {
    case SymbolKind::Terminal: return "terminal";
    case SymbolKind::Nonterminal: return "nonterminal";
    case SymbolKind::Intermediate: return "intermediate";
    case SymbolKind::Start: return "start";
  }
  return "nonterminal";
}

std::string_view to_string(RuleKind k) {
  switch (k) {
    case RuleKind::Segmentation: return "segmentation";
    case RuleKind::ObjectFormation: return "object-formation";
    case RuleKind::ObjectGrouping: return "object-grouping";
    case RuleKind::Goal: return "goal";
  }
  return "object-formation";
}

SymbolKind symbol_kind_from_string(std::string_view s) {
  if (s == "terminal") return SymbolKind::Terminal;
  if (s == "nonterminal") return SymbolKind::Nonterminal;
  if (s == "intermediate") return SymbolKind::Intermediate;
  if (s == "start") return SymbolKind::Start;
  throw ValidationError("unknown symbol kind '" + std::string(s) + "'");
}

RuleKind rule_kind_from_string(std::string_view s) {
  if (s == "segmentation") return RuleKind::Segmentation;
  if (s == "object-formation") return RuleKind::ObjectFormation;
  if (s == "object-grouping") return RuleKind::ObjectGrouping;
  if (s == "goal") return RuleKind::Goal;
  throw ValidationError("unknown rule kind '" + std::string(s) + "'");
}

std::string RuleSpec::key() const {
  std::vector<std::string> sorted = rhs;
  std::sort(sorted.begin(), sorted.end());
  std::string k = lhs + " ->";
  for (const auto& s : sorted) k += " " + s;
  return k;
}

RuleKind classify_rule(std::string_view lhs, std::span<const std::string> rhs) {
  if (lhs == kStartSymbol) return RuleKind::Goal;
  if (lhs.ends_with("Complex")) return RuleKind::ObjectGrouping;
  for (const auto& s : rhs) {
    if (s == kTerminalSymbol || s == kPlaneSymbol) return RuleKind::Segmentation;
  }
  return RuleKind::ObjectFormation;
}

std::vector<RuleSpec> extract_rules(std::span<const GroundTruthTree> trees) {
  std::vector<RuleSpec> out;
  std::set<std::string> seen;
  auto walk = [&](const GroundTruthTree& t, auto&& self) -> void {
    if (t.is_leaf()) return;
    RuleSpec r;
    r.lhs = t.label;
    for (const auto& c : t.children) r.rhs.push_back(c.is_leaf() ? std::string(kTerminalSymbol) : c.label);
    r.kind = classify_rule(r.lhs, r.rhs);
    if (seen.insert(r.key()).second) out.push_back(std::move(r));
    for (const auto& c : t.children) self(c, self);
  };
  for (const auto& t : trees) walk(t, walk);
  return out;
}

RuleSet binarize(std::span<const RuleSpec> rules) {
  RuleSet out;
  std::set<std::string> seen;
  auto emit = [&](RuleSpec r) {
    if (seen.insert(r.key()).second) out.rules.push_back(std::move(r));
  };
  for (const auto& r : rules) {
    const std::size_t n = r.rhs.size();
    if (n <= 2) {
      emit(r);
      continue;
    }
    std::string prev = r.rhs[0] + "_" + r.rhs[1];
    out.intermediates.insert(prev);
    emit({prev, {r.rhs[0], r.rhs[1]}, r.kind});
    for (std::size_t k = 2; k + 1 < n; ++k) {
      std::string next = prev + "_" + r.rhs[k];
      out.intermediates.insert(next);
      emit({next, {prev, r.rhs[k]}, r.kind});
      prev = std::move(next);
    }
    emit({r.lhs, {prev, r.rhs[n - 1]}, r.kind});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grammar

Grammar::Grammar() {
  add_symbol(kTerminalSymbol, SymbolKind::Terminal);
  add_symbol(kStartSymbol, SymbolKind::Start);
}

Grammar Grammar::from_rules(const RuleSet& rules) {
  Grammar g;
  for (const auto& r : rules.rules) g.add_rule(r, rules.intermediates);
  return g;
}

SymbolId Grammar::add_symbol(std::string_view name, SymbolKind kind) {
  if (auto it = by_name_.find(std::string(name)); it != by_name_.end()) {
    Symbol& s = symbols_[it->second];
    if (kind == SymbolKind::Intermediate && s.kind == SymbolKind::Nonterminal) s.kind = kind;
    return it->second;
  }
  if (name.empty()) throw ValidationError("symbol with empty name");
  const SymbolId id = static_cast<SymbolId>(symbols_.size());
  symbols_.push_back({std::string(name), kind});
  by_name_.emplace(std::string(name), id);
  by_lhs_.emplace_back();
  by_rhs_.emplace_back();
  return id;
}

std::optional<SymbolId> Grammar::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

SymbolId Grammar::id(std::string_view name) const {
  auto s = find(name);
  if (!s) throw ValidationError("unknown symbol '" + std::string(name) + "'");
  return *s;
}

std::string Grammar::rule_key(SymbolId lhs, std::vector<SymbolId> rhs) {
  std::sort(rhs.begin(), rhs.end());
  std::string k = std::to_string(lhs) + ":";
  for (auto s : rhs) k += std::to_string(s) + ",";
  return k;
}

RuleId Grammar::add_rule(SymbolId lhs, std::vector<SymbolId> rhs, RuleKind kind) {
  if (rhs.empty() || rhs.size() > 2) {
    throw ValidationError("rule for '" + name(lhs) + "' must have 1 or 2 right-hand symbols");
  }
  if ((kind == RuleKind::Goal) != (lhs == start())) {
    throw ValidationError("goal rules must have lhs S and only they may");
  }
  if (lhs == terminal()) throw ValidationError("terminal symbol cannot be a rule lhs");
  const std::string key = rule_key(lhs, rhs);
  if (auto it = rule_index_.find(key); it != rule_index_.end()) return it->second;
  const RuleId id = static_cast<RuleId>(rules_.size());
  rules_.push_back({lhs, rhs, kind});
  rule_index_.emplace(key, id);
  by_lhs_[lhs].push_back(id);
  by_rhs_[rhs[0]].push_back(id);
  if (rhs.size() == 2 && rhs[1] != rhs[0]) by_rhs_[rhs[1]].push_back(id);
  return id;
}

RuleId Grammar::add_rule(const RuleSpec& spec, const std::set<std::string>& intermediates) {
  auto kind_of = [&](const std::string& n) {
    if (n == kTerminalSymbol) return SymbolKind::Terminal;
    if (n == kStartSymbol) return SymbolKind::Start;
    return intermediates.count(n) ? SymbolKind::Intermediate : SymbolKind::Nonterminal;
  };
  const SymbolId lhs = add_symbol(spec.lhs, kind_of(spec.lhs));
  std::vector<SymbolId> rhs;
  for (const auto& s : spec.rhs) rhs.push_back(add_symbol(s, kind_of(s)));
  return add_rule(lhs, std::move(rhs), spec.kind);
}

std::optional<RuleId> Grammar::find_rule(SymbolId lhs, std::vector<SymbolId> rhs) const {
  auto it = rule_index_.find(rule_key(lhs, std::move(rhs)));
  if (it == rule_index_.end()) return std::nullopt;
  return it->second;
}

RuleSpec Grammar::spec(RuleId id) const {
  const Rule& r = rule(id);
  RuleSpec s;
  s.lhs = name(r.lhs);
  for (auto c : r.rhs) s.rhs.push_back(name(c));
  s.kind = r.kind;
  return s;
}

std::vector<SymbolId> Grammar::leaf_parts(SymbolId s) const {
  std::vector<SymbolId> out;
  std::vector<char> on_stack(symbols_.size(), 0);
  auto expand = [&](SymbolId sym, auto&& self) -> void {
    if (!is_intermediate(sym)) {
      out.push_back(sym);
      return;
    }
    if (on_stack[sym]) throw ValidationError("cyclic intermediate definition at '" + name(sym) + "'");
    const auto& defs = by_lhs_.at(sym);
    if (defs.empty()) throw ValidationError("intermediate '" + name(sym) + "' has no defining rule");
    on_stack[sym] = 1;
    for (auto c : rules_[defs.front()].rhs) self(c, self);
    on_stack[sym] = 0;
  };
  expand(s, expand);
  std::sort(out.begin(), out.end(), [&](SymbolId a, SymbolId b) {
    return std::tie(name(a), a) < std::tie(name(b), b);
  });
  return out;
}

std::vector<RuleSpec> Grammar::flatten() const {
  std::vector<RuleSpec> out;
  std::set<std::string> seen;
  for (RuleId r = 0; r < rule_count(); ++r) {
    const Rule& rule = rules_[r];
    if (is_intermediate(rule.lhs)) continue;
    RuleSpec s;
    s.lhs = name(rule.lhs);
    s.kind = rule.kind;
    for (auto c : rule.rhs) {
      for (auto p : leaf_parts(c)) s.rhs.push_back(name(p));
    }
    if (seen.insert(s.key()).second) out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> Grammar::unused_symbols() const {
  std::vector<char> used(symbols_.size(), 0);
  for (const auto& r : rules_)
    for (auto c : r.rhs) used[c] = 1;
  std::vector<std::string> out;
  for (SymbolId s = 0; s < symbol_count(); ++s) {
    if (s == start() || s == terminal()) continue;
    if (!used[s]) out.push_back(name(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Re-derivation of flat trees

namespace {

class Rederiver {
 public:
  explicit Rederiver(const Grammar& g) : g_(g) {}

  GroundTruthTree node(const GroundTruthTree& t) {
    if (t.is_leaf()) return t;
    if (t.children.size() > 16) {
      throw NotDerivableError("node '" + t.label + "' has more than 16 children");
    }
    auto sym = g_.find(t.label);
    if (!sym) throw NotDerivableError("node '" + t.label + "': symbol not in grammar");

    std::vector<GroundTruthTree> kids;
    kids.reserve(t.children.size());
    for (const auto& c : t.children) kids.push_back(node(c));

    Frame frame{&kids, {}};
    const std::uint32_t full = (std::uint32_t{1} << kids.size()) - 1;
    auto result = derive(frame, *sym, full, 0);
    if (!result) {
      std::string msg = "node '" + t.label + "' with children {";
      for (std::size_t i = 0; i < kids.size(); ++i) msg += (i ? ", " : "") + kids[i].label;
      throw NotDerivableError(msg + "} is not derivable in the grammar");
    }
    return std::move(*result);
  }

 private:
  struct Frame {
    const std::vector<GroundTruthTree>* kids;
    std::map<std::pair<SymbolId, std::uint32_t>, std::optional<GroundTruthTree>> memo;
  };

  std::optional<GroundTruthTree> match(Frame& f, SymbolId sym, std::uint32_t mask, int depth) {
    if (std::popcount(mask) == 1) {
      const auto& kid = (*f.kids)[std::countr_zero(mask)];
      if (kid.label == g_.name(sym)) return kid;
    }
    if (g_.is_intermediate(sym)) return derive(f, sym, mask, depth + 1);
    return std::nullopt;
  }

  std::optional<GroundTruthTree> derive(Frame& f, SymbolId sym, std::uint32_t mask, int depth) {
    if (depth > 64) return std::nullopt;
    const auto key = std::make_pair(sym, mask);
    if (auto it = f.memo.find(key); it != f.memo.end()) return it->second;
    f.memo[key] = std::nullopt;  // guards unary cycles

    std::optional<GroundTruthTree> found;
    for (RuleId rid : g_.rules_with_lhs(sym)) {
      const Rule& r = g_.rule(rid);
      if (r.unary()) {
        if (auto m = match(f, r.rhs[0], mask, depth)) {
          found = GroundTruthTree::make_node(g_.name(sym), {std::move(*m)});
          break;
        }
        continue;
      }
      // Enumerate proper nonempty submasks in increasing order.
      for (std::uint32_t s = (mask - 1) & mask; s; s = (s - 1) & mask) {
        const std::uint32_t left = mask & ~s;  // increasing order of `left`
        const std::uint32_t right = mask & ~left;
        if (!left || !right) continue;
        auto a = match(f, r.rhs[0], left, depth);
        if (!a) continue;
        auto b = match(f, r.rhs[1], right, depth);
        if (!b) continue;
        found = GroundTruthTree::make_node(g_.name(sym), {std::move(*a), std::move(*b)});
        break;
      }
      if (found) break;
    }
    f.memo[key] = found;
    return found;
  }

  const Grammar& g_;
};

}  // namespace

GroundTruthTree rederive(const GroundTruthTree& tree, const Grammar& grammar) {
  validate_tree(tree);
  return Rederiver(grammar).node(tree);
}

}  // namespace scenegram
