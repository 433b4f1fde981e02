#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "scenegram/scene.hpp"

namespace scenegram {

inline constexpr std::string_view kTerminalSymbol = "segment";
inline constexpr std::string_view kStartSymbol = "S";
inline constexpr std::string_view kPlaneSymbol = "Plane";

enum class SymbolKind { Terminal, Nonterminal, Intermediate, Start };
enum class RuleKind { Segmentation, ObjectFormation, ObjectGrouping, Goal };

std::string_view to_string(SymbolKind k);
std::string_view to_string(RuleKind k);
SymbolKind symbol_kind_from_string(std::string_view s);
RuleKind rule_kind_from_string(std::string_view s);

/// A production by symbol name. The right-hand side keeps the order it was
/// first listed in, but identity is the multiset.
struct RuleSpec {
  std::string lhs;
  std::vector<std::string> rhs;
  RuleKind kind = RuleKind::ObjectFormation;

  /// lhs plus sorted rhs; equal keys denote the same rule.
  std::string key() const;
};

struct RuleSet {
  std::vector<RuleSpec> rules;
  std::set<std::string> intermediates;
};

/// Kind by naming convention: S -> goal, *Complex -> grouping, a segment or
/// Plane on the right -> segmentation, anything else -> object formation.
RuleKind classify_rule(std::string_view lhs, std::span<const std::string> rhs);

/// One rule per distinct (parent label, child-label multiset) seen in the
/// trees, in order of first appearance. Leaves contribute "segment".
std::vector<RuleSpec> extract_rules(std::span<const GroundTruthTree> trees);

/// Replaces rules with three or more right-hand symbols by a left-branching
/// chain over the listed order. Intermediate names join the covered part
/// names with '_', so equal prefixes share intermediates.
RuleSet binarize(std::span<const RuleSpec> rules);

using SymbolId = int;
using RuleId = int;

struct Symbol {
  std::string name;
  SymbolKind kind = SymbolKind::Nonterminal;
};

struct Rule {
  SymbolId lhs = 0;
  std::vector<SymbolId> rhs;
  RuleKind kind = RuleKind::ObjectFormation;

  bool unary() const { return rhs.size() == 1; }
};

/// Symbols and binarized productions. Symbol 0 is the terminal, symbol 1 the
/// start symbol.
class Grammar {
 public:
  Grammar();

  /// Builds from a binarized rule set; throws ValidationError for rules with
  /// more than two right-hand symbols.
  static Grammar from_rules(const RuleSet& rules);

  SymbolId terminal() const { return 0; }
  SymbolId start() const { return 1; }

  /// Adds a symbol or returns the existing one. An existing nonterminal is
  /// promoted when `kind` is Intermediate.
  SymbolId add_symbol(std::string_view name, SymbolKind kind);
  std::optional<SymbolId> find(std::string_view name) const;
  SymbolId id(std::string_view name) const;

  int symbol_count() const { return static_cast<int>(symbols_.size()); }
  const Symbol& symbol(SymbolId id) const { return symbols_.at(id); }
  const std::string& name(SymbolId id) const { return symbols_.at(id).name; }
  bool is_intermediate(SymbolId id) const { return symbols_.at(id).kind == SymbolKind::Intermediate; }

  /// Adds a rule unless an equal one (same lhs, same rhs multiset) exists.
  RuleId add_rule(SymbolId lhs, std::vector<SymbolId> rhs, RuleKind kind);
  RuleId add_rule(const RuleSpec& spec, const std::set<std::string>& intermediates = {});
  std::optional<RuleId> find_rule(SymbolId lhs, std::vector<SymbolId> rhs) const;

  int rule_count() const { return static_cast<int>(rules_.size()); }
  const std::vector<Rule>& rules() const { return rules_; }
  const Rule& rule(RuleId id) const { return rules_.at(id); }
  RuleSpec spec(RuleId id) const;

  const std::vector<RuleId>& rules_with_lhs(SymbolId s) const { return by_lhs_.at(s); }
  /// Rules whose right-hand side mentions `s` (each rule listed once).
  const std::vector<RuleId>& rules_with_rhs(SymbolId s) const { return by_rhs_.at(s); }

  /// Non-intermediate symbols an intermediate bottoms out into, as a
  /// multiset sorted by name; {s} for anything else. Throws ValidationError
  /// on a cyclic intermediate definition.
  std::vector<SymbolId> leaf_parts(SymbolId s) const;

  /// Rules with intermediates expanded back to their leaf parts.
  std::vector<RuleSpec> flatten() const;

  /// Nonterminals other than S that no rule uses on its right-hand side.
  std::vector<std::string> unused_symbols() const;

 private:
  static std::string rule_key(SymbolId lhs, std::vector<SymbolId> rhs);

  std::vector<Symbol> symbols_;
  std::unordered_map<std::string, SymbolId> by_name_;
  std::vector<Rule> rules_;
  std::unordered_map<std::string, RuleId> rule_index_;
  std::vector<std::vector<RuleId>> by_lhs_;
  std::vector<std::vector<RuleId>> by_rhs_;
};

/// Rewrites a flat ground-truth tree so every node is produced by a rule of
/// `grammar`, inserting intermediate nodes where the grammar splits a flat
/// production. Throws NotDerivableError naming the first offending node.
GroundTruthTree rederive(const GroundTruthTree& tree, const Grammar& grammar);

}  // namespace scenegram
