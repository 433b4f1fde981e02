#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "scenegram/parse_tree.hpp"
#include "scenegram/prob_model.hpp"
#include "scenegram/scene.hpp"

namespace scenegram {

/// A non-intermediate constituent of an intermediate statement.
struct PartSignature {
  SymbolId symbol = 0;
  TerminalSet span;

  bool operator==(const PartSignature&) const = default;
  bool operator<(const PartSignature& o) const { return symbol != o.symbol ? symbol < o.symbol : span < o.span; }
};

/// Identity of a derived entity. Two statements with equal keys have the same
/// geometry and the same features when used as a child, so only the cheaper
/// one matters. Intermediates also carry their part decomposition.
struct EntityKey {
  SymbolId symbol = 0;
  TerminalSet span;
  std::vector<PartSignature> parts;

  bool operator==(const EntityKey&) const = default;
};

struct EntityKeyHash {
  std::size_t operator()(const EntityKey& k) const;
};

struct Statement {
  SymbolId symbol = 0;
  Entity entity;
  /// Leaf-part decomposition; empty unless the symbol is an intermediate.
  std::vector<PartSignature> signature;
  /// Terminals adjacent to some terminal of the span.
  TerminalSet frontier;
  double cost = 0.0;
  double rule_cost = 0.0;
  bool clamped = false;
  RuleId rule = -1;
  int terminal = -1;
  std::array<int, 2> children{-1, -1};
  int arity = 0;

  const TerminalSet& span() const { return entity.span; }
  EntityKey key() const { return {symbol, entity.span, signature}; }
};

/// Arena of statements for one parse.
class StatementPool {
 public:
  StatementPool(const Scene& scene, const TrainedGrammar& tg);

  const Scene& scene() const { return *scene_; }
  const TrainedGrammar& trained() const { return *tg_; }
  const Grammar& grammar() const { return tg_->grammar(); }

  int add_terminal(int index);
  /// Applies `rule` to `children` given in the rule's right-hand-side order.
  /// Does not check applicability.
  Statement make(RuleId rule, std::span<const int> children) const;
  int add(Statement s);

  const Statement& operator[](int id) const { return statements_[id]; }
  int size() const { return static_cast<int>(statements_.size()); }

  /// The derivation below `root` as a ParseTree.
  ParseTree to_tree(int root) const;

 private:
  const Scene* scene_;
  const TrainedGrammar* tg_;
  std::vector<Statement> statements_;
};

/// Spans pairwise disjoint, symbols matching the rule's right-hand side as a
/// multiset, and for binary rules at least one edge between the two spans.
bool applicable(const Rule& rule, std::span<const Statement* const> items, const Scene& scene);

enum class Algorithm { Kld, Beam, Exhaustive };
std::string_view to_string(Algorithm a);

struct SearchStats {
  std::int64_t expansions = 0;
  std::int64_t queue_peak = 0;
  std::int64_t statements = 0;
  double seconds = 0.0;
};

struct ParseResult {
  /// Rooted at S; empty when no goal derivation was found.
  ParseTree tree;
  double cost = 0.0;
  int unspanned = 0;
  Algorithm algorithm = Algorithm::Kld;
  bool clamped = false;
  SearchStats stats;
};

struct KldBudget {
  std::int64_t max_expansions = 2'000'000;
  double max_seconds = 30.0;
};

struct KldOptions {
  KldBudget budget;
  /// Keep the statement arena and derivation order in the outcome.
  bool keep_statements = false;
};

struct KldOutcome {
  std::optional<ParseResult> result;
  bool budget_exhausted = false;
  /// When no goal was derived: disjoint derived statements, largest first.
  std::vector<ParseTree> partial_forest;
  SearchStats stats;
  std::shared_ptr<const StatementPool> pool;
  /// Statement ids in the order they were derived (popped first time).
  std::vector<int> derived;
};

/// Lightest-derivation search. The first goal statement popped is a
/// minimum-cost derivation under the clamped costs.
KldOutcome parse_kld(const Scene& scene, const TrainedGrammar& tg, const KldOptions& options = {});

struct BeamConfig {
  /// Forests kept per step; SIZE_MAX for unbounded.
  std::size_t beam_width = 200;
  /// Successors sampled per forest per step.
  std::size_t samples_per_state = 4;
  std::uint64_t seed = 0;
  int max_steps = 10'000;
};

inline constexpr std::size_t kUnboundedBeam = std::numeric_limits<std::size_t>::max();

/// Stochastic beam search over forests. Always returns; with no goal
/// reachable the tree is empty and every terminal counts as unspanned.
ParseResult parse_beam(const Scene& scene, const TrainedGrammar& tg, const BeamConfig& config = {});

inline constexpr int kExhaustiveMaxTerminals = 10;

/// Exact minimum over all derivations by dynamic programming over connected
/// terminal subsets. Throws ValidationError above kExhaustiveMaxTerminals.
ParseResult parse_exhaustive(const Scene& scene, const TrainedGrammar& tg);

enum class ParseAlgorithm { Auto, Kld, Beam, Exhaustive };

struct ParseRequest {
  /// Auto runs KLD and falls back to beam search when the budget trips or no
  /// goal is derivable.
  ParseAlgorithm algorithm = ParseAlgorithm::Auto;
  KldBudget budget;
  BeamConfig beam;
};

struct ParseOutcome {
  ParseResult result;
  /// KLD ran out of budget (with Auto the result then comes from beam search).
  bool budget_exhausted = false;
  /// A goal derivation was found.
  bool has_goal = false;
};

ParseOutcome parse_scene(const Scene& scene, const TrainedGrammar& tg, const ParseRequest& request = {});

/// Number of non-empty terminal subsets inducing a connected subgraph.
std::int64_t count_connected_subsets(const Scene& scene);

}  // namespace scenegram
