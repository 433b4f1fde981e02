#pragma once

#include <span>
#include <vector>

#include "scenegram/features.hpp"
#include "scenegram/grammar.hpp"
#include "scenegram/prob_model.hpp"
#include "scenegram/scene.hpp"

namespace scenegram {

/// What a parse node denotes geometrically: merged statistics, the spanned
/// terminals, and the non-intermediate parts used for its parent's features.
struct Entity {
  SegmentStats stats;
  TerminalSet span;
  /// A single part (the entity itself) unless its symbol is an intermediate,
  /// in which case the parts of its children.
  std::vector<Part> parts;
};

Entity terminal_entity(const Scene& scene, int index, const Grammar& grammar);

/// Entity of `symbol` formed from `children` (in rule order).
Entity combine_entities(const Grammar& grammar, SymbolId symbol, std::span<const Entity* const> children);

/// Concatenated parts of the children: the inputs of f for a rule application.
std::vector<Part> application_parts(std::span<const Entity* const> children);

struct ParseNode {
  SymbolId symbol = 0;
  RuleId rule = -1;
  /// Scene index for leaves, -1 otherwise.
  int terminal = -1;
  std::vector<int> children;
  TerminalSet span;
  /// g at this node.
  double rule_cost = 0.0;
  /// Sum of g over the subtree.
  double cost = 0.0;
  bool clamped = false;
};

/// A derivation stored as a node array; children precede their parents.
struct ParseTree {
  std::vector<ParseNode> nodes;
  int root = -1;

  bool empty() const { return root < 0; }
  int size() const { return static_cast<int>(nodes.size()); }
  const ParseNode& root_node() const { return nodes.at(root); }
};

/// Converts a ground-truth tree that is already expressed in the grammar's
/// rules (see rederive) into a ParseTree with rule ids, spans and costs.
/// Throws NotDerivableError when a node matches no rule, ValidationError for
/// unknown leaf ids.
ParseTree parse_tree_from_ground_truth(const GroundTruthTree& rederived, const Scene& scene, const TrainedGrammar& tg);

/// Sum of rule costs over all nonterminal nodes, recomputed from scratch.
/// Goal nodes pay k per scene terminal outside the tree.
double tree_cost(const ParseTree& tree, const Scene& scene, const TrainedGrammar& tg);

/// Every internal node's span is connected in the adjacency graph and its
/// children's spans partition it.
bool spans_well_formed(const ParseTree& tree, const Scene& scene);

/// True when `span` induces a connected subgraph.
bool is_connected(const TerminalSet& span, const Scene& scene);

}  // namespace scenegram
