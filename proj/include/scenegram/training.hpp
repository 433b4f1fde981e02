#pragma once

#include <span>

#include "scenegram/grammar.hpp"
#include "scenegram/prob_model.hpp"
#include "scenegram/scene.hpp"

namespace scenegram {

struct TrainOptions {
  double goal_k = kDefaultGoalPenalty;
  double reg_epsilon = kCovarianceRegularizer;
};

/// Per-rule training data gathered in one pass over the forest.
struct RuleSamples {
  std::vector<std::int64_t> counts;
  std::vector<std::vector<FeatureVector>> features;
};

/// Walks every tree (after rederive) once, recording for each applied rule
/// its count and, for Gaussian rules, the feature vector of the application.
RuleSamples collect_rule_samples(std::span<const GroundTruthTree> trees, std::span<const Scene> scenes,
                                 const Grammar& grammar);

/// Fits one model per rule: Gaussians from all application sites, plane-fit
/// and goal rules prior-only, priors by lhs frequency. Rules never applied in
/// the forest are dropped (a Gaussian needs samples), goal rules excepted. trees[i] is labeled
/// over scenes[i]. Throws NotDerivableError naming the first tree node the
/// grammar cannot produce.
TrainedGrammar train(std::span<const GroundTruthTree> trees, std::span<const Scene> scenes, const Grammar& grammar,
                     const TrainOptions& options = {});

}  // namespace scenegram
