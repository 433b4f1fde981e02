#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "scenegram/grammar.hpp"
#include "scenegram/prob_model.hpp"

namespace scenegram {

/// Contents of a grammar file. Skeleton grammars (from extract-rules or the
/// bundled appendix grammar) carry no models.
struct GrammarFile {
  Grammar grammar;
  std::optional<std::vector<RuleModel>> models;
  std::string schema_id = std::string(kFeatureSchemaId);
  double goal_k = kDefaultGoalPenalty;
};

nlohmann::json grammar_to_json(const Grammar& grammar, const std::vector<RuleModel>* models,
                               const std::string& schema_id = std::string(kFeatureSchemaId));
nlohmann::json trained_to_json(const TrainedGrammar& tg);

GrammarFile grammar_from_json(const nlohmann::json& j);
/// Throws ValidationError unless every rule carries a model.
TrainedGrammar trained_from_json(const nlohmann::json& j);

GrammarFile load_grammar(const std::filesystem::path& path);
TrainedGrammar load_trained(const std::filesystem::path& path);

}  // namespace scenegram
