#include "scenegram/grammar_io.hpp"

#include <cmath>

#include "scenegram/errors.hpp"

namespace scenegram {

using nlohmann::json;

namespace {

json model_to_json(const RuleModel& m) {
  return std::visit(
      [&](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, GoalModel>) {
          return {{"type", "goal"}, {"k", v.k}, {"prior", m.prior}, {"count", m.count}};
        } else if constexpr (std::is_same_v<T, PlaneFitModel>) {
          return {{"type", "planefit"}, {"prior", m.prior}, {"count", m.count}};
        } else {
          const auto& p = v.density->params();
          json mu = json::array();
          for (Eigen::Index i = 0; i < p.mu.size(); ++i) mu.push_back(p.mu[i]);
          json sigma = json::array();
          for (Eigen::Index r = 0; r < p.sigma.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index c = 0; c < p.sigma.cols(); ++c) row.push_back(p.sigma(r, c));
            sigma.push_back(row);
          }
          return {{"type", "gaussian"}, {"mu", mu},         {"sigma", sigma},
                  {"reg_epsilon", p.reg_epsilon}, {"prior", m.prior}, {"count", m.count}};
        }
      },
      m.variant);
}

double number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_number()) throw ValidationError(where + ": missing numeric '" + key + "'");
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) throw ValidationError(where + ": non-finite '" + key + "'");
  return v;
}

RuleModel model_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    throw ValidationError(where + ": model needs a string 'type'");
  }
  const std::string type = j.at("type").get<std::string>();
  RuleModel m;
  m.prior = j.contains("prior") ? number(j, "prior", where) : 1.0;
  m.count = j.contains("count") ? j.at("count").get<std::int64_t>() : 0;
  if (type == "goal") {
    m.variant = GoalModel{j.contains("k") ? number(j, "k", where) : kDefaultGoalPenalty};
  } else if (type == "planefit") {
    m.variant = PlaneFitModel{};
  } else if (type == "gaussian") {
    GaussianParams p;
    if (!j.contains("mu") || !j.at("mu").is_array()) throw ValidationError(where + ": gaussian needs 'mu'");
    const json& mu = j.at("mu");
    const auto d = static_cast<Eigen::Index>(mu.size());
    p.mu.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) p.mu[i] = mu[i].get<double>();
    if (!j.contains("sigma") || !j.at("sigma").is_array() || j.at("sigma").size() != mu.size()) {
      throw ValidationError(where + ": gaussian 'sigma' must be " + std::to_string(d) + "x" + std::to_string(d));
    }
    p.sigma.resize(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
      const json& row = j.at("sigma")[r];
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != d) {
        throw ValidationError(where + ": gaussian 'sigma' row " + std::to_string(r) + " has wrong length");
      }
      for (Eigen::Index c = 0; c < d; ++c) p.sigma(r, c) = row[c].get<double>();
    }
    if (j.contains("reg_epsilon")) p.reg_epsilon = number(j, "reg_epsilon", where);
    try {
      m.variant = GaussianModel{std::make_shared<const GaussianDensity>(std::move(p))};
    } catch (const std::domain_error& e) {
      throw ValidationError(where + ": " + e.what());
    }
  } else {
    throw ValidationError(where + ": unknown model type '" + type + "'");
  }
  return m;
}

}  // namespace

json grammar_to_json(const Grammar& grammar, const std::vector<RuleModel>* models, const std::string& schema_id) {
  json symbols = json::array();
  for (SymbolId s = 0; s < grammar.symbol_count(); ++s) {
    symbols.push_back({{"name", grammar.name(s)}, {"kind", std::string(to_string(grammar.symbol(s).kind))}});
  }
  json rules = json::array();
  for (RuleId r = 0; r < grammar.rule_count(); ++r) {
    const RuleSpec spec = grammar.spec(r);
    json jr = {{"lhs", spec.lhs}, {"rhs", spec.rhs}, {"kind", std::string(to_string(spec.kind))}};
    if (models) jr["model"] = model_to_json(models->at(r));
    rules.push_back(std::move(jr));
  }
  return {{"schema_id", schema_id}, {"start", std::string(kStartSymbol)}, {"symbols", symbols}, {"rules", rules}};
}

json trained_to_json(const TrainedGrammar& tg) { return grammar_to_json(tg.grammar(), &tg.models(), tg.schema_id()); }

GrammarFile grammar_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("grammar: expected a JSON object");
  GrammarFile out;
  if (j.contains("schema_id")) out.schema_id = j.at("schema_id").get<std::string>();
  if (j.contains("start") && j.at("start").get<std::string>() != kStartSymbol) {
    throw ValidationError("grammar: start symbol must be 'S'");
  }
  if (j.contains("goal_k")) out.goal_k = number(j, "goal_k", "grammar");
  if (j.contains("symbols")) {
    for (const auto& s : j.at("symbols")) {
      if (!s.contains("name") || !s.contains("kind")) throw ValidationError("symbols: entries need 'name' and 'kind'");
      out.grammar.add_symbol(s.at("name").get<std::string>(), symbol_kind_from_string(s.at("kind").get<std::string>()));
    }
  }
  if (!j.contains("rules") || !j.at("rules").is_array()) throw ValidationError("grammar: missing field 'rules'");
  std::vector<RuleModel> models;
  bool any_model = false, all_models = true;
  std::size_t k = 0;
  for (const auto& jr : j.at("rules")) {
    const std::string where = "rules[" + std::to_string(k++) + "]";
    if (!jr.contains("lhs") || !jr.contains("rhs")) throw ValidationError(where + ": needs 'lhs' and 'rhs'");
    RuleSpec spec;
    spec.lhs = jr.at("lhs").get<std::string>();
    spec.rhs = jr.at("rhs").get<std::vector<std::string>>();
    spec.kind = jr.contains("kind") ? rule_kind_from_string(jr.at("kind").get<std::string>())
                                    : classify_rule(spec.lhs, spec.rhs);
    const int before = out.grammar.rule_count();
    const RuleId id = out.grammar.add_rule(spec);
    if (id != before) throw ValidationError(where + ": duplicate rule '" + spec.key() + "'");
    if (jr.contains("model") && !jr.at("model").is_null()) {
      models.push_back(model_from_json(jr.at("model"), where));
      any_model = true;
    } else {
      all_models = false;
      models.emplace_back();
    }
  }
  if (any_model && !all_models) throw ValidationError("grammar: either every rule or no rule carries a model");
  if (any_model) out.models = std::move(models);
  return out;
}

TrainedGrammar trained_from_json(const json& j) {
  GrammarFile f = grammar_from_json(j);
  if (!f.models) throw ValidationError("grammar: untrained (no rule models)");
  return TrainedGrammar(std::move(f.grammar), std::move(*f.models), f.schema_id);
}

GrammarFile load_grammar(const std::filesystem::path& path) { return grammar_from_json(load_json(path)); }

TrainedGrammar load_trained(const std::filesystem::path& path) { return trained_from_json(load_json(path)); }

}  // namespace scenegram
