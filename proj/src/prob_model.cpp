#include "scenegram/prob_model.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "scenegram/errors.hpp"

namespace scenegram {

GaussianParams fit_gaussian(std::span<const FeatureVector> samples) {
  if (samples.empty()) throw std::invalid_argument("fit_gaussian: no samples");
  const Eigen::Index d = samples.front().size();
  for (const auto& s : samples) {
    if (s.size() != d) throw std::invalid_argument("fit_gaussian: dimension mismatch");
  }
  const double n = static_cast<double>(samples.size());
  GaussianParams p;
  p.mu = Eigen::VectorXd::Zero(d);
  for (const auto& s : samples) p.mu += s;
  p.mu /= n;
  if (samples.size() == 1) {
    p.sigma = Eigen::MatrixXd::Identity(d, d);
    return p;
  }
  p.sigma = Eigen::MatrixXd::Zero(d, d);
  for (const auto& s : samples) {
    const Eigen::VectorXd c = s - p.mu;
    p.sigma.noalias() += c * c.transpose();
  }
  p.sigma /= n;
  return p;
}

GaussianDensity::GaussianDensity(GaussianParams params) : params_(std::move(params)) {
  const Eigen::Index d = params_.mu.size();
  if (params_.sigma.rows() != d || params_.sigma.cols() != d) {
    throw ValidationError("gaussian: sigma shape does not match mu");
  }
  Eigen::MatrixXd reg = params_.sigma;
  reg.diagonal().array() += params_.reg_epsilon;
  llt_.compute(reg);
  if (llt_.info() != Eigen::Success) throw std::domain_error("gaussian: covariance not positive definite");
  const double log_det = 2.0 * llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
  log_normalizer_ = 0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + log_det);
}

double GaussianDensity::neg_log_density(const FeatureVector& x) const {
  if (x.size() != params_.mu.size()) {
    throw std::invalid_argument("gaussian: feature length " + std::to_string(x.size()) + " != model dimension " +
                                std::to_string(params_.mu.size()));
  }
  const Eigen::VectorXd z = llt_.matrixL().solve(x - params_.mu);
  return 0.5 * z.squaredNorm() + log_normalizer_;
}

ModelType model_type_for(const Grammar& grammar, const Rule& rule) {
  if (rule.kind == RuleKind::Goal) return ModelType::Goal;
  if (grammar.name(rule.lhs) == kPlaneSymbol) return ModelType::PlaneFit;
  return ModelType::Gaussian;
}

std::vector<double> fit_priors(const Grammar& grammar, std::span<const std::int64_t> counts) {
  if (static_cast<int>(counts.size()) != grammar.rule_count()) {
    throw std::invalid_argument("fit_priors: one count per rule required");
  }
  std::vector<double> priors(counts.size(), 0.0);
  for (SymbolId lhs = 0; lhs < grammar.symbol_count(); ++lhs) {
    const auto& family = grammar.rules_with_lhs(lhs);
    if (family.empty()) continue;
    double total = 0.0;
    for (RuleId r : family) {
      priors[r] = counts[r] > 0 ? static_cast<double>(counts[r]) : kUnseenPriorFloor;
      total += priors[r];
    }
    for (RuleId r : family) priors[r] /= total;
  }
  return priors;
}

double gaussian_cost_unclamped(const GaussianDensity& density, double prior, const FeatureVector& f) {
  return -std::log(prior) + density.neg_log_density(f);
}

RuleCost rule_cost(const RuleModel& model, const RuleApplication& app, const Scene& scene) {
  return std::visit(
      [&](const auto& m) -> RuleCost {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, GoalModel>) {
          return {m.k * static_cast<double>(app.unspanned), false};
        } else if constexpr (std::is_same_v<T, PlaneFitModel>) {
          double d = 0.0;
          if (app.merged && app.merged->point_count >= 3) d = plane_fit(*app.merged).residual;
          return {-std::log(model.prior) + d, false};
        } else {
          const FeatureVector f = rule_features(app.parts, scene);
          const double c = gaussian_cost_unclamped(*m.density, model.prior, f);
          if (!std::isfinite(c)) throw std::domain_error("rule cost is not finite");
          if (c < 0.0) return {0.0, true};
          return {c, false};
        }
      },
      model.variant);
}

// ---------------------------------------------------------------------------

TrainedGrammar::TrainedGrammar(Grammar grammar, std::vector<RuleModel> models, std::string schema_id)
    : grammar_(std::move(grammar)), models_(std::move(models)), schema_id_(std::move(schema_id)) {
  if (static_cast<int>(models_.size()) != grammar_.rule_count()) {
    throw ValidationError("trained grammar: expected one model per rule");
  }
  if (schema_id_ != kFeatureSchemaId) {
    throw ValidationError("trained grammar: schema_id '" + schema_id_ + "' does not match '" +
                          std::string(kFeatureSchemaId) + "'");
  }
  for (SymbolId lhs = 0; lhs < grammar_.symbol_count(); ++lhs) {
    const auto& family = grammar_.rules_with_lhs(lhs);
    if (family.empty()) continue;
    double total = 0.0;
    for (RuleId r : family) {
      const RuleModel& m = models_[r];
      if (!(m.prior > 0.0 && m.prior <= 1.0)) {
        throw ValidationError("rule '" + grammar_.spec(r).key() + "': prior must be in (0,1]");
      }
      if (auto* g = std::get_if<GoalModel>(&m.variant); g && !(g->k > 0.0)) {
        throw ValidationError("goal rule: k must be positive");
      }
      if (std::holds_alternative<GaussianModel>(m.variant) && !std::get<GaussianModel>(m.variant).density) {
        throw ValidationError("rule '" + grammar_.spec(r).key() + "': missing gaussian parameters");
      }
      total += m.prior;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ValidationError("priors for '" + grammar_.name(lhs) + "' sum to " + std::to_string(total));
    }
  }
}

namespace {

bool same_parameters(const RuleModel& a, const RuleModel& b) {
  if (a.variant.index() != b.variant.index()) return false;
  if (auto* ga = std::get_if<GaussianModel>(&a.variant)) {
    const auto& pa = ga->density->params();
    const auto& pb = std::get<GaussianModel>(b.variant).density->params();
    return pa.mu.size() == pb.mu.size() && pa.mu == pb.mu && pa.sigma == pb.sigma &&
           pa.reg_epsilon == pb.reg_epsilon;
  }
  if (auto* ka = std::get_if<GoalModel>(&a.variant)) return ka->k == std::get<GoalModel>(b.variant).k;
  return true;
}

}  // namespace

TrainedGrammar compose(const TrainedGrammar& base, const TrainedGrammar& donor) {
  if (base.schema_id() != donor.schema_id()) throw ValidationError("compose: schema ids differ");
  const Grammar& ga = base.grammar();
  const Grammar& gb = donor.grammar();

  Grammar g;
  auto copy_symbols = [&](const Grammar& src) {
    for (SymbolId s = 0; s < src.symbol_count(); ++s) g.add_symbol(src.name(s), src.symbol(s).kind);
  };
  copy_symbols(ga);
  copy_symbols(gb);

  std::vector<RuleModel> models;
  std::vector<char> from_donor;
  auto add_from = [&](const Grammar& src, RuleId r) -> std::optional<RuleId> {
    const Rule& rule = src.rule(r);
    std::vector<SymbolId> rhs;
    for (auto c : rule.rhs) rhs.push_back(g.id(src.name(c)));
    const SymbolId lhs = g.id(src.name(rule.lhs));
    if (g.find_rule(lhs, rhs)) return std::nullopt;
    return g.add_rule(lhs, std::move(rhs), rule.kind);
  };
  for (RuleId r = 0; r < ga.rule_count(); ++r) {
    add_from(ga, r);
    models.push_back(base.model(r));
    from_donor.push_back(0);
  }
  for (RuleId r = 0; r < gb.rule_count(); ++r) {
    if (auto id = add_from(gb, r)) {
      models.push_back(donor.model(r));
      from_donor.push_back(1);
      continue;
    }
    // Shared rule: parameters must agree.
    const Rule& rule = gb.rule(r);
    std::vector<SymbolId> rhs;
    for (auto c : rule.rhs) rhs.push_back(g.id(gb.name(c)));
    const RuleId existing = *g.find_rule(g.id(gb.name(rule.lhs)), rhs);
    if (!same_parameters(models[existing], donor.model(r))) {
      throw ValidationError("conflicting models for rule '" + gb.spec(r).key() + "'");
    }
  }

  for (SymbolId lhs = 0; lhs < g.symbol_count(); ++lhs) {
    const auto& family = g.rules_with_lhs(lhs);
    bool has_base = false, has_new = false;
    for (RuleId r : family) (from_donor[r] ? has_new : has_base) = true;
    if (!has_base || !has_new) continue;

    double lhs_count = 0.0;
    for (RuleId r : family)
      if (!from_donor[r]) lhs_count += static_cast<double>(models[r].count);
    std::vector<double> w(family.size());
    double total = 0.0;
    for (std::size_t i = 0; i < family.size(); ++i) {
      const RuleModel& m = models[family[i]];
      const double raw = from_donor[family[i]] ? static_cast<double>(m.count) : m.prior * lhs_count;
      w[i] = raw > 0.0 ? raw : kUnseenPriorFloor;
      total += w[i];
    }
    for (std::size_t i = 0; i < family.size(); ++i) models[family[i]].prior = w[i] / total;
  }
  return TrainedGrammar(std::move(g), std::move(models), base.schema_id());
}

}  // namespace scenegram
