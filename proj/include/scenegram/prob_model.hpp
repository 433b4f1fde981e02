#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "scenegram/features.hpp"
#include "scenegram/grammar.hpp"

namespace scenegram {

inline constexpr double kCovarianceRegularizer = 1e-6;
inline constexpr double kDefaultGoalPenalty = 5.0;
/// Prior given to rules with no training instances before renormalization.
inline constexpr double kUnseenPriorFloor = 1e-6;

struct GaussianParams {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  double reg_epsilon = kCovarianceRegularizer;
};

/// Maximum-likelihood fit: sample mean and covariance with divisor n. A
/// single sample gets the identity covariance. Throws std::invalid_argument
/// on an empty set or inconsistent dimensions.
GaussianParams fit_gaussian(std::span<const FeatureVector> samples);

/// Multivariate normal with covariance sigma + reg_epsilon * I, factorized once.
class GaussianDensity {
 public:
  explicit GaussianDensity(GaussianParams params);

  const GaussianParams& params() const { return params_; }
  int dimension() const { return static_cast<int>(params_.mu.size()); }

  /// -log N(x; mu, sigma + eps I).
  double neg_log_density(const FeatureVector& x) const;

 private:
  GaussianParams params_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_normalizer_ = 0.0;
};

struct GaussianModel {
  std::shared_ptr<const GaussianDensity> density;
};
/// Pr proportional to exp(-d), d the plane-fit residual of the merged points.
struct PlaneFitModel {};
/// exp(-k n), n the number of terminals the goal node leaves out.
struct GoalModel {
  double k = kDefaultGoalPenalty;
};

using ModelVariant = std::variant<GaussianModel, PlaneFitModel, GoalModel>;

struct RuleModel {
  ModelVariant variant;
  double prior = 1.0;
  std::int64_t count = 0;
};

enum class ModelType { Gaussian, PlaneFit, Goal };

/// Goal rules take the goal penalty, rules building a Plane take the plane
/// fit, everything else a Gaussian over its features.
ModelType model_type_for(const Grammar& grammar, const Rule& rule);

/// prior(r) = count(r) / sum of counts over rules sharing r's lhs. Zero
/// counts are floored at kUnseenPriorFloor before normalizing.
std::vector<double> fit_priors(const Grammar& grammar, std::span<const std::int64_t> counts);

struct RuleCost {
  double cost = 0.0;
  bool clamped = false;
};

/// What a rule is applied to: the expanded leaf parts of its children, the
/// merged statistics of everything spanned, and (for goal rules) how many
/// scene terminals the result leaves out.
struct RuleApplication {
  std::span<const Part> parts;
  const SegmentStats* merged = nullptr;
  int unspanned = 0;
};

/// Cost g(s, r) = -log(prior * likelihood), never negative. Gaussian costs
/// below zero are clamped and flagged. Throws std::domain_error when the
/// density is not finite.
RuleCost rule_cost(const RuleModel& model, const RuleApplication& app, const Scene& scene);

/// Unclamped -log(prior) + -log density.
double gaussian_cost_unclamped(const GaussianDensity& density, double prior, const FeatureVector& f);

/// A grammar with one probability model per rule.
class TrainedGrammar {
 public:
  TrainedGrammar() = default;
  /// Validates model count, priors per lhs and goal constants.
  TrainedGrammar(Grammar grammar, std::vector<RuleModel> models, std::string schema_id = std::string(kFeatureSchemaId));

  const Grammar& grammar() const { return grammar_; }
  const std::vector<RuleModel>& models() const { return models_; }
  const RuleModel& model(RuleId r) const { return models_.at(r); }
  const std::string& schema_id() const { return schema_id_; }

 private:
  Grammar grammar_;
  std::vector<RuleModel> models_;
  std::string schema_id_;
};

/// Union of two trained grammars. Models of rules unique to either side are
/// kept as-is; a rule present in both must carry identical parameters. Lhs
/// families that gain rules from `donor` are renormalized with weights
/// prior * (training count of the lhs) for existing rules and the donor's
/// training counts for new ones; other families keep their priors.
/// Throws ValidationError("conflicting models ...") on a parameter clash.
TrainedGrammar compose(const TrainedGrammar& base, const TrainedGrammar& donor);

}  // namespace scenegram
