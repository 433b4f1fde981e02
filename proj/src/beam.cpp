#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "scenegram/inference.hpp"

namespace scenegram {

namespace {

using Clock = std::chrono::steady_clock;

struct Forest {
  /// Sorted statement ids of the roots.
  std::vector<int> roots;
  double cost = 0.0;
};

struct Successor {
  RuleId rule;
  int removed[2];
  int arity;
  int statement;
};

class Beam {
 public:
  Beam(const Scene& scene, const TrainedGrammar& tg, const BeamConfig& config)
      : scene_(scene), g_(tg.grammar()), tg_(tg), config_(config), pool_(scene, tg), rng_(config.seed) {
    for (RuleId r = 0; r < g_.rule_count(); ++r) {
      if (g_.rule(r).lhs == g_.start()) {
        if (g_.rule(r).unary()) goal_rules_.push_back(r);
      }
    }
  }

  ParseResult run() {
    const auto t0 = Clock::now();
    Forest init;
    for (int i = 0; i < scene_.size(); ++i) init.roots.push_back(pool_.add_terminal(i));
    std::vector<Forest> beam{init};
    consider_goals(init);

    int steps = 0;
    while (!beam.empty() && steps < config_.max_steps) {
      ++steps;
      std::vector<Forest> pooled;
      for (const Forest& f : beam) sample_successors(f, pooled);
      if (pooled.empty()) break;
      std::sort(pooled.begin(), pooled.end(), [](const Forest& a, const Forest& b) {
        if (a.cost != b.cost) return a.cost < b.cost;
        return a.roots < b.roots;
      });
      std::vector<Forest> next;
      std::set<std::vector<int>> seen;
      for (Forest& f : pooled) {
        if (next.size() >= config_.beam_width) break;
        if (!seen.insert(f.roots).second) continue;
        consider_goals(f);
        next.push_back(std::move(f));
      }
      beam = std::move(next);
      expansions_ += static_cast<std::int64_t>(beam.size());
      queue_peak_ = std::max<std::int64_t>(queue_peak_, static_cast<std::int64_t>(beam.size()));
    }

    ParseResult r;
    r.algorithm = Algorithm::Beam;
    if (best_goal_) {
      const Statement& s = pool_[*best_goal_];
      r.tree = pool_.to_tree(*best_goal_);
      r.cost = s.cost;
      r.unspanned = scene_.size() - s.span().size();
      r.clamped = s.clamped;
    } else {
      r.unspanned = scene_.size();
      r.cost = default_goal_k() * scene_.size();
    }
    r.stats.expansions = expansions_;
    r.stats.queue_peak = queue_peak_;
    r.stats.statements = pool_.size();
    r.stats.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return r;
  }

 private:
  double default_goal_k() const {
    for (RuleId r : goal_rules_) {
      if (auto* m = std::get_if<GoalModel>(&tg_.model(r).variant)) return m->k;
    }
    return kDefaultGoalPenalty;
  }

  int intern(RuleId rule, std::span<const int> kids) {
    const std::array<int, 3> key{rule, kids[0], kids.size() > 1 ? kids[1] : -1};
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    const int id = pool_.add(pool_.make(rule, kids));
    memo_.emplace(key, id);
    return id;
  }

  // The goal rule applied to one root; the rest of the forest is dropped and
  // its terminals count as unspanned.
  void consider_goals(const Forest& f) {
    for (int root : f.roots) {
      for (RuleId r : goal_rules_) {
        if (g_.rule(r).rhs[0] != pool_[root].symbol) continue;
        const int kids[1] = {root};
        const int id = intern(r, kids);
        const double c = pool_[id].cost;
        if (!best_goal_ || c < best_cost_) {
          best_goal_ = id;
          best_cost_ = c;
        }
      }
    }
  }

  std::vector<Successor> successors(const Forest& f) {
    std::vector<Successor> out;
    const std::size_t n = f.roots.size();
    for (std::size_t i = 0; i < n; ++i) {
      const int a = f.roots[i];
      for (RuleId r : g_.rules_with_rhs(pool_[a].symbol)) {
        const Rule& rule = g_.rule(r);
        if (rule.lhs == g_.start()) continue;
        if (rule.unary()) {
          const int kids[1] = {a};
          out.push_back({r, {a, -1}, 1, intern(r, kids)});
          continue;
        }
        for (std::size_t j = i + 1; j < n; ++j) {
          const int b = f.roots[j];
          const Statement* items[2] = {&pool_[a], &pool_[b]};
          if (!applicable(rule, items, scene_)) continue;
          // A rule whose rhs is {X, X} or whose rhs matches both orders is
          // reached once per pair because j > i.
          const bool forward = pool_[a].symbol == rule.rhs[0] && pool_[b].symbol == rule.rhs[1];
          const int kids[2] = {forward ? a : b, forward ? b : a};
          out.push_back({r, {a, b}, 2, intern(r, kids)});
        }
      }
    }
    // A binary rule lists the pair under both symbols when they differ.
    std::sort(out.begin(), out.end(), [](const Successor& x, const Successor& y) { return x.statement < y.statement; });
    out.erase(std::unique(out.begin(), out.end(),
                          [](const Successor& x, const Successor& y) { return x.statement == y.statement; }),
              out.end());
    return out;
  }

  void sample_successors(const Forest& f, std::vector<Forest>& pooled) {
    std::vector<Successor> succ = successors(f);
    if (succ.empty()) return;
    // Weighted sampling without replacement, weight exp(-rule cost): keep the
    // K largest keys log(u) / w.
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<std::pair<double, std::size_t>> keys;
    keys.reserve(succ.size());
    for (std::size_t i = 0; i < succ.size(); ++i) {
      double u = uniform(rng_);
      if (u <= 0.0) u = std::numeric_limits<double>::min();
      keys.emplace_back(std::log(u) * std::exp(pool_[succ[i].statement].rule_cost), i);
    }
    const std::size_t k = std::min(config_.samples_per_state, succ.size());
    std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(k), keys.end(),
                      [](const auto& x, const auto& y) { return x.first != y.first ? x.first > y.first : x.second < y.second; });
    for (std::size_t s = 0; s < k; ++s) {
      const Successor& sc = succ[keys[s].second];
      Forest next;
      next.cost = f.cost;
      for (int root : f.roots) {
        if (root == sc.removed[0] || (sc.arity == 2 && root == sc.removed[1])) {
          next.cost -= pool_[root].cost;
        } else {
          next.roots.push_back(root);
        }
      }
      next.roots.push_back(sc.statement);
      std::sort(next.roots.begin(), next.roots.end());
      next.cost += pool_[sc.statement].cost;
      pooled.push_back(std::move(next));
    }
  }

  const Scene& scene_;
  const Grammar& g_;
  const TrainedGrammar& tg_;
  const BeamConfig& config_;
  StatementPool pool_;
  std::mt19937_64 rng_;
  std::vector<RuleId> goal_rules_;
  std::map<std::array<int, 3>, int> memo_;
  std::optional<int> best_goal_;
  double best_cost_ = 0.0;
  std::int64_t expansions_ = 0;
  std::int64_t queue_peak_ = 0;
};

}  // namespace

ParseResult parse_beam(const Scene& scene, const TrainedGrammar& tg, const BeamConfig& config) {
  return Beam(scene, tg, config).run();
}

}  // namespace scenegram
