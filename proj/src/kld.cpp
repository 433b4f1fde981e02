#include <algorithm>
#include <chrono>
#include <queue>

#include "scenegram/inference.hpp"

namespace scenegram {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct AgendaItem {
  double cost;
  int span_size;
  int symbol_rank;
  std::int64_t seq;
  int id;
};

// Min-heap order: cost, then smaller spans, then symbol name, then FIFO.
struct AgendaAfter {
  bool operator()(const AgendaItem& a, const AgendaItem& b) const {
    if (a.cost != b.cost) return a.cost > b.cost;
    if (a.span_size != b.span_size) return a.span_size > b.span_size;
    if (a.symbol_rank != b.symbol_rank) return a.symbol_rank > b.symbol_rank;
    return a.seq > b.seq;
  }
};

std::vector<int> symbol_ranks(const Grammar& g) {
  std::vector<int> order(g.symbol_count());
  for (int i = 0; i < g.symbol_count(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return g.name(a) < g.name(b); });
  std::vector<int> rank(g.symbol_count());
  for (int i = 0; i < g.symbol_count(); ++i) rank[order[i]] = i;
  return rank;
}

double goal_penalty(const TrainedGrammar& tg) {
  for (const auto& m : tg.models()) {
    if (auto* g = std::get_if<GoalModel>(&m.variant)) return g->k;
  }
  return kDefaultGoalPenalty;
}

class Kld {
 public:
  Kld(const Scene& scene, const TrainedGrammar& tg, const KldOptions& options)
      : scene_(scene),
        g_(tg.grammar()),
        options_(options),
        pool_(std::make_shared<StatementPool>(scene, tg)),
        rank_(symbol_ranks(g_)),
        by_symbol_(g_.symbol_count()) {}

  KldOutcome run() {
    const auto t0 = Clock::now();
    KldOutcome out;
    for (int i = 0; i < scene_.size(); ++i) push(pool_->add_terminal(i));

    std::optional<int> goal;
    while (!agenda_.empty()) {
      if (out.stats.expansions >= options_.budget.max_expansions ||
          ((out.stats.expansions & 1023) == 0 && seconds_since(t0) > options_.budget.max_seconds)) {
        out.budget_exhausted = true;
        break;
      }
      const AgendaItem top = agenda_.top();
      agenda_.pop();
      const Statement& s = (*pool_)[top.id];
      auto [it, fresh] = derived_.try_emplace(s.key(), top.id);
      if (!fresh) continue;
      ++out.stats.expansions;
      derived_order_.push_back(top.id);
      if (s.symbol == g_.start()) {
        goal = top.id;
        break;
      }
      by_symbol_[s.symbol].push_back(top.id);
      expand(top.id);
    }

    out.stats.statements = pool_->size();
    out.stats.queue_peak = queue_peak_;
    out.stats.seconds = seconds_since(t0);
    if (goal) {
      const Statement& s = (*pool_)[*goal];
      ParseResult r;
      r.tree = pool_->to_tree(*goal);
      r.cost = s.cost;
      r.unspanned = scene_.size() - s.span().size();
      r.algorithm = Algorithm::Kld;
      r.clamped = s.clamped;
      r.stats = out.stats;
      out.result = std::move(r);
    } else {
      out.partial_forest = partial_forest();
    }
    if (options_.keep_statements) {
      out.pool = pool_;
      out.derived = std::move(derived_order_);
    }
    return out;
  }

 private:
  void push(int id) {
    const Statement& s = (*pool_)[id];
    agenda_.push({s.cost, s.span().size(), rank_[s.symbol], seq_++, id});
    queue_peak_ = std::max<std::int64_t>(queue_peak_, static_cast<std::int64_t>(agenda_.size()));
  }

  void offer(RuleId r, std::span<const int> children) {
    Statement s = pool_->make(r, children);
    if (derived_.contains(s.key())) return;
    push(pool_->add(std::move(s)));
  }

  void expand(int id) {
    const SymbolId sym = (*pool_)[id].symbol;
    for (RuleId r : g_.rules_with_rhs(sym)) {
      const Rule& rule = g_.rule(r);
      if (rule.unary()) {
        const int kids[1] = {id};
        offer(r, kids);
        continue;
      }
      // Pair with every already-derived statement of the other symbol; the
      // pair is generated once, when the later of the two is derived.
      const bool first = rule.rhs[0] == sym;
      const SymbolId other = first ? rule.rhs[1] : rule.rhs[0];
      const std::vector<int>& partners = by_symbol_[other];
      const std::size_t n = partners.size();
      for (std::size_t k = 0; k < n; ++k) {
        const int pid = partners[k];
        if (pid == id) continue;
        const Statement* items[2] = {&(*pool_)[id], &(*pool_)[pid]};
        if (!applicable(rule, items, scene_)) continue;
        const int kids[2] = {first ? id : pid, first ? pid : id};
        offer(r, kids);
      }
    }
  }

  std::vector<ParseTree> partial_forest() const {
    std::vector<int> cand;
    for (int id : derived_order_) {
      if ((*pool_)[id].terminal < 0) cand.push_back(id);
    }
    std::stable_sort(cand.begin(), cand.end(), [&](int a, int b) {
      const Statement& x = (*pool_)[a];
      const Statement& y = (*pool_)[b];
      if (x.span().size() != y.span().size()) return x.span().size() > y.span().size();
      return x.cost < y.cost;
    });
    TerminalSet used;
    std::vector<ParseTree> forest;
    for (int id : cand) {
      const Statement& s = (*pool_)[id];
      if (s.span().intersects(used)) continue;
      used |= s.span();
      forest.push_back(pool_->to_tree(id));
    }
    return forest;
  }

  const Scene& scene_;
  const Grammar& g_;
  const KldOptions& options_;
  std::shared_ptr<StatementPool> pool_;
  std::vector<int> rank_;
  std::vector<std::vector<int>> by_symbol_;
  std::unordered_map<EntityKey, int, EntityKeyHash> derived_;
  std::priority_queue<AgendaItem, std::vector<AgendaItem>, AgendaAfter> agenda_;
  std::vector<int> derived_order_;
  std::int64_t seq_ = 0;
  std::int64_t queue_peak_ = 0;
};

}  // namespace

KldOutcome parse_kld(const Scene& scene, const TrainedGrammar& tg, const KldOptions& options) {
  return Kld(scene, tg, options).run();
}

ParseOutcome parse_scene(const Scene& scene, const TrainedGrammar& tg, const ParseRequest& request) {
  ParseOutcome out;
  switch (request.algorithm) {
    case ParseAlgorithm::Exhaustive:
      out.result = parse_exhaustive(scene, tg);
      break;
    case ParseAlgorithm::Beam:
      out.result = parse_beam(scene, tg, request.beam);
      break;
    case ParseAlgorithm::Kld:
    case ParseAlgorithm::Auto: {
      KldOutcome k = parse_kld(scene, tg, {request.budget, false});
      out.budget_exhausted = k.budget_exhausted;
      if (k.result) {
        out.result = std::move(*k.result);
      } else if (request.algorithm == ParseAlgorithm::Auto) {
        out.result = parse_beam(scene, tg, request.beam);
        out.result.stats.expansions += k.stats.expansions;
        out.result.stats.seconds += k.stats.seconds;
      } else {
        out.result.algorithm = Algorithm::Kld;
        out.result.unspanned = scene.size();
        out.result.cost = goal_penalty(tg) * scene.size();
        out.result.stats = k.stats;
      }
      break;
    }
  }
  out.has_goal = !out.result.tree.empty();
  return out;
}

}  // namespace scenegram
