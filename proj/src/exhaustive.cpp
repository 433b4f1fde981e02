#include <algorithm>
#include <bit>
#include <chrono>

#include "scenegram/errors.hpp"
#include "scenegram/inference.hpp"

namespace scenegram {

namespace {

using Mask = std::uint32_t;

std::vector<Mask> neighbor_masks(const Scene& scene) {
  std::vector<Mask> out(scene.size(), 0);
  for (const auto& [a, b] : scene.edges()) {
    out[a] |= Mask{1} << b;
    out[b] |= Mask{1} << a;
  }
  return out;
}

bool mask_connected(Mask m, const std::vector<Mask>& nbr) {
  if (m == 0) return false;
  Mask reached = m & (~m + 1);
  Mask frontier = reached;
  while (frontier) {
    Mask next = 0;
    for (Mask f = frontier; f; f &= f - 1) next |= nbr[std::countr_zero(f)];
    next &= m & ~reached;
    reached |= next;
    frontier = next;
  }
  return reached == m;
}

Mask touching(Mask m, const std::vector<Mask>& nbr) {
  Mask out = 0;
  for (; m; m &= m - 1) out |= nbr[std::countr_zero(m)];
  return out;
}

}  // namespace

std::int64_t count_connected_subsets(const Scene& scene) {
  if (scene.size() > 24) throw ValidationError("count_connected_subsets: at most 24 terminals");
  const auto nbr = neighbor_masks(scene);
  std::int64_t n = 0;
  const Mask all = (Mask{1} << scene.size()) - 1;
  for (Mask m = 1; m <= all; ++m) n += mask_connected(m, nbr) ? 1 : 0;
  return n;
}

ParseResult parse_exhaustive(const Scene& scene, const TrainedGrammar& tg) {
  const int n = scene.size();
  if (n > kExhaustiveMaxTerminals) {
    throw ValidationError("exhaustive parse supports at most " + std::to_string(kExhaustiveMaxTerminals) +
                          " terminals, scene has " + std::to_string(n));
  }
  const auto t0 = std::chrono::steady_clock::now();
  const Grammar& g = tg.grammar();
  const auto nbr = neighbor_masks(scene);
  StatementPool pool(scene, tg);

  // Best statement per entity key, grouped by the mask it spans.
  const Mask full = (Mask{1} << n) - 1;
  std::vector<std::unordered_map<EntityKey, int, EntityKeyHash>> table(std::size_t{full} + 1);

  auto offer = [&](Mask m, Statement s) -> bool {
    auto key = s.key();
    auto it = table[m].find(key);
    if (it != table[m].end() && pool[it->second].cost <= s.cost) return false;
    const int id = pool.add(std::move(s));
    if (it != table[m].end()) {
      it->second = id;
    } else {
      table[m].emplace(std::move(key), id);
    }
    return true;
  };

  std::vector<Mask> masks;
  for (Mask m = 1; m <= full; ++m) {
    if (mask_connected(m, nbr)) masks.push_back(m);
  }
  std::stable_sort(masks.begin(), masks.end(), [](Mask a, Mask b) { return std::popcount(a) < std::popcount(b); });

  std::int64_t expansions = 0;
  for (Mask m : masks) {
    if (std::popcount(m) == 1) {
      const int id = pool.add_terminal(std::countr_zero(m));
      table[m].emplace(pool[id].key(), id);
    } else {
      // Ordered splits; each child must be connected and the halves touch.
      for (Mask a = (m - 1) & m; a; a = (a - 1) & m) {
        const Mask b = m & ~a;
        if (table[a].empty() || table[b].empty()) continue;
        if (!(touching(a, nbr) & b)) continue;
        for (const auto& [ka, ia] : table[a]) {
          for (RuleId r : g.rules_with_rhs(ka.symbol)) {
            const Rule& rule = g.rule(r);
            if (rule.unary() || rule.rhs[0] != ka.symbol) continue;
            for (const auto& [kb, ib] : table[b]) {
              if (kb.symbol != rule.rhs[1]) continue;
              const int kids[2] = {ia, ib};
              ++expansions;
              offer(m, pool.make(r, kids));
            }
          }
        }
      }
    }
    // Unary closure; costs are nonnegative so strict improvement terminates.
    bool changed = true;
    while (changed) {
      changed = false;
      std::vector<int> current;
      for (const auto& [k, id] : table[m]) current.push_back(id);
      std::sort(current.begin(), current.end());
      for (int id : current) {
        for (RuleId r : g.rules_with_rhs(pool[id].symbol)) {
          if (!g.rule(r).unary()) continue;
          const int kids[1] = {id};
          ++expansions;
          changed = offer(m, pool.make(r, kids)) || changed;
        }
      }
    }
  }

  ParseResult result;
  result.algorithm = Algorithm::Exhaustive;
  std::optional<int> best;
  for (Mask m : masks) {
    for (const auto& [k, id] : table[m]) {
      if (k.symbol != g.start()) continue;
      if (!best || pool[id].cost < pool[*best].cost ||
          (pool[id].cost == pool[*best].cost && pool[id].span().size() < pool[*best].span().size())) {
        best = id;
      }
    }
  }
  if (best) {
    const Statement& s = pool[*best];
    result.tree = pool.to_tree(*best);
    result.cost = s.cost;
    result.unspanned = n - s.span().size();
    result.clamped = s.clamped;
  } else {
    double k = kDefaultGoalPenalty;
    for (RuleId r = 0; r < g.rule_count(); ++r) {
      if (auto* gm = std::get_if<GoalModel>(&tg.model(r).variant)) k = gm->k;
    }
    result.unspanned = n;
    result.cost = k * n;
  }
  result.stats.expansions = expansions;
  result.stats.statements = pool.size();
  result.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace scenegram
