#pragma once

#include <cmath>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "sdfe/data.hpp"
#include "sdfe/server.hpp"

namespace sdfe::metrics {

// |top-k of ranked intersect relevant| / |relevant|
inline double recall_at_k(const std::vector<int>& ranked, const std::unordered_set<int>& relevant,
                          int k) {
  if (k < 1) throw std::invalid_argument("recall_at_k: k must be >= 1");
  if (relevant.empty()) throw std::invalid_argument("recall_at_k: empty relevant set");
  int hits = 0;
  for (std::size_t p = 0; p < ranked.size() && static_cast<int>(p) < k; ++p)
    if (relevant.count(ranked[p])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

// Binary-relevance NDCG with 1-based positions: DCG = sum 1/log2(p+1) over
// relevant hits, IDCG = the first min(k, |relevant|) positions.
inline double ndcg_at_k(const std::vector<int>& ranked, const std::unordered_set<int>& relevant,
                        int k) {
  if (k < 1) throw std::invalid_argument("ndcg_at_k: k must be >= 1");
  if (relevant.empty()) throw std::invalid_argument("ndcg_at_k: empty relevant set");
  double dcg = 0.0;
  for (std::size_t p = 0; p < ranked.size() && static_cast<int>(p) < k; ++p)
    if (relevant.count(ranked[p])) dcg += 1.0 / std::log2(static_cast<double>(p + 2));
  double idcg = 0.0;
  const int ideal = std::min<int>(k, static_cast<int>(relevant.size()));
  for (int p = 1; p <= ideal; ++p) idcg += 1.0 / std::log2(static_cast<double>(p + 1));
  return dcg / idcg;
}

struct EvalResult {
  double recall = 0.0;
  double ndcg = 0.0;
  int users_evaluated = 0;
  int users_skipped = 0;  // no test items or absent from the registry
};

// Omniscient offline evaluation: candidates are all items minus the user's
// train items; averages run over users with at least one test item. Reads a
// world snapshot only; never touches protocol state.
inline EvalResult evaluate(const srv::Server& server, const data::Dataset& ds, int k,
                           bool on_valid = false) {
  std::vector<std::unordered_set<int>> train_items(static_cast<std::size_t>(ds.num_users));
  for (const auto& it : ds.train)
    train_items[static_cast<std::size_t>(it.user)].insert(static_cast<int>(it.item));
  std::vector<std::unordered_set<int>> relevant(static_cast<std::size_t>(ds.num_users));
  for (const auto& it : (on_valid ? ds.valid : ds.test))
    relevant[static_cast<std::size_t>(it.user)].insert(static_cast<int>(it.item));

  EvalResult res;
  double rsum = 0.0, nsum = 0.0;
  for (int u = 0; u < ds.num_users; ++u) {
    const auto& rel = relevant[static_cast<std::size_t>(u)];
    if (rel.empty() || !server.has_ego(u)) {
      ++res.users_skipped;
      continue;
    }
    const auto ranked = server.rank_topk(u, k, train_items[static_cast<std::size_t>(u)]);
    rsum += recall_at_k(ranked, rel, k);
    nsum += ndcg_at_k(ranked, rel, k);
    ++res.users_evaluated;
  }
  if (res.users_evaluated > 0) {
    res.recall = rsum / static_cast<double>(res.users_evaluated);
    res.ndcg = nsum / static_cast<double>(res.users_evaluated);
  }
  return res;
}

}  // namespace sdfe::metrics
