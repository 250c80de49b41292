#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sdfe/data.hpp"
#include "sdfe/vec.hpp"

namespace sdfe::prop {

// Glued bipartite group graph. Each member keeps private per-user item
// replica nodes (degree 1); fake items are shared nodes connected to every
// member that does not hold the item privately, so a privately-held fake
// contributes no duplicate edge.
//
// Floating-point contract shared with the centralized oracle: a node update
// is next[w] = (sum over neighbors v in ascending node order of
// cur[v]/sqrt(deg v)) / sqrt(deg w). Layer combination accumulates
// alpha_k * e^(k) in ascending k.
struct GroupGraph {
  struct Member {
    int user = 0;
    std::vector<int> items;  // ascending
  };
  std::vector<Member> members;  // ascending user id
  std::vector<int> fake_items;  // ascending item ids

  bool member_owns(std::size_t m, int item) const {
    const auto& v = members[m].items;
    return std::binary_search(v.begin(), v.end(), item);
  }

  int user_degree(std::size_t m) const {
    int deg = static_cast<int>(members[m].items.size());
    for (int f : fake_items)
      if (!member_owns(m, f)) ++deg;
    return deg;
  }

  int fake_degree(std::size_t f_idx) const {
    int deg = 0;
    for (std::size_t m = 0; m < members.size(); ++m)
      if (!member_owns(m, fake_items[f_idx])) ++deg;
    return deg;
  }
};

// Layer-0 embeddings for every node of a group graph.
struct GroupInit {
  std::vector<Vec> user;                    // per member
  std::vector<std::vector<Vec>> items;      // per member, aligned with items
  std::vector<Vec> fakes;                   // per fake item
};

// Per-node layer stacks 0..K plus layer-combined embeddings. Private item
// replicas of one member share a single propagated value for layers >= 1.
struct PropResult {
  int layers = 0;  // K
  std::vector<double> alphas;
  std::vector<std::vector<Vec>> user_layers;   // [member][k]
  std::vector<std::vector<Vec>> fake_layers;   // [fake][k]
  std::vector<std::vector<Vec>> item_shared;   // [member][k], k >= 1 (slot 0 unused)
  std::vector<Vec> user_combined;              // per member
  std::vector<std::vector<Vec>> item_combined; // per member, per private item
  std::vector<Vec> fake_combined;              // per fake
};

inline Vec combine_layers(const std::vector<double>& alphas,
                          const std::vector<const Vec*>& layers) {
  Vec out = zeros(layers[0]->size());
  for (std::size_t k = 0; k < layers.size(); ++k) axpy(alphas[k], *layers[k], out);
  return out;
}

// Single LGC hop over an isolated ego graph: every item has degree 1, the
// user degree is n, so e_ego = (sum_i e_i) / sqrt(n).
inline Vec ego_embed(const data::EgoGraph& g, const std::unordered_map<int, Vec>& item_embs) {
  if (g.items.empty()) throw std::invalid_argument("ego_embed: empty ego graph");
  Vec sum;
  for (int item : g.items) {
    const auto it = item_embs.find(item);
    if (it == item_embs.end())
      throw std::runtime_error("ego_embed: missing embedding for item " + std::to_string(item));
    const Vec scaled = div_by(it->second, std::sqrt(1.0));
    if (sum.empty())
      sum = scaled;
    else
      add_inplace(sum, scaled);
  }
  return div_by(sum, std::sqrt(static_cast<double>(g.items.size())));
}

// K synchronous LGC layers over the glued group graph followed by layer
// combination. Zero-degree nodes keep their layer-0 embedding throughout.
inline PropResult group_propagate(const GroupGraph& gg, const GroupInit& init, int layers,
                                  const std::vector<double>& alphas) {
  if (layers < 1) throw std::invalid_argument("group_propagate: need at least one layer");
  if (static_cast<int>(alphas.size()) != layers + 1)
    throw std::invalid_argument("group_propagate: alphas must have K+1 entries");
  const std::size_t g = gg.members.size();
  const std::size_t nf = gg.fake_items.size();
  const std::size_t d = init.user.at(0).size();

  std::vector<double> sq_du(g), sq_df(nf);
  std::vector<int> fdeg(nf);
  for (std::size_t m = 0; m < g; ++m) sq_du[m] = std::sqrt(static_cast<double>(gg.user_degree(m)));
  for (std::size_t f = 0; f < nf; ++f) {
    fdeg[f] = gg.fake_degree(f);
    sq_df[f] = std::sqrt(static_cast<double>(fdeg[f]));
  }

  PropResult res;
  res.layers = layers;
  res.alphas = alphas;
  res.user_layers.assign(g, {});
  res.fake_layers.assign(nf, {});
  res.item_shared.assign(g, std::vector<Vec>(static_cast<std::size_t>(layers) + 1));
  for (std::size_t m = 0; m < g; ++m) res.user_layers[m].push_back(init.user[m]);
  for (std::size_t f = 0; f < nf; ++f) res.fake_layers[f].push_back(init.fakes[f]);

  for (int k = 0; k < layers; ++k) {
    // Scaled values cur/sqrt(deg), shared with receivers.
    std::vector<Vec> user_scaled(g), fake_scaled(nf);
    for (std::size_t m = 0; m < g; ++m)
      user_scaled[m] = div_by(res.user_layers[m].back(), sq_du[m]);
    for (std::size_t f = 0; f < nf; ++f)
      if (fdeg[f] > 0) fake_scaled[f] = div_by(res.fake_layers[f].back(), sq_df[f]);

    std::vector<Vec> next_user(g), next_fake(nf);
    for (std::size_t m = 0; m < g; ++m) {
      Vec sum = zeros(d);
      const std::size_t n_items = gg.members[m].items.size();
      for (std::size_t j = 0; j < n_items; ++j) {
        // Private replica scaled value: layer 0 is its own init, layers >= 1
        // equal the member's previous broadcast; deg = 1 so scaling is /sqrt(1).
        const Vec& cur = (k == 0) ? init.items[m][j] : res.item_shared[m][static_cast<std::size_t>(k)];
        const Vec scaled = div_by(cur, std::sqrt(1.0));
        add_inplace(sum, scaled);
      }
      for (std::size_t f = 0; f < nf; ++f)
        if (fdeg[f] > 0 && !gg.member_owns(m, gg.fake_items[f])) add_inplace(sum, fake_scaled[f]);
      next_user[m] = div_by(sum, sq_du[m]);
      // All replicas of member m take the same propagated value.
      res.item_shared[m][static_cast<std::size_t>(k) + 1] = div_by(user_scaled[m], std::sqrt(1.0));
    }
    for (std::size_t f = 0; f < nf; ++f) {
      if (fdeg[f] == 0) {
        next_fake[f] = res.fake_layers[f][0];
        continue;
      }
      Vec sum = zeros(d);
      for (std::size_t m = 0; m < g; ++m)
        if (!gg.member_owns(m, gg.fake_items[f])) add_inplace(sum, user_scaled[m]);
      next_fake[f] = div_by(sum, sq_df[f]);
    }
    for (std::size_t m = 0; m < g; ++m) res.user_layers[m].push_back(std::move(next_user[m]));
    for (std::size_t f = 0; f < nf; ++f) res.fake_layers[f].push_back(std::move(next_fake[f]));
  }

  res.user_combined.resize(g);
  res.item_combined.assign(g, {});
  res.fake_combined.resize(nf);
  for (std::size_t m = 0; m < g; ++m) {
    std::vector<const Vec*> stack;
    for (int k = 0; k <= layers; ++k) stack.push_back(&res.user_layers[m][static_cast<std::size_t>(k)]);
    res.user_combined[m] = combine_layers(alphas, stack);
    for (std::size_t j = 0; j < gg.members[m].items.size(); ++j) {
      std::vector<const Vec*> istack;
      istack.push_back(&init.items[m][j]);
      for (int k = 1; k <= layers; ++k) istack.push_back(&res.item_shared[m][static_cast<std::size_t>(k)]);
      res.item_combined[m].push_back(combine_layers(alphas, istack));
    }
  }
  for (std::size_t f = 0; f < nf; ++f) {
    std::vector<const Vec*> stack;
    for (int k = 0; k <= layers; ++k) stack.push_back(&res.fake_layers[f][static_cast<std::size_t>(k)]);
    res.fake_combined[f] = combine_layers(alphas, stack);
  }
  return res;
}

// Test oracle: the same propagation computed from an explicit dense
// adjacency matrix over the full node set (users, then per-member private
// replicas, then fake items).
struct OracleResult {
  std::vector<Vec> user_combined;
  std::vector<std::vector<Vec>> item_combined;
  std::vector<Vec> fake_combined;
  std::vector<std::vector<Vec>> node_layers;  // [node][k], canonical node order
};

inline OracleResult oracle_centralized_lgc(const GroupGraph& gg, const GroupInit& init,
                                           int layers, const std::vector<double>& alphas) {
  const std::size_t g = gg.members.size();
  const std::size_t nf = gg.fake_items.size();
  std::size_t n_nodes = g + nf;
  for (const auto& m : gg.members) n_nodes += m.items.size();
  if (n_nodes > 10000) throw std::invalid_argument("oracle_centralized_lgc: graph too large");
  const std::size_t d = init.user.at(0).size();

  // Canonical node order: users, then replicas grouped by member, then fakes.
  std::vector<std::size_t> replica_base(g);
  std::size_t next_id = g;
  for (std::size_t m = 0; m < g; ++m) {
    replica_base[m] = next_id;
    next_id += gg.members[m].items.size();
  }
  const std::size_t fake_base = next_id;

  std::vector<std::vector<char>> adj(n_nodes, std::vector<char>(n_nodes, 0));
  for (std::size_t m = 0; m < g; ++m) {
    for (std::size_t j = 0; j < gg.members[m].items.size(); ++j) {
      adj[m][replica_base[m] + j] = 1;
      adj[replica_base[m] + j][m] = 1;
    }
    for (std::size_t f = 0; f < nf; ++f)
      if (!gg.member_owns(m, gg.fake_items[f])) {
        adj[m][fake_base + f] = 1;
        adj[fake_base + f][m] = 1;
      }
  }
  std::vector<int> deg(n_nodes, 0);
  for (std::size_t w = 0; w < n_nodes; ++w)
    for (std::size_t v = 0; v < n_nodes; ++v) deg[w] += adj[w][v];

  std::vector<Vec> cur(n_nodes);
  for (std::size_t m = 0; m < g; ++m) {
    cur[m] = init.user[m];
    for (std::size_t j = 0; j < gg.members[m].items.size(); ++j)
      cur[replica_base[m] + j] = init.items[m][j];
  }
  for (std::size_t f = 0; f < nf; ++f) cur[fake_base + f] = init.fakes[f];

  std::vector<std::vector<Vec>> node_layers(n_nodes);
  for (std::size_t w = 0; w < n_nodes; ++w) node_layers[w].push_back(cur[w]);

  for (int k = 0; k < layers; ++k) {
    std::vector<Vec> scaled(n_nodes);
    for (std::size_t v = 0; v < n_nodes; ++v)
      scaled[v] = deg[v] > 0 ? div_by(cur[v], std::sqrt(static_cast<double>(deg[v]))) : zeros(d);
    std::vector<Vec> next(n_nodes);
    for (std::size_t w = 0; w < n_nodes; ++w) {
      if (deg[w] == 0) {
        next[w] = node_layers[w][0];
        continue;
      }
      Vec sum = zeros(d);
      for (std::size_t v = 0; v < n_nodes; ++v)
        for (std::size_t t = 0; t < d; ++t) sum[t] += static_cast<double>(adj[w][v]) * scaled[v][t];
      next[w] = div_by(sum, std::sqrt(static_cast<double>(deg[w])));
    }
    cur = std::move(next);
    for (std::size_t w = 0; w < n_nodes; ++w) node_layers[w].push_back(cur[w]);
  }

  OracleResult res;
  res.node_layers = node_layers;
  auto combine = [&](std::size_t w) {
    std::vector<const Vec*> stack;
    for (int k = 0; k <= layers; ++k) stack.push_back(&node_layers[w][static_cast<std::size_t>(k)]);
    return combine_layers(alphas, stack);
  };
  for (std::size_t m = 0; m < g; ++m) res.user_combined.push_back(combine(m));
  res.item_combined.assign(g, {});
  for (std::size_t m = 0; m < g; ++m)
    for (std::size_t j = 0; j < gg.members[m].items.size(); ++j)
      res.item_combined[m].push_back(combine(replica_base[m] + j));
  for (std::size_t f = 0; f < nf; ++f) res.fake_combined.push_back(combine(fake_base + f));
  return res;
}

}  // namespace sdfe::prop
