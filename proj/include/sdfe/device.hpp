#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdfe/data.hpp"
#include "sdfe/optim.hpp"
#include "sdfe/rng.hpp"
#include "sdfe/vec.hpp"

namespace sdfe::dev {

struct DeviceHyper {
  int d = 64;
  int layers = 4;                 // K
  std::vector<double> alphas;     // K+1 entries, sum to 1
  double lr = 0.001;
  double weight_decay = 0.0001;
  double delta = 1.0;
  double ldp_lambda = 0.1;
  int neg_count = 1;
  int local_epochs = 3;
};

inline std::vector<double> uniform_alphas(int layers) {
  return std::vector<double>(static_cast<std::size_t>(layers) + 1,
                             1.0 / static_cast<double>(layers + 1));
}

// Per-round group context. Fake parameters are local trainable copies of the
// server-provided embeddings and are discarded at round end. Neighbor
// broadcasts are the senders' degree-normalized user embeddings, keyed by
// ascending user id, and stay constant for the whole round.
struct RoundContext {
  std::vector<int> fake_ids;                 // ascending
  std::vector<Vec> fake_params;
  std::vector<char> owns_fake;               // privately held -> no glued edge
  std::vector<int> fake_deg;                 // glued-graph degree per fake
  std::vector<std::vector<int>> fake_conn;   // per fake: connected user ids, ascending
  int my_degree = 0;
  std::vector<std::map<int, Vec>> bcasts;    // [layer][sender] -> scaled vec
  std::vector<int> fallback_ids;             // negatives of last resort
  std::vector<Vec> fallback_embs;            // constants, never trained
  std::vector<AdamState> adam_fakes;
};

struct DeviceState {
  data::EgoGraph ego;
  Vec user_param;
  std::vector<Vec> item_params;  // aligned with ego.items
  AdamState adam_user;
  std::vector<AdamState> adam_items;
  RoundContext round;
};

inline DeviceState make_device(const data::EgoGraph& ego, std::uint64_t seed,
                               const DeviceHyper& hp) {
  DeviceState st;
  st.ego = ego;
  RngStream rng(seed, "user:" + std::to_string(ego.user));
  st.user_param = xavier_init(rng, hp.d, hp.d, hp.d);
  st.item_params.assign(ego.items.size(), zeros(static_cast<std::size_t>(hp.d)));
  st.adam_user = make_adam(static_cast<std::size_t>(hp.d), hp.lr, hp.weight_decay);
  st.adam_items.assign(ego.items.size(), st.adam_user);
  return st;
}

// Forward state for the device's own rows of the group propagation.
struct Forward {
  std::vector<Vec> user_layers;              // 0..L
  std::vector<Vec> item_shared;              // slot k, valid for k >= 1
  std::vector<std::vector<Vec>> fake_layers; // [f][0..L]
  std::vector<Vec> my_scaled;                // broadcasts c_u^(k), k = 0..L-1
  Vec user_final;
  std::vector<Vec> item_finals;
  std::vector<Vec> fake_finals;
};

// Computes layers 0..upto of the device's rows using only local parameters
// plus cached neighbor broadcasts for layers 0..upto-1. Arithmetic matches
// the whole-graph propagation term for term.
inline Forward forward_layers(const DeviceState& st, const DeviceHyper& hp, int upto) {
  const auto& rc = st.round;
  const std::size_t nf = rc.fake_ids.size();
  const std::size_t n_items = st.ego.items.size();
  const double sq_du = std::sqrt(static_cast<double>(rc.my_degree));
  std::vector<double> sq_df(nf);
  for (std::size_t f = 0; f < nf; ++f)
    sq_df[f] = std::sqrt(static_cast<double>(rc.fake_deg[f]));

  Forward fwd;
  fwd.user_layers.push_back(st.user_param);
  fwd.item_shared.assign(static_cast<std::size_t>(upto) + 1, {});
  fwd.fake_layers.assign(nf, {});
  for (std::size_t f = 0; f < nf; ++f) fwd.fake_layers[f].push_back(rc.fake_params[f]);

  for (int k = 0; k < upto; ++k) {
    fwd.my_scaled.push_back(div_by(fwd.user_layers.back(), sq_du));
    const Vec& mine = fwd.my_scaled.back();

    std::vector<Vec> next_fake(nf);
    for (std::size_t f = 0; f < nf; ++f) {
      if (rc.fake_deg[f] == 0) {
        next_fake[f] = fwd.fake_layers[f][0];
        continue;
      }
      Vec sum = zeros(static_cast<std::size_t>(hp.d));
      for (int v : rc.fake_conn[f]) {
        if (v == st.ego.user) {
          add_inplace(sum, mine);
        } else {
          if (static_cast<std::size_t>(k) >= rc.bcasts.size())
            throw std::runtime_error("forward: missing neighbor broadcasts for layer " +
                                     std::to_string(k));
          const auto it = rc.bcasts[static_cast<std::size_t>(k)].find(v);
          if (it == rc.bcasts[static_cast<std::size_t>(k)].end())
            throw std::runtime_error("forward: missing broadcast from user " + std::to_string(v) +
                                     " at layer " + std::to_string(k));
          add_inplace(sum, it->second);
        }
      }
      next_fake[f] = div_by(sum, sq_df[f]);
    }

    Vec sum = zeros(static_cast<std::size_t>(hp.d));
    for (std::size_t j = 0; j < n_items; ++j) {
      const Vec& cur = (k == 0) ? st.item_params[j] : fwd.item_shared[static_cast<std::size_t>(k)];
      add_inplace(sum, div_by(cur, std::sqrt(1.0)));
    }
    for (std::size_t f = 0; f < nf; ++f)
      if (rc.fake_deg[f] > 0 && !rc.owns_fake[f])
        add_inplace(sum, div_by(fwd.fake_layers[f].back(), sq_df[f]));
    fwd.user_layers.push_back(div_by(sum, sq_du));
    fwd.item_shared[static_cast<std::size_t>(k) + 1] = div_by(mine, std::sqrt(1.0));
    for (std::size_t f = 0; f < nf; ++f) fwd.fake_layers[f].push_back(std::move(next_fake[f]));
  }
  return fwd;
}

// Degree-scaled user value broadcast for layer k; requires cached neighbor
// broadcasts for layers 0..k-1 only, so groups can exchange layer by layer.
inline Vec broadcast_value(const DeviceState& st, const DeviceHyper& hp, int k) {
  const Forward fwd = forward_layers(st, hp, k);
  return div_by(fwd.user_layers.back(), std::sqrt(static_cast<double>(st.round.my_degree)));
}

// Full forward plus layer combination for every local node.
inline Forward local_forward(const DeviceState& st, const DeviceHyper& hp) {
  Forward fwd = forward_layers(st, hp, hp.layers);
  const auto& a = hp.alphas;
  const std::size_t d = st.user_param.size();
  fwd.user_final = zeros(d);
  for (int k = 0; k <= hp.layers; ++k) axpy(a[static_cast<std::size_t>(k)], fwd.user_layers[static_cast<std::size_t>(k)], fwd.user_final);
  fwd.item_finals.assign(st.ego.items.size(), {});
  for (std::size_t j = 0; j < st.ego.items.size(); ++j) {
    Vec v = zeros(d);
    axpy(a[0], st.item_params[j], v);
    for (int k = 1; k <= hp.layers; ++k) axpy(a[static_cast<std::size_t>(k)], fwd.item_shared[static_cast<std::size_t>(k)], v);
    fwd.item_finals[j] = std::move(v);
  }
  fwd.fake_finals.assign(st.round.fake_ids.size(), {});
  for (std::size_t f = 0; f < st.round.fake_ids.size(); ++f) {
    Vec v = zeros(d);
    for (int k = 0; k <= hp.layers; ++k) axpy(a[static_cast<std::size_t>(k)], fwd.fake_layers[f][static_cast<std::size_t>(k)], v);
    fwd.fake_finals[f] = std::move(v);
  }
  return fwd;
}

struct BprGrads {
  double loss = 0.0;
  Vec g_user;
  std::vector<Vec> g_items;
  std::vector<Vec> g_fakes;  // zero for fakes not used as negatives
};

namespace detail {
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}
inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
}  // namespace detail

// BPR over all (private item, negative) pairs with analytic gradients
// back-propagated through the linear group propagation. Neighbor broadcasts
// are constants; negatives are the group's non-owned fake items, or the
// fallback items when every fake is privately held. The L2 term is handled
// by optimizer weight decay, not here.
inline BprGrads bpr_loss_and_grads(const DeviceState& st, const Forward& fwd,
                                   const DeviceHyper& hp) {
  const auto& rc = st.round;
  const std::size_t d = st.user_param.size();
  const std::size_t n_items = st.ego.items.size();
  const std::size_t nf = rc.fake_ids.size();
  if (n_items == 0) throw std::runtime_error("bpr: device has no positive items");

  std::vector<std::size_t> neg_fakes;
  for (std::size_t f = 0; f < nf; ++f)
    if (!rc.owns_fake[f]) neg_fakes.push_back(f);
  const bool use_fallback = neg_fakes.empty();
  std::size_t n_neg = use_fallback ? rc.fallback_embs.size() : neg_fakes.size();
  if (n_neg == 0) throw std::runtime_error("bpr: no negatives available and no fallback set");

  auto neg_final = [&](std::size_t j) -> const Vec& {
    return use_fallback ? rc.fallback_embs[j] : fwd.fake_finals[neg_fakes[j]];
  };

  BprGrads out;
  out.g_user = zeros(d);
  out.g_items.assign(n_items, zeros(d));
  out.g_fakes.assign(nf, zeros(d));

  // Loss and adjoints on the combined embeddings.
  Vec geu = zeros(d);
  std::vector<Vec> gei(n_items, zeros(d));
  std::vector<Vec> gef(nf, zeros(d));
  for (std::size_t i = 0; i < n_items; ++i) {
    const double yi = dot(fwd.user_final, fwd.item_finals[i]);
    for (std::size_t j = 0; j < n_neg; ++j) {
      const Vec& ej = neg_final(j);
      const double yj = dot(fwd.user_final, ej);
      const double x = yi - yj;
      out.loss += detail::softplus(-x);
      const double dldx = -detail::sigmoid(-x);
      axpy(dldx, fwd.item_finals[i], geu);
      axpy(-dldx, ej, geu);
      axpy(dldx, fwd.user_final, gei[i]);
      if (!use_fallback) axpy(-dldx, fwd.user_final, gef[neg_fakes[j]]);
    }
  }

  // Adjoints per layer.
  const int layers = hp.layers;
  const double sq_du = std::sqrt(static_cast<double>(rc.my_degree));
  std::vector<double> sq_df(nf);
  for (std::size_t f = 0; f < nf; ++f) sq_df[f] = std::sqrt(static_cast<double>(rc.fake_deg[f]));

  std::vector<Vec> g_u(static_cast<std::size_t>(layers) + 1, zeros(d));
  std::vector<Vec> g_p(static_cast<std::size_t>(layers) + 1, zeros(d));  // shared replica, k >= 1
  std::vector<std::vector<Vec>> g_f(nf, std::vector<Vec>(static_cast<std::size_t>(layers) + 1, zeros(d)));

  for (int k = 0; k <= layers; ++k) axpy(hp.alphas[static_cast<std::size_t>(k)], geu, g_u[static_cast<std::size_t>(k)]);
  Vec sum_gei = zeros(d);
  for (std::size_t i = 0; i < n_items; ++i) {
    axpy(hp.alphas[0], gei[i], out.g_items[i]);
    add_inplace(sum_gei, gei[i]);
  }
  for (int k = 1; k <= layers; ++k) axpy(hp.alphas[static_cast<std::size_t>(k)], sum_gei, g_p[static_cast<std::size_t>(k)]);
  for (std::size_t f = 0; f < nf; ++f)
    for (int k = 0; k <= layers; ++k) axpy(hp.alphas[static_cast<std::size_t>(k)], gef[f], g_f[f][static_cast<std::size_t>(k)]);

  for (int k = layers; k >= 1; --k) {
    const auto uk = static_cast<std::size_t>(k);
    // U[k] = (sum_j replica[k-1] + sum_{f conn} F[f][k-1]/sq_df) / sq_du
    if (k - 1 == 0) {
      for (std::size_t i = 0; i < n_items; ++i) axpy(1.0 / sq_du, g_u[uk], out.g_items[i]);
    } else {
      axpy(static_cast<double>(n_items) / sq_du, g_u[uk], g_p[uk - 1]);
    }
    for (std::size_t f = 0; f < nf; ++f)
      if (rc.fake_deg[f] > 0 && !rc.owns_fake[f])
        axpy(1.0 / (sq_du * sq_df[f]), g_u[uk], g_f[f][uk - 1]);
    // P[k] = U[k-1] / sq_du
    axpy(1.0 / sq_du, g_p[uk], g_u[uk - 1]);
    // F[f][k]: only the device's own broadcast contribution carries gradient.
    for (std::size_t f = 0; f < nf; ++f) {
      if (rc.fake_deg[f] == 0) {
        add_inplace(g_f[f][0], g_f[f][uk]);
      } else if (!rc.owns_fake[f]) {
        axpy(1.0 / (sq_du * sq_df[f]), g_f[f][uk], g_u[uk - 1]);
      }
    }
  }

  out.g_user = std::move(g_u[0]);
  for (std::size_t f = 0; f < nf; ++f) out.g_fakes[f] = std::move(g_f[f][0]);
  return out;
}

// Runs `epochs` iterations of forward -> BPR gradients -> Adam on the user
// parameter, private item parameters, and the local fake copies. Returns the
// last computed loss (NaN loss aborts with an error).
inline double local_train(DeviceState& st, const DeviceHyper& hp, int epochs) {
  double last_loss = std::numeric_limits<double>::quiet_NaN();
  for (int e = 0; e < epochs; ++e) {
    const Forward fwd = local_forward(st, hp);
    const BprGrads g = bpr_loss_and_grads(st, fwd, hp);
    if (!std::isfinite(g.loss))
      throw std::runtime_error("local_train: divergence on device " + std::to_string(st.ego.user));
    adam_step(st.user_param, g.g_user, st.adam_user);
    for (std::size_t j = 0; j < st.item_params.size(); ++j)
      adam_step(st.item_params[j], g.g_items[j], st.adam_items[j]);
    for (std::size_t f = 0; f < st.round.fake_params.size(); ++f)
      if (!st.round.owns_fake[f])
        adam_step(st.round.fake_params[f], g.g_fakes[f], st.round.adam_fakes[f]);
    last_loss = g.loss;
  }
  return last_loss;
}

// Samples `count` distinct non-interacted item ids and draws each embedding
// i.i.d. Gaussian per dimension with the sample mean/variance of the current
// private item parameters. Variances at or below the 1e-12 floor degenerate
// to the mean exactly.
inline std::vector<std::pair<int, Vec>> fabricate_negatives(const DeviceState& st, int count,
                                                            int num_items, RngStream& rng,
                                                            std::vector<std::string>* warnings = nullptr) {
  if (count < 0) throw std::invalid_argument("fabricate_negatives: negative count");
  const int avail = num_items - st.ego.n();
  if (count > avail) {
    if (warnings)
      warnings->push_back("device " + std::to_string(st.ego.user) + ": negative count clamped from " +
                          std::to_string(count) + " to " + std::to_string(avail));
    count = std::max(avail, 0);
  }
  const std::size_t d = st.user_param.size();
  Vec mean = zeros(d), var = zeros(d);
  const double n = static_cast<double>(st.item_params.size());
  for (const Vec& v : st.item_params) add_inplace(mean, v);
  scale_inplace(mean, 1.0 / n);
  for (const Vec& v : st.item_params)
    for (std::size_t t = 0; t < d; ++t) {
      const double c = v[t] - mean[t];
      var[t] += c * c;
    }
  scale_inplace(var, 1.0 / n);

  std::vector<std::pair<int, Vec>> out;
  std::set<int> taken(st.ego.items.begin(), st.ego.items.end());
  while (static_cast<int>(out.size()) < count) {
    const int id = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(num_items)));
    if (!taken.insert(id).second) continue;
    Vec e(d);
    for (std::size_t t = 0; t < d; ++t) {
      const double sd = var[t] > 1e-12 ? std::sqrt(var[t]) : 0.0;
      e[t] = rng.gaussian(mean[t], sd);
    }
    out.emplace_back(id, std::move(e));
  }
  return out;
}

// L1 clip to threshold delta, then additive Laplace(0, lambda) noise.
inline Vec apply_ldp(const Vec& v, double delta, double lambda, RngStream& rng) {
  if (delta <= 0.0) throw std::invalid_argument("apply_ldp: delta must be positive");
  if (lambda < 0.0) throw std::invalid_argument("apply_ldp: negative noise scale");
  Vec out = v;
  const double norm = l1_norm(v);
  if (norm > delta) scale_inplace(out, delta / norm);
  if (lambda > 0.0)
    for (double& x : out) x += rng.laplace(lambda);
  return out;
}

// What leaves the device: the post-training combined ego embedding, the
// trained layer-0 positives, and fabricated camouflage negatives, all
// LDP-protected.
struct UploadBundle {
  int user = 0;
  Vec ego_embedding;
  std::vector<std::pair<int, Vec>> positives;
  std::vector<std::pair<int, Vec>> fabricated;
};

inline UploadBundle make_upload(const DeviceState& st, const Forward& fwd, const DeviceHyper& hp,
                                int num_items, RngStream& rng_fab, RngStream& rng_ldp,
                                std::vector<std::string>* warnings = nullptr) {
  UploadBundle b;
  b.user = st.ego.user;
  b.ego_embedding = apply_ldp(fwd.user_final, hp.delta, hp.ldp_lambda, rng_ldp);
  for (std::size_t j = 0; j < st.ego.items.size(); ++j)
    b.positives.emplace_back(st.ego.items[j],
                             apply_ldp(st.item_params[j], hp.delta, hp.ldp_lambda, rng_ldp));
  for (auto& [id, emb] : fabricate_negatives(st, hp.neg_count, num_items, rng_fab, warnings))
    b.fabricated.emplace_back(id, apply_ldp(emb, hp.delta, hp.ldp_lambda, rng_ldp));
  return b;
}

}  // namespace sdfe::dev
