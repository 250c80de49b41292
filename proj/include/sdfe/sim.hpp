#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sdfe/cluster.hpp"
#include "sdfe/data.hpp"
#include "sdfe/device.hpp"
#include "sdfe/metrics.hpp"
#include "sdfe/parallel.hpp"
#include "sdfe/propagate.hpp"
#include "sdfe/server.hpp"

namespace sdfe::sim {

enum class MsgKind { EgoUpload, GroupNotify, NeighborBroadcast, ItemUpload, ItemFetch };

inline const char* kind_name(MsgKind k) {
  switch (k) {
    case MsgKind::EgoUpload: return "EgoUpload";
    case MsgKind::GroupNotify: return "GroupNotify";
    case MsgKind::NeighborBroadcast: return "NeighborBroadcast";
    case MsgKind::ItemUpload: return "ItemUpload";
    case MsgKind::ItemFetch: return "ItemFetch";
  }
  return "?";
}

// One bus message. payload_params counts exactly the embedding scalars
// carried; ids and rosters ride for free in the accounting model.
struct RoundMessage {
  int round = 0;
  MsgKind kind = MsgKind::EgoUpload;
  std::string src;
  std::string dst;
  int layer = -1;  // broadcasts only
  long payload_params = 0;
};

struct CommRow {
  long uplink = 0;
  long downlink = 0;
  long d2d = 0;
};

inline void apply_to_ledger(CommRow& row, const RoundMessage& m) {
  switch (m.kind) {
    case MsgKind::EgoUpload:
    case MsgKind::ItemUpload:
      row.uplink += m.payload_params;
      break;
    case MsgKind::GroupNotify:
    case MsgKind::ItemFetch:
      row.downlink += m.payload_params;
      break;
    case MsgKind::NeighborBroadcast:
      row.d2d += m.payload_params;
      break;
  }
}

// Recomputes the per-round ledger from a transcript; used to check the
// conservation invariant against the live ledger.
inline std::vector<CommRow> replay_ledger(const std::vector<RoundMessage>& transcript,
                                          int rounds) {
  std::vector<CommRow> rows(static_cast<std::size_t>(rounds) + 1);
  for (const auto& m : transcript) apply_to_ledger(rows.at(static_cast<std::size_t>(m.round)), m);
  return rows;
}

struct SimConfig {
  int d = 64;
  int layers = 4;           // K
  int groups = 100;         // C
  int fake_count = 1;       // F
  int neg_count = 1;
  int local_epochs = 3;
  double lr = 0.001;
  double weight_decay = 0.0001;
  double delta = 1.0;
  double ldp_lambda = 0.1;
  double fuzz = 2.0;        // fuzzy c-means weighting exponent l
  int fcm_max_iters = 100;
  double fcm_tol = 1e-4;
  double sample_frac = 1.0;
  int recluster_every = 1;
  int ego_upload_every = 1;
  bool item_topk_mode = false;
  std::uint64_t seed = 1;
};

struct World {
  SimConfig cfg;
  data::Dataset ds;
  srv::Server server;
  std::vector<dev::DeviceState> devices;
  cluster::GroupAssignment groups;
  bool have_groups = false;
  int round = 0;
  std::vector<RoundMessage> transcript;
  std::vector<CommRow> ledger;  // indexed by round, row 0 = bootstrap
  double last_mean_loss = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> events;
};

inline dev::DeviceHyper device_hyper(const SimConfig& cfg) {
  dev::DeviceHyper hp;
  hp.d = cfg.d;
  hp.layers = cfg.layers;
  hp.alphas = dev::uniform_alphas(cfg.layers);
  hp.lr = cfg.lr;
  hp.weight_decay = cfg.weight_decay;
  hp.delta = cfg.delta;
  hp.ldp_lambda = cfg.ldp_lambda;
  hp.neg_count = cfg.neg_count;
  hp.local_epochs = cfg.local_epochs;
  return hp;
}

namespace detail {

inline std::string device_id(int user) { return "device:" + std::to_string(user); }

inline void log(World& w, MsgKind kind, std::string src, std::string dst, long params,
                int layer = -1) {
  RoundMessage m{w.round, kind, std::move(src), std::move(dst), layer, params};
  apply_to_ledger(w.ledger.at(static_cast<std::size_t>(w.round)), m);
  w.transcript.push_back(std::move(m));
}

// Step 1: devices fetch the global rows of their private items; they never
// hold the full table.
inline void fetch_private_items(World& w) {
  for (auto& st : w.devices) {
    for (std::size_t j = 0; j < st.ego.items.size(); ++j)
      st.item_params[j] = w.server.item(st.ego.items[j]);
    // fetched rows are fresh optimization variables this round
    const dev::DeviceHyper hp = device_hyper(w.cfg);
    st.adam_items.assign(st.ego.items.size(),
                         make_adam(static_cast<std::size_t>(w.cfg.d), hp.lr, hp.weight_decay));
    log(w, MsgKind::ItemFetch, "server", device_id(st.ego.user),
        static_cast<long>(st.ego.items.size()) * w.cfg.d);
  }
}

// Step 2: single-hop ego embedding (no layer combination), LDP-protected,
// uploaded to the registry.
inline void upload_ego_embeddings(World& w) {
  for (auto& st : w.devices) {
    std::unordered_map<int, Vec> embs;
    for (std::size_t j = 0; j < st.ego.items.size(); ++j) embs[st.ego.items[j]] = st.item_params[j];
    Vec e = prop::ego_embed(st.ego, embs);
    RngStream rng(w.cfg.seed, "round:" + std::to_string(w.round) + ":device:" +
                                  std::to_string(st.ego.user) + ":ego_ldp");
    e = dev::apply_ldp(e, w.cfg.delta, w.cfg.ldp_lambda, rng);
    w.server.register_ego(st.ego.user, std::move(e), w.round);
    log(w, MsgKind::EgoUpload, device_id(st.ego.user), "server", w.cfg.d);
  }
}

}  // namespace detail

// Builds the initial world: Xavier item table and user parameters, empty
// registry and transcript. Round 0 is the bootstrap: devices fetch their
// item rows and upload initial ego embeddings so the registry is rankable
// before any training.
inline World make_world(SimConfig cfg, data::Dataset ds) {
  const dev::DeviceHyper hp = device_hyper(cfg);
  World w{std::move(cfg), std::move(ds), srv::Server(0, 0, 1, 0), {}, {}, false, 0, {}, {}, std::numeric_limits<double>::quiet_NaN(), {}};
  w.server = srv::Server(w.ds.num_users, w.ds.num_items, w.cfg.d, w.cfg.seed);
  const auto egos = data::build_ego_graphs(w.ds);
  w.devices.reserve(egos.size());
  for (const auto& g : egos) w.devices.push_back(dev::make_device(g, w.cfg.seed, hp));
  w.ledger.assign(1, CommRow{});
  detail::fetch_private_items(w);
  detail::upload_ego_embeddings(w);
  return w;
}

// One protocol round: item fetch, ego upload, (re)clustering with group
// notification, per-group layered D2D broadcast exchange, local training on
// sampled devices, LDP-protected uploads, FedAvg. Any actor error aborts the
// round and leaves the world unchanged apart from an error event.
inline void run_round(World& world) {
  // Stage the round on a copy, but move the append-only transcript aside so
  // the copy stays cheap; on abort it is truncated back to its old length.
  std::vector<RoundMessage> transcript = std::move(world.transcript);
  world.transcript.clear();
  const std::size_t base = transcript.size();
  World w = world;  // staged; committed only on success
  w.transcript = std::move(transcript);
  try {
    w.round += 1;
    w.ledger.push_back(CommRow{});
    const int r = w.round;
    const SimConfig& cfg = w.cfg;
    const dev::DeviceHyper hp = device_hyper(cfg);
    const std::string rtag = "round:" + std::to_string(r);

    detail::fetch_private_items(w);
    if (cfg.ego_upload_every > 0 && r % cfg.ego_upload_every == 0) detail::upload_ego_embeddings(w);

    // (3) co-clustering and group notification
    if (!w.have_groups || (cfg.recluster_every > 0 && r % cfg.recluster_every == 0)) {
      RngStream rng(cfg.seed, rtag + ":fcm");
      w.groups = w.server.recluster(cfg.groups, cfg.fake_count, cfg.fuzz, cfg.fcm_max_iters,
                                    cfg.fcm_tol, rng, cfg.item_topk_mode);
      w.have_groups = true;
      for (const auto& warn : w.groups.warnings) w.events.push_back(rtag + ": " + warn);
    }
    for (std::size_t g = 0; g < w.groups.group_users.size(); ++g) {
      const long fake_params = static_cast<long>(w.groups.group_fake_items[g].size()) * cfg.d;
      for (int u : w.groups.group_users[g])
        detail::log(w, MsgKind::GroupNotify, "server", detail::device_id(u), fake_params);
    }

    // (4) round contexts, broadcast exchange, local training
    std::vector<int> sampled;  // user ids, ascending
    for (std::size_t g = 0; g < w.groups.group_users.size(); ++g) {
      const auto& roster = w.groups.group_users[g];
      if (roster.empty()) continue;

      std::vector<int> fakes = w.groups.group_fake_items[g];
      std::sort(fakes.begin(), fakes.end());
      fakes.erase(std::unique(fakes.begin(), fakes.end()), fakes.end());

      for (int u : roster) {
        auto& st = w.devices[static_cast<std::size_t>(u)];
        dev::RoundContext rc;
        rc.fake_ids = fakes;
        rc.owns_fake.resize(fakes.size());
        rc.fake_params.resize(fakes.size());
        rc.fake_deg.assign(fakes.size(), 0);
        rc.fake_conn.assign(fakes.size(), {});
        for (std::size_t f = 0; f < fakes.size(); ++f) {
          rc.owns_fake[f] = std::binary_search(st.ego.items.begin(), st.ego.items.end(), fakes[f]) ? 1 : 0;
          rc.fake_params[f] = w.server.item(fakes[f]);
        }
        // Connectivity announcements: each member tells the group which fake
        // items it links to (sanctioned by the protocol's group visibility).
        for (std::size_t f = 0; f < fakes.size(); ++f) {
          for (int v : roster) {
            const auto& vego = w.devices[static_cast<std::size_t>(v)].ego;
            if (!std::binary_search(vego.items.begin(), vego.items.end(), fakes[f]))
              rc.fake_conn[f].push_back(v);
          }
          rc.fake_deg[f] = static_cast<int>(rc.fake_conn[f].size());
        }
        rc.my_degree = st.ego.n();
        for (std::size_t f = 0; f < fakes.size(); ++f)
          if (!rc.owns_fake[f]) ++rc.my_degree;
        rc.bcasts.assign(static_cast<std::size_t>(cfg.layers), {});
        rc.adam_fakes.assign(fakes.size(),
                             make_adam(static_cast<std::size_t>(cfg.d), cfg.lr, cfg.weight_decay));
        st.round = std::move(rc);
      }

      // device sampling "from each group"
      RngStream srng(cfg.seed, rtag + ":group:" + std::to_string(g) + ":sample");
      std::vector<int> picked;
      if (cfg.sample_frac >= 1.0) {
        picked = roster;
      } else {
        for (int u : roster)
          if (srng.next_double() < cfg.sample_frac) picked.push_back(u);
        if (picked.empty()) picked.push_back(roster[srng.next_below(roster.size())]);
      }
      sampled.insert(sampled.end(), picked.begin(), picked.end());

      // Layered D2D exchange over fake common items.
      if (roster.size() >= 2 && !fakes.empty()) {
        for (int k = 0; k < cfg.layers; ++k) {
          std::vector<Vec> scaled(roster.size());
          parallel_for(roster.size(), [&](std::size_t i) {
            const auto& st = w.devices[static_cast<std::size_t>(roster[i])];
            scaled[i] = dev::broadcast_value(st, hp, k);
          });
          for (std::size_t i = 0; i < roster.size(); ++i) {
            for (std::size_t j = 0; j < roster.size(); ++j) {
              if (i == j) continue;
              auto& dst = w.devices[static_cast<std::size_t>(roster[j])];
              dst.round.bcasts[static_cast<std::size_t>(k)][roster[i]] = scaled[i];
              detail::log(w, MsgKind::NeighborBroadcast, detail::device_id(roster[i]),
                          detail::device_id(roster[j]), cfg.d, k);
            }
          }
        }
      }
    }
    std::sort(sampled.begin(), sampled.end());

    // Fallback negatives for devices with no usable fake item.
    for (int u : sampled) {
      auto& st = w.devices[static_cast<std::size_t>(u)];
      bool has_neg = false;
      for (char o : st.round.owns_fake)
        if (!o) has_neg = true;
      if (has_neg || cfg.local_epochs == 0) continue;
      RngStream rng(cfg.seed, rtag + ":device:" + std::to_string(u) + ":fallback");
      std::set<int> taken(st.ego.items.begin(), st.ego.items.end());
      const int want = std::min(std::max(cfg.neg_count, 1), w.ds.num_items - st.ego.n());
      while (static_cast<int>(st.round.fallback_ids.size()) < want) {
        const int id = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(w.ds.num_items)));
        if (!taken.insert(id).second) continue;
        st.round.fallback_ids.push_back(id);
        st.round.fallback_embs.push_back(w.server.item(id));
      }
      detail::log(w, MsgKind::ItemFetch, "server", detail::device_id(u),
                  static_cast<long>(st.round.fallback_ids.size()) * cfg.d);
    }

    std::vector<double> losses(sampled.size(), std::numeric_limits<double>::quiet_NaN());
    parallel_for(sampled.size(), [&](std::size_t i) {
      auto& st = w.devices[static_cast<std::size_t>(sampled[i])];
      losses[i] = dev::local_train(st, hp, cfg.local_epochs);
    });
    if (!sampled.empty() && cfg.local_epochs > 0) {
      double sum = 0.0;
      for (double l : losses) sum += l;
      w.last_mean_loss = sum / static_cast<double>(losses.size());
    }

    // (5)+(6) uploads and FedAvg
    std::vector<dev::UploadBundle> bundles(sampled.size());
    parallel_for(sampled.size(), [&](std::size_t i) {
      auto& st = w.devices[static_cast<std::size_t>(sampled[i])];
      const dev::Forward fwd = dev::local_forward(st, hp);
      RngStream rng_fab(cfg.seed, rtag + ":device:" + std::to_string(sampled[i]) + ":fab");
      RngStream rng_ldp(cfg.seed, rtag + ":device:" + std::to_string(sampled[i]) + ":ldp");
      bundles[i] = dev::make_upload(st, fwd, hp, w.ds.num_items, rng_fab, rng_ldp);
    });
    for (std::size_t i = 0; i < bundles.size(); ++i) {
      const auto& b = bundles[i];
      const long params =
          static_cast<long>(1 + b.positives.size() + b.fabricated.size()) * cfg.d;
      detail::log(w, MsgKind::ItemUpload, detail::device_id(b.user), "server", params);
      w.server.register_ego(b.user, b.ego_embedding, r);
    }
    w.server.fedavg_items(bundles);

    // Round contexts (fake copies, caches) are discarded at the boundary.
    for (auto& st : w.devices) st.round = dev::RoundContext{};
  } catch (const std::exception& e) {
    w.transcript.resize(base);
    world.transcript = std::move(w.transcript);
    world.events.push_back("round " + std::to_string(world.round + 1) + " aborted: " + e.what());
    return;
  }
  world = std::move(w);
}

struct ReportRow {
  int round = 0;
  int k = 20;
  double recall = 0.0;
  double ndcg = 0.0;
  double mean_loss = std::numeric_limits<double>::quiet_NaN();
  CommRow comm;
};

struct ExperimentResult {
  std::vector<ReportRow> rows;
  int best_round = 0;  // by valid recall when select_on_valid, else last round
  std::optional<srv::Server> best_server;
};

// Drives `rounds` protocol rounds with evaluation every `eval_every` rounds
// (round 0 and the final round are always evaluated).
inline ExperimentResult run_experiment(World& w, int rounds, int eval_every, int k,
                                       bool select_on_valid = false) {
  ExperimentResult res;
  double best_valid = -1.0;
  auto eval_now = [&]() {
    const auto ev = metrics::evaluate(w.server, w.ds, k, false);
    ReportRow row{w.round, k, ev.recall, ev.ndcg, w.last_mean_loss,
                  w.ledger.at(static_cast<std::size_t>(w.round))};
    res.rows.push_back(row);
    if (select_on_valid) {
      const auto vv = metrics::evaluate(w.server, w.ds, k, true);
      if (vv.recall > best_valid) {
        best_valid = vv.recall;
        res.best_round = w.round;
        res.best_server = w.server;
      }
    } else {
      res.best_round = w.round;
    }
  };
  eval_now();
  for (int r = 1; r <= rounds; ++r) {
    run_round(w);
    if ((eval_every > 0 && r % eval_every == 0) || r == rounds) eval_now();
  }
  return res;
}

}  // namespace sdfe::sim
