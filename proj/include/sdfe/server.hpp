#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "sdfe/cluster.hpp"
#include "sdfe/device.hpp"
#include "sdfe/optim.hpp"
#include "sdfe/rng.hpp"
#include "sdfe/vec.hpp"

namespace sdfe::srv {

struct Checkpoint;

// Central server state: the global item table, the latest uploaded ego
// embedding per user, and the clustering front end.
class Server {
 public:
  Server(int num_users, int num_items, int dim, std::uint64_t seed)
      : n_(num_users), m_(num_items), d_(dim) {
    items_.reserve(static_cast<std::size_t>(m_));
    for (int i = 0; i < m_; ++i) {
      RngStream rng(seed, "item:" + std::to_string(i));
      items_.push_back(xavier_init(rng, d_, d_, d_));
    }
    egos_.assign(static_cast<std::size_t>(n_), {});
    has_ego_.assign(static_cast<std::size_t>(n_), 0);
    ego_round_.assign(static_cast<std::size_t>(n_), -1);
  }

  int num_users() const { return n_; }
  int num_items() const { return m_; }
  int dim() const { return d_; }
  int version() const { return version_; }

  const Vec& item(int id) const { return items_.at(static_cast<std::size_t>(id)); }
  const std::vector<Vec>& item_table() const { return items_; }

  bool has_ego(int user) const { return has_ego_.at(static_cast<std::size_t>(user)) != 0; }
  const Vec& ego(int user) const {
    if (!has_ego(user)) throw std::runtime_error("server: no ego embedding for user " + std::to_string(user));
    return egos_[static_cast<std::size_t>(user)];
  }

  void register_ego(int user, Vec embedding, int round) {
    if (static_cast<int>(embedding.size()) != d_)
      throw std::runtime_error("server: ego dimension mismatch for user " + std::to_string(user));
    auto& slot = egos_.at(static_cast<std::size_t>(user));
    if (ego_round_[static_cast<std::size_t>(user)] > round) return;  // monotone by round
    slot = std::move(embedding);
    has_ego_[static_cast<std::size_t>(user)] = 1;
    ego_round_[static_cast<std::size_t>(user)] = round;
  }

  // Unweighted FedAvg per item id; positives and fabricated entries are
  // indistinguishable here by construction. Contributions are ordered by
  // uploading user so the result is invariant to upload order.
  void fedavg_items(const std::vector<dev::UploadBundle>& uploads) {
    std::map<int, std::vector<std::pair<int, const Vec*>>> by_item;
    for (const auto& b : uploads) {
      for (const auto& [id, emb] : b.positives) by_item[id].emplace_back(b.user, &emb);
      for (const auto& [id, emb] : b.fabricated) by_item[id].emplace_back(b.user, &emb);
    }
    for (auto& [id, contribs] : by_item) {
      if (id < 0 || id >= m_) throw std::runtime_error("fedavg: item id out of range");
      std::sort(contribs.begin(), contribs.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      Vec mean = zeros(static_cast<std::size_t>(d_));
      for (const auto& [user, emb] : contribs) {
        if (static_cast<int>(emb->size()) != d_)
          throw std::runtime_error("fedavg: embedding dimension mismatch from user " +
                                   std::to_string(user));
        add_inplace(mean, *emb);
      }
      scale_inplace(mean, 1.0 / static_cast<double>(contribs.size()));
      items_[static_cast<std::size_t>(id)] = std::move(mean);
    }
    ++version_;
  }

  // Co-clusters the ego registry rows [0,N) and the item table rows [N,N+M)
  // and forms groups with fake common items.
  cluster::GroupAssignment recluster(int groups, int fake_count, double l, int max_iters,
                                     double tol, RngStream& rng, bool item_topk_mode = false) const {
    std::vector<Vec> x;
    x.reserve(static_cast<std::size_t>(n_ + m_));
    for (int u = 0; u < n_; ++u) {
      if (!has_ego(u)) throw std::runtime_error("recluster: missing ego embedding for user " + std::to_string(u));
      x.push_back(egos_[static_cast<std::size_t>(u)]);
    }
    for (int i = 0; i < m_; ++i) x.push_back(items_[static_cast<std::size_t>(i)]);
    const auto fcm = cluster::fcm_fit(x, groups, l, max_iters, tol, rng);
    return cluster::assign_groups(fcm.membership, n_, m_, fake_count, item_topk_mode);
  }

  // Ranking by y_ui = dot(e_ego, e_i) over all items outside `exclude`;
  // ties break toward the lower item id.
  std::vector<int> rank_topk(int user, int k, const std::unordered_set<int>& exclude) const {
    if (k <= 0) throw std::invalid_argument("rank_topk: k must be positive");
    const Vec& e = ego(user);
    std::vector<std::pair<double, int>> scored;
    scored.reserve(static_cast<std::size_t>(m_));
    for (int i = 0; i < m_; ++i) {
      if (exclude.count(i)) continue;
      scored.emplace_back(dot(e, items_[static_cast<std::size_t>(i)]), i);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    std::vector<int> out;
    for (std::size_t i = 0; i < scored.size() && static_cast<int>(i) < k; ++i)
      out.push_back(scored[i].second);
    return out;
  }

  // Checkpoint layout: magic "SDFE1", a text header line "N M d round C",
  // then little-endian f32 arrays: the item table (M*d), a presence bitmap
  // (ceil(N/8) bytes, LSB-first), and the ego registry (N*d, zeros where
  // absent).
  void save_checkpoint(const std::string& path, int round, int groups) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << "SDFE1\n";
    out << n_ << ' ' << m_ << ' ' << d_ << ' ' << round << ' ' << groups << '\n';
    auto write_f32 = [&](const Vec& v) {
      for (double x : v) {
        const float f = static_cast<float>(x);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        unsigned char b[4] = {static_cast<unsigned char>(bits & 0xff),
                              static_cast<unsigned char>((bits >> 8) & 0xff),
                              static_cast<unsigned char>((bits >> 16) & 0xff),
                              static_cast<unsigned char>((bits >> 24) & 0xff)};
        out.write(reinterpret_cast<const char*>(b), 4);
      }
    };
    for (const Vec& v : items_) write_f32(v);
    std::vector<unsigned char> bitmap((static_cast<std::size_t>(n_) + 7) / 8, 0);
    for (int u = 0; u < n_; ++u)
      if (has_ego_[static_cast<std::size_t>(u)])
        bitmap[static_cast<std::size_t>(u) / 8] |= static_cast<unsigned char>(1u << (u % 8));
    out.write(reinterpret_cast<const char*>(bitmap.data()), static_cast<std::streamsize>(bitmap.size()));
    const Vec zero = zeros(static_cast<std::size_t>(d_));
    for (int u = 0; u < n_; ++u)
      write_f32(has_ego_[static_cast<std::size_t>(u)] ? egos_[static_cast<std::size_t>(u)] : zero);
  }

  static Checkpoint load_checkpoint(const std::string& path);

 private:
  int n_, m_, d_;
  int version_ = 0;
  std::vector<Vec> items_;
  std::vector<Vec> egos_;
  std::vector<char> has_ego_;
  std::vector<int> ego_round_;

  friend Checkpoint load_checkpoint_impl(const std::string& path);
};

struct Checkpoint {
  Server server;
  int round = 0;
  int groups = 0;
};

inline Checkpoint load_checkpoint_impl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string magic;
    std::getline(in, magic);
    if (magic != "SDFE1") throw std::runtime_error("bad checkpoint magic in " + path);
    int n = 0, m = 0, d = 0, round = 0, groups = 0;
    std::string header;
    std::getline(in, header);
    if (std::sscanf(header.c_str(), "%d %d %d %d %d", &n, &m, &d, &round, &groups) != 5)
      throw std::runtime_error("bad checkpoint header in " + path);
    Checkpoint cp{Server(n, m, d, 0), round, groups};
    auto read_f32 = [&](Vec& v) {
      for (double& x : v) {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        if (!in) throw std::runtime_error("truncated checkpoint: " + path);
        const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                                   (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
        float f;
        std::memcpy(&f, &bits, 4);
        x = static_cast<double>(f);
      }
    };
    for (int i = 0; i < m; ++i) {
      Vec v = zeros(static_cast<std::size_t>(d));
      read_f32(v);
      cp.server.items_[static_cast<std::size_t>(i)] = std::move(v);
    }
    std::vector<unsigned char> bitmap((static_cast<std::size_t>(n) + 7) / 8, 0);
    in.read(reinterpret_cast<char*>(bitmap.data()), static_cast<std::streamsize>(bitmap.size()));
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    for (int u = 0; u < n; ++u) {
      Vec v = zeros(static_cast<std::size_t>(d));
      read_f32(v);
      if (bitmap[static_cast<std::size_t>(u) / 8] & (1u << (u % 8))) {
        cp.server.egos_[static_cast<std::size_t>(u)] = std::move(v);
        cp.server.has_ego_[static_cast<std::size_t>(u)] = 1;
        cp.server.ego_round_[static_cast<std::size_t>(u)] = round;
      }
    }
    return cp;
}

inline Checkpoint Server::load_checkpoint(const std::string& path) {
  return load_checkpoint_impl(path);
}

}  // namespace sdfe::srv
