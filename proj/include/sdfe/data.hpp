#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sdfe/rng.hpp"

namespace sdfe::data {

// One implicit-feedback interaction. Any rating value counts as positive.
struct Interaction {
  long long user = 0;
  long long item = 0;
  long long timestamp = 0;
  bool has_timestamp = false;
};

enum class Format { MovielensDat, Tsv };

enum class SplitMode { PerUser, Global };

struct Ratios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

struct Dataset {
  int num_users = 0;
  int num_items = 0;
  // Interactions with dense ids in [0, num_users) x [0, num_items).
  std::vector<Interaction> train, valid, test;
  // dense index -> original id
  std::vector<long long> user_orig, item_orig;
};

// Star graph of one user and its first-order train items (ascending ids).
struct EgoGraph {
  int user = 0;
  std::vector<int> items;
  int n() const { return static_cast<int>(items.size()); }
};

namespace detail {

inline std::vector<std::string> split_on(const std::string& line, const std::string& sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + sep.size();
  }
  return out;
}

inline long long parse_ll(const std::string& s, int lineno, const char* what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("parse error at line " + std::to_string(lineno) + ": bad " +
                             std::string(what) + " '" + s + "'");
  }
}

}  // namespace detail

// Parses a dataset file and collapses duplicate (user, item) pairs,
// keeping first occurrence order.
inline std::vector<Interaction> ingest(const std::string& path, Format format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::vector<Interaction> out;
  std::set<std::pair<long long, long long>> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Interaction it;
    if (format == Format::MovielensDat) {
      const auto f = detail::split_on(line, "::");
      if (f.size() < 4)
        throw std::runtime_error("parse error at line " + std::to_string(lineno) +
                                 ": expected user::item::rating::timestamp");
      it.user = detail::parse_ll(f[0], lineno, "user id");
      it.item = detail::parse_ll(f[1], lineno, "item id");
      it.timestamp = detail::parse_ll(f[3], lineno, "timestamp");
      it.has_timestamp = true;
    } else {
      const auto f = detail::split_on(line, "\t");
      if (f.size() < 2 || f.size() > 3)
        throw std::runtime_error("parse error at line " + std::to_string(lineno) +
                                 ": expected user<TAB>item[<TAB>timestamp]");
      it.user = detail::parse_ll(f[0], lineno, "user id");
      it.item = detail::parse_ll(f[1], lineno, "item id");
      if (f.size() == 3) {
        it.timestamp = detail::parse_ll(f[2], lineno, "timestamp");
        it.has_timestamp = true;
      }
    }
    if (it.user < 0 || it.item < 0)
      throw std::runtime_error("parse error at line " + std::to_string(lineno) + ": negative id");
    if (seen.insert({it.user, it.item}).second) out.push_back(it);
  }
  if (out.empty()) throw std::runtime_error("empty dataset: " + path);
  return out;
}

// Iteratively removes users and items with fewer than min_interactions
// interactions until a fixed point is reached.
inline std::vector<Interaction> filter_min_interactions(std::vector<Interaction> inter,
                                                        int min_interactions) {
  if (min_interactions < 1) throw std::invalid_argument("min_interactions must be >= 1");
  bool changed = true;
  while (changed) {
    changed = false;
    std::map<long long, int> ucount, icount;
    for (const auto& it : inter) {
      ++ucount[it.user];
      ++icount[it.item];
    }
    std::vector<Interaction> kept;
    kept.reserve(inter.size());
    for (const auto& it : inter) {
      if (ucount[it.user] >= min_interactions && icount[it.item] >= min_interactions)
        kept.push_back(it);
      else
        changed = true;
    }
    inter = std::move(kept);
    if (inter.empty()) break;
  }
  return inter;
}

// Filters at min_interactions, densifies ids (ascending original id), and
// splits per-user (or globally) at the given ratios with a seeded shuffle.
// Valid/test sizes use floor; the remainder goes to train.
inline Dataset filter_and_split(const std::vector<Interaction>& raw, int min_interactions,
                                Ratios ratios, std::uint64_t seed,
                                SplitMode mode = SplitMode::PerUser) {
  const double sum = ratios.train + ratios.valid + ratios.test;
  if (std::fabs(sum - 1.0) > 1e-9) throw std::invalid_argument("split ratios must sum to 1");

  std::vector<Interaction> inter = filter_min_interactions(raw, min_interactions);
  if (inter.empty()) throw std::runtime_error("filtering emptied the dataset");

  std::vector<Interaction> train, valid, test;
  if (mode == SplitMode::PerUser) {
    std::map<long long, std::vector<Interaction>> by_user;
    for (const auto& it : inter) by_user[it.user].push_back(it);
    for (auto& [uid, items] : by_user) {
      std::sort(items.begin(), items.end(),
                [](const Interaction& a, const Interaction& b) { return a.item < b.item; });
      RngStream rng(seed, "split:user:" + std::to_string(uid));
      for (std::size_t i = items.size(); i > 1; --i)
        std::swap(items[i - 1], items[rng.next_below(i)]);
      const std::size_t n = items.size();
      const auto n_valid = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.valid));
      const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.test));
      const std::size_t n_train = n - n_valid - n_test;
      for (std::size_t i = 0; i < n; ++i) {
        if (i < n_train)
          train.push_back(items[i]);
        else if (i < n_train + n_valid)
          valid.push_back(items[i]);
        else
          test.push_back(items[i]);
      }
    }
  } else {
    std::vector<Interaction> all = inter;
    std::sort(all.begin(), all.end(), [](const Interaction& a, const Interaction& b) {
      return std::tie(a.user, a.item) < std::tie(b.user, b.item);
    });
    RngStream rng(seed, "split:global");
    for (std::size_t i = all.size(); i > 1; --i)
      std::swap(all[i - 1], all[rng.next_below(i)]);
    const std::size_t n = all.size();
    const auto n_valid = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.valid));
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.test));
    const std::size_t n_train = n - n_valid - n_test;
    for (std::size_t i = 0; i < n; ++i) {
      if (i < n_train)
        train.push_back(all[i]);
      else if (i < n_train + n_valid)
        valid.push_back(all[i]);
      else
        test.push_back(all[i]);
    }
    // Drop users that lost all train interactions.
    std::set<long long> train_users;
    for (const auto& it : train) train_users.insert(it.user);
    auto keep = [&](std::vector<Interaction>& v) {
      std::erase_if(v, [&](const Interaction& it) { return !train_users.count(it.user); });
    };
    keep(valid);
    keep(test);
  }

  Dataset ds;
  std::set<long long> users, items;
  for (const auto* split : {&train, &valid, &test})
    for (const auto& it : *split) {
      users.insert(it.user);
      items.insert(it.item);
    }
  ds.user_orig.assign(users.begin(), users.end());
  ds.item_orig.assign(items.begin(), items.end());
  ds.num_users = static_cast<int>(ds.user_orig.size());
  ds.num_items = static_cast<int>(ds.item_orig.size());
  std::unordered_map<long long, int> umap, imap;
  for (int i = 0; i < ds.num_users; ++i) umap[ds.user_orig[i]] = i;
  for (int i = 0; i < ds.num_items; ++i) imap[ds.item_orig[i]] = i;
  auto remap = [&](const std::vector<Interaction>& src, std::vector<Interaction>& dst) {
    dst.reserve(src.size());
    for (Interaction it : src) {
      it.user = umap.at(it.user);
      it.item = imap.at(it.item);
      dst.push_back(it);
    }
    std::sort(dst.begin(), dst.end(), [](const Interaction& a, const Interaction& b) {
      return std::tie(a.user, a.item) < std::tie(b.user, b.item);
    });
  };
  remap(train, ds.train);
  remap(valid, ds.valid);
  remap(test, ds.test);
  return ds;
}

// One ego graph per user; items are the user's train items only.
inline std::vector<EgoGraph> build_ego_graphs(const Dataset& ds) {
  std::vector<EgoGraph> graphs(static_cast<std::size_t>(ds.num_users));
  for (int u = 0; u < ds.num_users; ++u) graphs[u].user = u;
  for (const auto& it : ds.train)
    graphs[static_cast<std::size_t>(it.user)].items.push_back(static_cast<int>(it.item));
  for (auto& g : graphs) std::sort(g.items.begin(), g.items.end());
  return graphs;
}

// Sidecar id-map file: `orig<TAB>dense` per line, users first, then a
// `#items` marker line, then items.
inline void write_idmap(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write idmap file: " + path);
  for (int i = 0; i < ds.num_users; ++i) out << ds.user_orig[i] << '\t' << i << '\n';
  out << "#items\n";
  for (int i = 0; i < ds.num_items; ++i) out << ds.item_orig[i] << '\t' << i << '\n';
}

}  // namespace sdfe::data
