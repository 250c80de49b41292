#pragma once

// Shared fixtures for the unit and acceptance suites: random glued group
// graphs, a device-level harness that mirrors the simulator's broadcast
// exchange, and small file utilities.

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sdfe/device.hpp"
#include "sdfe/propagate.hpp"
#include "sdfe/rng.hpp"
#include "sdfe/vec.hpp"

namespace testutil {

struct RandomGroup {
  sdfe::prop::GroupGraph gg;
  sdfe::prop::GroupInit init;
};

// Random group graph with the given bounds. Every member holds at least one
// private item; fake items may or may not overlap private holdings, so the
// sample covers owned fakes, zero-degree fakes, and plain glue edges.
inline RandomGroup make_random_group(sdfe::RngStream& rng, int max_users, int max_items,
                                     int max_fakes, int d) {
  RandomGroup out;
  const int n_users = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_users)));
  const int catalog = max_items;
  std::set<int> users;
  while (static_cast<int>(users.size()) < n_users)
    users.insert(static_cast<int>(rng.next_below(1000)));
  for (int u : users) {
    sdfe::prop::GroupGraph::Member m;
    m.user = u;
    const int n_items = 1 + static_cast<int>(rng.next_below(4));
    std::set<int> items;
    while (static_cast<int>(items.size()) < n_items)
      items.insert(static_cast<int>(rng.next_below(static_cast<std::uint64_t>(catalog))));
    m.items.assign(items.begin(), items.end());
    out.gg.members.push_back(std::move(m));
  }
  const int n_fakes = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_fakes) + 1));
  std::set<int> fakes;
  while (static_cast<int>(fakes.size()) < n_fakes)
    fakes.insert(static_cast<int>(rng.next_below(static_cast<std::uint64_t>(catalog))));
  out.gg.fake_items.assign(fakes.begin(), fakes.end());

  auto rand_vec = [&](int dim) {
    sdfe::Vec v(static_cast<std::size_t>(dim));
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
  };
  for (const auto& m : out.gg.members) {
    out.init.user.push_back(rand_vec(d));
    std::vector<sdfe::Vec> items;
    for (std::size_t j = 0; j < m.items.size(); ++j) items.push_back(rand_vec(d));
    out.init.items.push_back(std::move(items));
  }
  for (std::size_t f = 0; f < out.gg.fake_items.size(); ++f) out.init.fakes.push_back(rand_vec(d));
  return out;
}

// Builds per-member device states (round contexts included) for a group
// graph, exactly as the scheduler would.
inline std::vector<sdfe::dev::DeviceState> make_group_devices(const sdfe::prop::GroupGraph& gg,
                                                              const sdfe::prop::GroupInit& init,
                                                              const sdfe::dev::DeviceHyper& hp) {
  std::vector<sdfe::dev::DeviceState> devs(gg.members.size());
  for (std::size_t m = 0; m < gg.members.size(); ++m) {
    auto& st = devs[m];
    st.ego.user = gg.members[m].user;
    st.ego.items = gg.members[m].items;
    st.user_param = init.user[m];
    st.item_params = init.items[m];
    st.adam_user = sdfe::make_adam(st.user_param.size(), hp.lr, hp.weight_decay);
    st.adam_items.assign(st.item_params.size(), st.adam_user);

    sdfe::dev::RoundContext rc;
    rc.fake_ids = gg.fake_items;
    rc.fake_params = init.fakes;
    rc.owns_fake.resize(gg.fake_items.size());
    rc.fake_deg.resize(gg.fake_items.size());
    rc.fake_conn.assign(gg.fake_items.size(), {});
    for (std::size_t f = 0; f < gg.fake_items.size(); ++f) {
      rc.owns_fake[f] = gg.member_owns(m, gg.fake_items[f]) ? 1 : 0;
      rc.fake_deg[f] = gg.fake_degree(f);
      for (std::size_t v = 0; v < gg.members.size(); ++v)
        if (!gg.member_owns(v, gg.fake_items[f])) rc.fake_conn[f].push_back(gg.members[v].user);
    }
    rc.my_degree = gg.user_degree(m);
    rc.bcasts.assign(static_cast<std::size_t>(hp.layers), {});
    rc.adam_fakes.assign(gg.fake_items.size(),
                         sdfe::make_adam(st.user_param.size(), hp.lr, hp.weight_decay));
    st.round = std::move(rc);
  }
  return devs;
}

// Runs the per-layer broadcast exchange over a fully-populated device group,
// mirroring the scheduler's barriers, then returns every member's forward.
inline std::vector<sdfe::dev::Forward> exchange_and_forward(std::vector<sdfe::dev::DeviceState>& devs,
                                                            const sdfe::dev::DeviceHyper& hp) {
  for (int k = 0; k < hp.layers; ++k) {
    std::vector<sdfe::Vec> scaled(devs.size());
    for (std::size_t i = 0; i < devs.size(); ++i)
      scaled[i] = sdfe::dev::broadcast_value(devs[i], hp, k);
    for (std::size_t i = 0; i < devs.size(); ++i)
      for (std::size_t j = 0; j < devs.size(); ++j) {
        if (i == j) continue;
        devs[j].round.bcasts[static_cast<std::size_t>(k)][devs[i].ego.user] = scaled[i];
      }
  }
  std::vector<sdfe::dev::Forward> fwds;
  fwds.reserve(devs.size());
  for (const auto& st : devs) fwds.push_back(sdfe::dev::local_forward(st, hp));
  return fwds;
}

inline bool bitwise_equal(const sdfe::Vec& a, const sdfe::Vec& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string temp_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("sdfe_test_" + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

}  // namespace testutil
