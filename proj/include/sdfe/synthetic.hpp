#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "sdfe/data.hpp"
#include "sdfe/rng.hpp"

namespace sdfe::data {

// Block-structured implicit-feedback corpus: users and items are split into
// equal latent communities; each user draws ~90% of its interactions from
// its own community's item block and the rest uniformly at random.
inline std::vector<Interaction> make_synthetic(int num_users, int num_items, int communities,
                                               int per_user, std::uint64_t seed) {
  std::vector<Interaction> out;
  out.reserve(static_cast<std::size_t>(num_users) * static_cast<std::size_t>(per_user));
  const int block = num_items / communities;
  for (int u = 0; u < num_users; ++u) {
    RngStream rng(seed, "synth:user:" + std::to_string(u));
    const int comm = u % communities;
    const int lo = comm * block;
    const int hi = (comm == communities - 1) ? num_items : lo + block;
    const int span = hi - lo;
    int in_comm = (per_user * 9 + 5) / 10;  // ~90 %
    if (in_comm > span) in_comm = span;
    std::set<int> chosen;
    while (static_cast<int>(chosen.size()) < in_comm)
      chosen.insert(lo + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(span))));
    while (static_cast<int>(chosen.size()) < per_user)
      chosen.insert(static_cast<int>(rng.next_below(static_cast<std::uint64_t>(num_items))));
    for (int item : chosen) out.push_back(Interaction{u, item, 0, false});
  }
  return out;
}

}  // namespace sdfe::data
