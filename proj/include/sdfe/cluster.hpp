#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdfe/rng.hpp"
#include "sdfe/vec.hpp"

namespace sdfe::cluster {

// Fuzzy membership over C groups; rows are users [0,N) then items [N,N+M).
using MembershipMatrix = std::vector<std::vector<double>>;

struct FcmResult {
  MembershipMatrix membership;
  std::vector<Vec> centroids;
  std::vector<double> objective_history;
};

struct GroupAssignment {
  std::vector<std::vector<int>> group_users;        // per group, ascending user ids
  std::vector<std::vector<int>> group_fake_items;   // per group, selected item ids
  std::vector<std::vector<double>> group_fake_scores;
  std::vector<int> user_group;                      // per user
  std::vector<std::string> warnings;
};

namespace detail {

// Membership row for one point given squared distances to all centroids.
// Exponent 2/(1-l) on the distance; computed via ratios for stability.
// A coincident centroid (d = 0) gets full membership (lowest index wins).
inline void membership_row(const std::vector<double>& sq_dists, double l,
                           std::vector<double>& row) {
  const int c = static_cast<int>(sq_dists.size());
  int zero_at = -1;
  for (int j = 0; j < c; ++j)
    if (sq_dists[j] == 0.0) {
      zero_at = j;
      break;
    }
  if (zero_at >= 0) {
    std::fill(row.begin(), row.end(), 0.0);
    row[static_cast<std::size_t>(zero_at)] = 1.0;
    return;
  }
  const double expo = 1.0 / (l - 1.0);  // applied to squared distances
  for (int j = 0; j < c; ++j) {
    double denom = 0.0;
    for (int k = 0; k < c; ++k)
      denom += std::pow(sq_dists[j] / sq_dists[k], expo);
    row[static_cast<std::size_t>(j)] = 1.0 / denom;
  }
}

// Distance-weighted (k-means++ style) centroid seeding from data points.
inline std::vector<Vec> seed_centroids(const std::vector<Vec>& points, int c, RngStream& rng) {
  const std::size_t n = points.size();
  std::vector<Vec> centroids;
  centroids.reserve(static_cast<std::size_t>(c));
  std::vector<char> chosen(n, 0);
  std::size_t first = rng.next_below(n);
  centroids.push_back(points[first]);
  chosen[first] = 1;
  std::vector<double> best(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) best[i] = sq_dist(points[i], centroids[0]);
  while (static_cast<int>(centroids.size()) < c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!chosen[i]) total += best[i];
    std::size_t pick = n;
    if (total > 0.0) {
      double target = rng.next_double() * total, acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        acc += best[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    }
    if (pick == n) {
      // All remaining points coincide with chosen centroids.
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) {
          pick = i;
          break;
        }
      if (pick == n) pick = 0;  // fewer distinct points than centroids
    }
    if (!chosen[pick]) chosen[pick] = 1;
    centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i)
      best[i] = std::min(best[i], sq_dist(points[i], centroids.back()));
  }
  return centroids;
}

}  // namespace detail

// Alternating fuzzy c-means: membership update, then centroid update, until
// max |delta membership| < tol or max_iters. The criterion value
// J = sum_ij P_ij^l * d(x_i, c_j)^2 is recorded once per iteration.
inline FcmResult fcm_fit(const std::vector<Vec>& points, int c, double l, int max_iters,
                         double tol, RngStream& rng) {
  const std::size_t n = points.size();
  if (c < 2) throw std::invalid_argument("fcm_fit: need at least 2 groups");
  if (!(l > 1.0)) throw std::invalid_argument("fcm_fit: weighting exponent l must be > 1");
  if (n < static_cast<std::size_t>(c)) throw std::invalid_argument("fcm_fit: fewer points than groups");
  const std::size_t d = points[0].size();

  FcmResult res;
  res.centroids = detail::seed_centroids(points, c, rng);
  res.membership.assign(n, std::vector<double>(static_cast<std::size_t>(c), 0.0));

  std::vector<double> sq(static_cast<std::size_t>(c));
  std::vector<double> row(static_cast<std::size_t>(c));
  bool first = true;
  for (int iter = 0; iter < max_iters; ++iter) {
    double max_delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (int j = 0; j < c; ++j) sq[static_cast<std::size_t>(j)] = sq_dist(points[i], res.centroids[static_cast<std::size_t>(j)]);
      detail::membership_row(sq, l, row);
      for (int j = 0; j < c; ++j) {
        max_delta = std::max(max_delta, std::fabs(row[static_cast<std::size_t>(j)] - res.membership[i][static_cast<std::size_t>(j)]));
        res.membership[i][static_cast<std::size_t>(j)] = row[static_cast<std::size_t>(j)];
      }
    }
    for (int j = 0; j < c; ++j) {
      Vec num = zeros(d);
      double den = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double w = std::pow(res.membership[i][static_cast<std::size_t>(j)], l);
        axpy(w, points[i], num);
        den += w;
      }
      if (den > 0.0) {
        scale_inplace(num, 1.0 / den);
        res.centroids[static_cast<std::size_t>(j)] = std::move(num);
      }
    }
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (int j = 0; j < c; ++j)
        obj += std::pow(res.membership[i][static_cast<std::size_t>(j)], l) *
               sq_dist(points[i], res.centroids[static_cast<std::size_t>(j)]);
    res.objective_history.push_back(obj);
    if (!first && max_delta < tol) break;
    first = false;
  }
  return res;
}

// Users join their argmax group (ties -> lowest group index); each group
// takes the F items with highest membership in its column (ties -> lowest
// item id). The same item may serve several groups.
inline GroupAssignment assign_groups(const MembershipMatrix& p, int num_users, int num_items,
                                     int fake_count, bool item_topk_mode = false) {
  if (fake_count < 0) throw std::invalid_argument("assign_groups: negative fake count");
  if (p.size() != static_cast<std::size_t>(num_users + num_items))
    throw std::invalid_argument("assign_groups: membership row count mismatch");
  const int c = p.empty() ? 0 : static_cast<int>(p[0].size());
  GroupAssignment out;
  out.group_users.assign(static_cast<std::size_t>(c), {});
  out.group_fake_items.assign(static_cast<std::size_t>(c), {});
  out.group_fake_scores.assign(static_cast<std::size_t>(c), {});
  out.user_group.assign(static_cast<std::size_t>(num_users), 0);
  int f = fake_count;
  if (f > num_items) {
    f = num_items;
    out.warnings.push_back("fake count clamped from " + std::to_string(fake_count) + " to " +
                           std::to_string(num_items));
  }
  for (int u = 0; u < num_users; ++u) {
    int best = 0;
    for (int j = 1; j < c; ++j)
      if (p[static_cast<std::size_t>(u)][static_cast<std::size_t>(j)] > p[static_cast<std::size_t>(u)][static_cast<std::size_t>(best)]) best = j;
    out.user_group[static_cast<std::size_t>(u)] = best;
    out.group_users[static_cast<std::size_t>(best)].push_back(u);
  }
  if (item_topk_mode) {
    // Alternative reading: each item joins its top-F groups.
    for (int i = 0; i < num_items; ++i) {
      const auto& prow = p[static_cast<std::size_t>(num_users + i)];
      std::vector<int> order(static_cast<std::size_t>(c));
      for (int j = 0; j < c; ++j) order[static_cast<std::size_t>(j)] = j;
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (prow[static_cast<std::size_t>(a)] != prow[static_cast<std::size_t>(b)])
          return prow[static_cast<std::size_t>(a)] > prow[static_cast<std::size_t>(b)];
        return a < b;
      });
      for (int r = 0; r < std::min(f, c); ++r) {
        const int g = order[static_cast<std::size_t>(r)];
        out.group_fake_items[static_cast<std::size_t>(g)].push_back(i);
        out.group_fake_scores[static_cast<std::size_t>(g)].push_back(prow[static_cast<std::size_t>(g)]);
      }
    }
  } else {
    for (int j = 0; j < c; ++j) {
      std::vector<int> order(static_cast<std::size_t>(num_items));
      for (int i = 0; i < num_items; ++i) order[static_cast<std::size_t>(i)] = i;
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double pa = p[static_cast<std::size_t>(num_users + a)][static_cast<std::size_t>(j)];
        const double pb = p[static_cast<std::size_t>(num_users + b)][static_cast<std::size_t>(j)];
        if (pa != pb) return pa > pb;
        return a < b;
      });
      for (int r = 0; r < f; ++r) {
        const int item = order[static_cast<std::size_t>(r)];
        out.group_fake_items[static_cast<std::size_t>(j)].push_back(item);
        out.group_fake_scores[static_cast<std::size_t>(j)].push_back(
            p[static_cast<std::size_t>(num_users + item)][static_cast<std::size_t>(j)]);
      }
    }
  }
  return out;
}

}  // namespace sdfe::cluster
