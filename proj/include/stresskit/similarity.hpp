#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "stresskit/common.hpp"
#include "stresskit/observations.hpp"

namespace stresskit {

// --------------------------------------------------------------------------
// Behavior vectors
// --------------------------------------------------------------------------

// Per-user fingerprint of how features shift with stress: for every stress
// level pair and every feature, the difference of the per-level medians.
// Blocks are laid out contiguously in the pair order Low-Medium, Low-High,
// Medium-High; a block is defined only when both of its levels are present.
struct BehaviorVector {
  std::string user_id;
  std::size_t features_per_block = 0;
  std::vector<double> entries;  // 3 * features_per_block, masked blocks at 0
  std::array<bool, 3> block_defined{};

  bool usable() const {
    return block_defined[0] || block_defined[1] || block_defined[2];
  }
};

inline constexpr std::array<std::pair<StressLevel, StressLevel>, 3>
    kBehaviorPairs = {{{StressLevel::Low, StressLevel::Medium},
                       {StressLevel::Low, StressLevel::High},
                       {StressLevel::Medium, StressLevel::High}}};

// The median of an even-sized sample is the mean of the two central values.
inline double sample_median(std::vector<double> v) {
  return series_median(std::move(v));
}

inline BehaviorVector behavior_vector(
    std::span<const Observation> user_observations, std::size_t n_features) {
  if (user_observations.empty()) {
    throw std::invalid_argument("behavior_vector needs >= 1 observation");
  }
  BehaviorVector bv;
  bv.user_id = user_observations.front().user_id;
  bv.features_per_block = n_features;
  bv.entries.assign(3 * n_features, 0.0);

  std::array<std::vector<const Observation*>, kNumLevels> by_level;
  for (const auto& o : user_observations) {
    by_level[static_cast<std::size_t>(level_code(o.label))].push_back(&o);
  }

  for (std::size_t b = 0; b < kBehaviorPairs.size(); ++b) {
    const auto [la, lb] = kBehaviorPairs[b];
    const auto& oa = by_level[static_cast<std::size_t>(level_code(la))];
    const auto& ob = by_level[static_cast<std::size_t>(level_code(lb))];
    if (oa.empty() || ob.empty()) continue;
    bv.block_defined[b] = true;
    for (std::size_t f = 0; f < n_features; ++f) {
      std::vector<double> va, vb;
      va.reserve(oa.size());
      vb.reserve(ob.size());
      for (const auto* o : oa) va.push_back(o->features[f]);
      for (const auto* o : ob) vb.push_back(o->features[f]);
      bv.entries[b * n_features + f] =
          sample_median(std::move(va)) - sample_median(std::move(vb));
    }
  }
  return bv;
}

// --------------------------------------------------------------------------
// k-means and silhouette
// --------------------------------------------------------------------------

struct Clustering {
  int k = 0;
  std::vector<int> assignment;
  std::vector<std::vector<double>> centroids;
  double silhouette_index = 0.0;
  bool silhouette_degenerate = false;  // fewer than 2 non-empty clusters
  double wcss = 0.0;
  // Within-cluster sum of squares after each Lloyd iteration, one trace per
  // restart; each trace is non-increasing.
  std::vector<std::vector<double>> wcss_histories;
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace detail

// Per-point silhouette widths s(i) = (b - a) / max(a, b); singleton
// clusters contribute 0. Requires >= 2 non-empty clusters.
inline std::vector<double> silhouette_widths(
    std::span<const std::vector<double>> points, std::span<const int> assignment) {
  if (points.size() != assignment.size() || points.empty()) {
    throw std::invalid_argument("silhouette: size mismatch or empty input");
  }
  const int k = *std::max_element(assignment.begin(), assignment.end()) + 1;
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int a : assignment) ++sizes[static_cast<std::size_t>(a)];
  int non_empty = 0;
  for (std::size_t s : sizes) non_empty += s > 0 ? 1 : 0;
  if (non_empty < 2) {
    throw std::invalid_argument("silhouette needs >= 2 non-empty clusters");
  }

  std::vector<double> widths(points.size(), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const int own = assignment[i];
    if (sizes[static_cast<std::size_t>(own)] <= 1) continue;
    std::vector<double> mean_dist(static_cast<std::size_t>(k), 0.0);
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (j == i) continue;
      mean_dist[static_cast<std::size_t>(assignment[j])] +=
          std::sqrt(detail::sq_dist(points[i], points[j]));
    }
    double a = 0.0;
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] == 0) continue;
      if (c == own) {
        a = mean_dist[static_cast<std::size_t>(c)] /
            static_cast<double>(sizes[static_cast<std::size_t>(c)] - 1);
      } else {
        b = std::min(b, mean_dist[static_cast<std::size_t>(c)] /
                            static_cast<double>(sizes[static_cast<std::size_t>(c)]));
      }
    }
    const double denom = std::max(a, b);
    widths[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return widths;
}

inline double silhouette(std::span<const std::vector<double>> points,
                         std::span<const int> assignment) {
  const auto widths = silhouette_widths(points, assignment);
  return kahan_mean(widths.begin(), widths.end());
}

// Lloyd's algorithm, best of `restarts` seeded initialisations by final
// WCSS. Initial centroids are k distinct points; assignment ties go to the
// lowest cluster id; an empty cluster is re-seeded to the point farthest
// from its current centroid. Iteration stops at an assignment fixpoint or
// after 300 rounds. With fewer than 2 non-empty final clusters the
// silhouette is reported as 0 and flagged degenerate.
inline Clustering kmeans(std::span<const std::vector<double>> points, int k,
                         int restarts, std::uint64_t seed) {
  const std::size_t n = points.size();
  if (k < 2) throw std::invalid_argument("kmeans needs k >= 2");
  if (n < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("kmeans: fewer points than clusters");
  }
  if (restarts < 1) restarts = 1;
  const std::size_t dim = points[0].size();

  Clustering best;
  best.k = k;
  double best_wcss = std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < restarts; ++restart) {
    std::mt19937_64 rng(derive_seed(seed, "restart" + std::to_string(restart)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    deterministic_shuffle(order, rng);
    std::vector<std::vector<double>> centroids;
    centroids.reserve(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) centroids.push_back(points[order[static_cast<std::size_t>(c)]]);

    std::vector<int> assignment(n, -1);
    std::vector<double> history;
    for (int iter = 0; iter < 300; ++iter) {
      bool changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        int nearest = 0;
        double nearest_d = detail::sq_dist(points[i], centroids[0]);
        for (int c = 1; c < k; ++c) {
          const double d = detail::sq_dist(points[i], centroids[static_cast<std::size_t>(c)]);
          if (d < nearest_d) {
            nearest_d = d;
            nearest = c;
          }
        }
        if (assignment[i] != nearest) {
          assignment[i] = nearest;
          changed = true;
        }
      }

      std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
      for (auto& c : centroids) std::fill(c.begin(), c.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        ++sizes[static_cast<std::size_t>(assignment[i])];
        for (std::size_t d = 0; d < dim; ++d) {
          centroids[static_cast<std::size_t>(assignment[i])][d] += points[i][d];
        }
      }
      for (int c = 0; c < k; ++c) {
        if (sizes[static_cast<std::size_t>(c)] == 0) continue;
        for (std::size_t d = 0; d < dim; ++d) {
          centroids[static_cast<std::size_t>(c)][d] /=
              static_cast<double>(sizes[static_cast<std::size_t>(c)]);
        }
      }

      bool reseeded = false;
      for (int c = 0; c < k; ++c) {
        if (sizes[static_cast<std::size_t>(c)] > 0) continue;
        std::size_t farthest = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = detail::sq_dist(
              points[i], centroids[static_cast<std::size_t>(assignment[i])]);
          if (d > far_d) {
            far_d = d;
            farthest = i;
          }
        }
        // A coincident point cannot improve anything; leaving the cluster
        // empty lets degenerate geometry reach a fixpoint.
        if (far_d <= 0.0) continue;
        centroids[static_cast<std::size_t>(c)] = points[farthest];
        assignment[farthest] = c;
        reseeded = true;
      }

      KahanSum j_sum;
      for (std::size_t i = 0; i < n; ++i) {
        j_sum.add(detail::sq_dist(points[i],
                                  centroids[static_cast<std::size_t>(assignment[i])]));
      }
      history.push_back(j_sum.value());
      if (!changed && !reseeded) break;
    }

    best.wcss_histories.push_back(history);
    const double wcss = history.back();
    if (wcss < best_wcss) {
      best_wcss = wcss;
      best.assignment = assignment;
      best.centroids = centroids;
      best.wcss = wcss;
    }
  }

  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int a : best.assignment) ++sizes[static_cast<std::size_t>(a)];
  int non_empty = 0;
  for (std::size_t s : sizes) non_empty += s > 0 ? 1 : 0;
  if (non_empty < 2) {
    best.silhouette_index = 0.0;
    best.silhouette_degenerate = true;
  } else {
    best.silhouette_index = silhouette(points, best.assignment);
  }
  return best;
}

// Runs kmeans for k = 2..min(k_max, n-1) and keeps the k with the highest
// silhouette; ties break toward smaller k.
inline std::pair<int, Clustering> select_k(
    std::span<const std::vector<double>> points, int k_max, int restarts,
    std::uint64_t seed) {
  const std::size_t n = points.size();
  if (n < 3) throw std::invalid_argument("select_k needs >= 3 points");
  const int hi = std::min<int>(k_max, static_cast<int>(n) - 1);
  if (hi < 2) throw std::invalid_argument("select_k: k range is empty");

  int best_k = 0;
  Clustering best;
  double best_sil = -std::numeric_limits<double>::infinity();
  for (int k = 2; k <= hi; ++k) {
    Clustering c = kmeans(points, k, restarts, derive_seed(seed, "k" + std::to_string(k)));
    if (c.silhouette_index > best_sil) {
      best_sil = c.silhouette_index;
      best_k = k;
      best = std::move(c);
    }
  }
  return {best_k, std::move(best)};
}

// --------------------------------------------------------------------------
// Similar-user selection
// --------------------------------------------------------------------------

struct SimilarUsersConfig {
  double p_percent = 50.0;  // share of the test user's data spent on b_t
  int k_max = 5;
  int restarts = 10;
};

struct SimilarUsersResult {
  std::vector<std::string> similar_users;   // S, sorted
  std::vector<std::string> held_out_ids;    // O_{t,p} observation ids
  int chosen_k = 0;
  double silhouette_index = 0.0;
  bool fallback = false;
  // Per candidate: cluster id and silhouette width (only when clustering ran).
  std::vector<std::string> candidate_users;
  std::vector<int> candidate_cluster;
  std::vector<double> candidate_silhouette_width;
  std::vector<std::string> warnings;
};

// Picks the training cohort for one test user: the test user's behavior
// vector is computed from a stratified p% subset of their observations
// (held out from evaluation), candidates are clustered on the blocks the
// test user possesses, and S is the cluster whose centroid lies nearest.
// Candidates missing a required block are excluded; blocks the test user
// lacks are truncated from everyone. With fewer than 2 usable candidates
// the selection falls back to all other users, with a warning.
inline SimilarUsersResult select_similar_users(
    const std::string& test_user, std::span<const Observation> all_observations,
    const SimilarUsersConfig& cfg, std::uint64_t seed) {
  if (!(cfg.p_percent > 0.0 && cfg.p_percent < 100.0)) {
    throw std::invalid_argument(
        "similar-users subset percentage must lie in (0, 100); got " +
        std::to_string(cfg.p_percent));
  }
  std::map<std::string, std::vector<const Observation*>> by_user;
  for (const auto& o : all_observations) by_user[o.user_id].push_back(&o);
  auto t_it = by_user.find(test_user);
  if (t_it == by_user.end() || t_it->second.empty()) {
    throw std::invalid_argument("test user has no observations: " + test_user);
  }
  const std::size_t n_features = t_it->second.front()->features.size();

  SimilarUsersResult result;

  // Stratified O_{t,p}: at least one observation per present level so the
  // subset's block availability matches the full data.
  std::array<std::vector<const Observation*>, kNumLevels> t_by_level;
  for (const auto* o : t_it->second) {
    t_by_level[static_cast<std::size_t>(level_code(o->label))].push_back(o);
  }
  std::mt19937_64 rng(derive_seed(seed, "otp:" + test_user));
  std::vector<Observation> subset;
  for (auto& members : t_by_level) {
    if (members.empty()) continue;
    deterministic_shuffle(members, rng);
    std::size_t take = static_cast<std::size_t>(
        std::llround(static_cast<double>(members.size()) * cfg.p_percent / 100.0));
    take = std::clamp<std::size_t>(take, 1, members.size());
    for (std::size_t i = 0; i < take; ++i) {
      subset.push_back(*members[i]);
      result.held_out_ids.push_back(observation_id(*members[i]));
    }
  }
  std::sort(result.held_out_ids.begin(), result.held_out_ids.end());

  const BehaviorVector bt = behavior_vector(subset, n_features);

  std::vector<std::string> others;
  for (const auto& [user, obs] : by_user) {
    if (user != test_user) others.push_back(user);
  }

  if (!bt.usable()) {
    result.warnings.push_back("test user " + test_user +
                              " has a single stress level; falling back to "
                              "all other users");
    result.fallback = true;
    result.similar_users = others;
    return result;
  }

  // Candidate vectors from each other user's full data, truncated to the
  // blocks the test user possesses.
  std::vector<std::string> usable_users;
  std::vector<std::vector<double>> usable_vectors;
  for (const std::string& user : others) {
    const auto& obs_ptrs = by_user[user];
    std::vector<Observation> obs;
    obs.reserve(obs_ptrs.size());
    for (const auto* o : obs_ptrs) obs.push_back(*o);
    const BehaviorVector bu = behavior_vector(obs, n_features);
    bool ok = true;
    for (std::size_t b = 0; b < 3; ++b) {
      if (bt.block_defined[b] && !bu.block_defined[b]) ok = false;
    }
    if (!ok) continue;
    std::vector<double> truncated;
    for (std::size_t b = 0; b < 3; ++b) {
      if (!bt.block_defined[b]) continue;
      truncated.insert(truncated.end(),
                       bu.entries.begin() + static_cast<std::ptrdiff_t>(b * n_features),
                       bu.entries.begin() + static_cast<std::ptrdiff_t>((b + 1) * n_features));
    }
    usable_users.push_back(user);
    usable_vectors.push_back(std::move(truncated));
  }

  if (usable_users.size() < 3) {
    result.fallback = true;
    if (usable_users.size() < 2) {
      result.warnings.push_back(
          "fewer than 2 usable candidate behavior vectors for " + test_user +
          "; falling back to all other users");
      result.similar_users = others;
    } else {
      result.warnings.push_back(
          "too few usable candidates to cluster for " + test_user +
          "; using the usable candidates directly");
      result.similar_users = usable_users;
    }
    return result;
  }

  // Standardise each coordinate across candidates; raw feature scales
  // differ by orders of magnitude and would dominate the geometry.
  std::vector<double> bt_truncated;
  for (std::size_t b = 0; b < 3; ++b) {
    if (!bt.block_defined[b]) continue;
    bt_truncated.insert(bt_truncated.end(),
                        bt.entries.begin() + static_cast<std::ptrdiff_t>(b * n_features),
                        bt.entries.begin() + static_cast<std::ptrdiff_t>((b + 1) * n_features));
  }
  const std::size_t dim = bt_truncated.size();
  for (std::size_t d = 0; d < dim; ++d) {
    KahanSum s;
    for (const auto& v : usable_vectors) s.add(v[d]);
    const double mean = s.value() / static_cast<double>(usable_vectors.size());
    KahanSum sq;
    for (const auto& v : usable_vectors) sq.add((v[d] - mean) * (v[d] - mean));
    const double sd =
        std::sqrt(sq.value() / static_cast<double>(usable_vectors.size()));
    for (auto& v : usable_vectors) {
      v[d] = sd > 0.0 ? (v[d] - mean) / sd : 0.0;
    }
    bt_truncated[d] = sd > 0.0 ? (bt_truncated[d] - mean) / sd : 0.0;
  }

  auto [k, clustering] = select_k(usable_vectors, cfg.k_max, cfg.restarts,
                                  derive_seed(seed, "cluster:" + test_user));
  result.chosen_k = k;
  result.silhouette_index = clustering.silhouette_index;
  result.candidate_users = usable_users;
  result.candidate_cluster = clustering.assignment;
  if (!clustering.silhouette_degenerate) {
    result.candidate_silhouette_width =
        silhouette_widths(usable_vectors, clustering.assignment);
  } else {
    result.candidate_silhouette_width.assign(usable_users.size(), 0.0);
    result.warnings.push_back("degenerate clustering geometry for " + test_user);
  }

  int nearest = 0;
  double nearest_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < k; ++c) {
    bool empty = true;
    for (int a : clustering.assignment) {
      if (a == c) {
        empty = false;
        break;
      }
    }
    if (empty) continue;
    const double d =
        detail::sq_dist(bt_truncated, clustering.centroids[static_cast<std::size_t>(c)]);
    if (d < nearest_d) {
      nearest_d = d;
      nearest = c;
    }
  }
  for (std::size_t i = 0; i < usable_users.size(); ++i) {
    if (clustering.assignment[i] == nearest) {
      result.similar_users.push_back(usable_users[i]);
    }
  }
  std::sort(result.similar_users.begin(), result.similar_users.end());
  return result;
}

}  // namespace stresskit
