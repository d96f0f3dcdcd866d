#pragma once

#include <algorithm>
#include <array>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "stresskit/common.hpp"
#include "stresskit/models.hpp"

namespace stresskit {

// Train/test row-index pairs. The same folds are reused for every candidate
// subset inside one selection run so rounds stay comparable.
using Folds = std::vector<std::pair<std::vector<int>, std::vector<int>>>;

// Stratified k-fold over the given rows: rows of each class are shuffled
// once (seeded) and dealt round-robin, so fold class balance tracks the
// overall balance.
inline Folds stratified_kfold(std::span<const StressLevel> labels,
                              std::span<const int> rows, int k,
                              std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("k-fold needs k >= 2");
  if (static_cast<int>(rows.size()) < k) {
    throw std::invalid_argument("cannot form " + std::to_string(k) +
                                " folds from " + std::to_string(rows.size()) +
                                " rows");
  }
  std::array<std::vector<int>, kNumLevels> by_class;
  for (int r : rows) {
    by_class[static_cast<std::size_t>(level_code(labels[static_cast<std::size_t>(r)]))]
        .push_back(r);
  }
  std::mt19937_64 rng(seed);
  std::vector<std::vector<int>> fold_rows(static_cast<std::size_t>(k));
  std::size_t next = 0;
  for (auto& members : by_class) {
    deterministic_shuffle(members, rng);
    for (int r : members) {
      fold_rows[next % static_cast<std::size_t>(k)].push_back(r);
      ++next;
    }
  }
  Folds folds;
  for (int f = 0; f < k; ++f) {
    std::vector<int> train, test;
    for (int g = 0; g < k; ++g) {
      auto& src = fold_rows[static_cast<std::size_t>(g)];
      auto& dst = (g == f) ? test : train;
      dst.insert(dst.end(), src.begin(), src.end());
    }
    if (test.empty() || train.empty()) {
      throw std::invalid_argument("degenerate fold in k-fold split");
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    folds.push_back({std::move(train), std::move(test)});
  }
  return folds;
}

// Drops rows of classes with fewer than two training rows so classifier
// preconditions hold in degenerate folds; returns dropped class names.
inline std::vector<int> sanitize_training_rows(
    std::span<const StressLevel> labels, std::span<const int> rows,
    std::vector<std::string>* dropped_classes = nullptr) {
  std::array<std::size_t, kNumLevels> counts{};
  for (int r : rows) {
    ++counts[static_cast<std::size_t>(level_code(labels[static_cast<std::size_t>(r)]))];
  }
  std::vector<int> kept;
  kept.reserve(rows.size());
  for (int r : rows) {
    if (counts[static_cast<std::size_t>(level_code(labels[static_cast<std::size_t>(r)]))] >= 2) {
      kept.push_back(r);
    }
  }
  if (dropped_classes != nullptr) {
    for (int c = 0; c < kNumLevels; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 1) {
        dropped_classes->push_back(level_name(level_from_code(c)));
      }
    }
  }
  return kept;
}

// Pooled accuracy of the factory's model over the folds, trained on the
// given column subset. Per-fold engines are derived from the seed so the
// result never depends on evaluation order.
inline double cv_accuracy(const Dataset& data, const Folds& folds,
                          std::span<const int> cols,
                          const ModelFactory& factory, std::uint64_t seed) {
  std::size_t correct = 0, total = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& [train, test] = folds[f];
    const auto kept = sanitize_training_rows(data.y, train);
    if (kept.empty()) continue;
    const auto model = factory(data, kept, cols);
    std::mt19937_64 rng(derive_seed(seed, "fold" + std::to_string(f)));
    for (int r : test) {
      const auto features = gather_features(data.x[static_cast<std::size_t>(r)], cols);
      const auto pred = model->predict(features, rng);
      correct += pred.predicted == data.y[static_cast<std::size_t>(r)] ? 1 : 0;
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("cv_accuracy: no test rows");
  return static_cast<double>(correct) / static_cast<double>(total);
}

struct SelectionOptions {
  int max_features = 20;
  // 0 accepts any strict improvement; larger values demand at least that
  // much gain over the current subset.
  double min_delta = 0.0;
  int patience = 1;
  int workers = 1;
};

enum class StopReason { NoImprovement, MaxFeatures, Exhausted };

inline const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::NoImprovement: return "no-improvement";
    case StopReason::MaxFeatures: return "max-features";
    case StopReason::Exhausted: return "exhausted";
  }
  return "?";
}

struct SelectionTrace {
  struct Step {
    int feature = -1;
    double accuracy = 0.0;
  };
  std::vector<Step> steps;      // accepted features, in selection order
  std::vector<int> selected;    // same features, convenience copy
  StopReason stop = StopReason::NoImprovement;
  double baseline_accuracy = 0.0;  // prior-only model on the same folds
};

// Greedy forward selection: each round scores every unselected feature
// appended to the current subset with cv_accuracy on the fixed folds and
// keeps the best (ties to the lowest feature index). A feature enters only
// if it improves on the current accuracy (starting from the prior-only
// baseline) by min_delta, and strictly; rounds without an accepted feature
// consume patience. Note that with fixed folds a failing round repeats
// identically, so patience beyond the first failure cannot change the
// outcome.
inline SelectionTrace forward_select(const Dataset& data, const Folds& folds,
                                     const ModelFactory& factory,
                                     const SelectionOptions& opts,
                                     std::uint64_t seed) {
  const int n_features = static_cast<int>(data.feature_names.size());
  SelectionTrace trace;
  trace.baseline_accuracy =
      cv_accuracy(data, folds, std::vector<int>{}, factory, seed);
  double current = trace.baseline_accuracy;
  std::vector<bool> used(static_cast<std::size_t>(n_features), false);
  int fails = 0;

  while (true) {
    if (static_cast<int>(trace.selected.size()) >= opts.max_features) {
      trace.stop = StopReason::MaxFeatures;
      break;
    }
    std::vector<int> candidates;
    for (int f = 0; f < n_features; ++f) {
      if (!used[static_cast<std::size_t>(f)]) candidates.push_back(f);
    }
    if (candidates.empty()) {
      trace.stop = StopReason::Exhausted;
      break;
    }

    std::vector<double> scores(candidates.size());
    parallel_for(candidates.size(), opts.workers, [&](std::size_t i) {
      std::vector<int> cols = trace.selected;
      cols.push_back(candidates[i]);
      scores[i] = cv_accuracy(data, folds, cols, factory, seed);
    });

    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
      if (scores[i] > scores[best]) best = i;
    }
    const double improvement = scores[best] - current;
    if (improvement <= 0.0 || improvement < opts.min_delta) {
      if (++fails >= opts.patience) {
        trace.stop = StopReason::NoImprovement;
        break;
      }
      continue;
    }
    fails = 0;
    used[static_cast<std::size_t>(candidates[best])] = true;
    trace.selected.push_back(candidates[best]);
    trace.steps.push_back({candidates[best], scores[best]});
    current = scores[best];
  }
  return trace;
}

}  // namespace stresskit
