#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "stresskit/common.hpp"
#include "stresskit/features.hpp"
#include "stresskit/ingest.hpp"

namespace stresskit {

// 5-point self-report collapsed to the ordinal scale: 1,2 -> Low,
// 3 -> Medium, 4,5 -> High.
inline StressLevel bin_stress(int raw_score) {
  switch (raw_score) {
    case 1:
    case 2: return StressLevel::Low;
    case 3: return StressLevel::Medium;
    case 4:
    case 5: return StressLevel::High;
    default:
      throw std::invalid_argument("stress score outside 1..5: " +
                                  std::to_string(raw_score));
  }
}

inline constexpr int kNumAggregates = 3;
inline constexpr int kNumObservationFeatures =
    kNumWindowFeatures * kNumAggregates;  // 102

// Aggregate columns are laid out feature-major: mean_f, max_f, min_f for
// each base feature in canonical order.
inline std::vector<std::string> aggregate_feature_names() {
  static const std::array<const char*, kNumAggregates> aggs = {"mean", "max",
                                                               "min"};
  std::vector<std::string> names;
  names.reserve(kNumObservationFeatures);
  for (const char* feature : kFeatureNames) {
    for (const char* agg : aggs) {
      names.push_back(std::string(agg) + "_" + feature);
    }
  }
  return names;
}

// One classifier training record: the 102 aggregates of the window features
// inside the 2-hour horizon before a slot-2 or slot-3 survey, labeled with
// that survey's binned stress level.
struct Observation {
  std::string user_id;
  std::int64_t survey_ts = 0;
  int day_slot = 0;
  StressLevel label = StressLevel::Low;
  std::vector<double> features;  // kNumObservationFeatures values
  int window_count = 0;
};

// Stable identifier used by the evaluation leakage audits.
inline std::string observation_id(const Observation& o) {
  return o.user_id + ":" + std::to_string(o.survey_ts) + ":" +
         std::to_string(o.day_slot);
}

struct ObservationConfig {
  double lookback_hours = 2.0;
  int min_windows = 1;
};

struct DroppedSurvey {
  std::string user_id;
  std::int64_t survey_ts = 0;
  int day_slot = 0;
  std::string reason;
};

struct ObservationBuild {
  std::vector<Observation> observations;
  std::vector<DroppedSurvey> dropped;
};

// Builds observations for every slot-2 and slot-3 survey. The lookback
// interval is half-open: windows with end_ts in (survey_ts - lookback,
// survey_ts] qualify. Surveys with fewer than min_windows qualifying
// windows yield no observation and are reported, never imputed; slot-1
// surveys are skipped because no accelerometer data precedes them.
inline ObservationBuild build_observations(
    std::span<const WindowFeatures> windows,
    std::span<const SurveyResponse> surveys,
    const ObservationConfig& cfg = {}) {
  const auto lookback_ms =
      static_cast<std::int64_t>(cfg.lookback_hours * 3600.0 * 1000.0);

  std::map<std::string, std::vector<const WindowFeatures*>> by_user;
  for (const auto& w : windows) by_user[w.user_id].push_back(&w);
  for (auto& [user, list] : by_user) {
    std::sort(list.begin(), list.end(), [](const auto* a, const auto* b) {
      return a->end_ts < b->end_ts;
    });
  }

  ObservationBuild out;
  for (const auto& survey : surveys) {
    if (survey.day_slot == 1) continue;

    auto it = by_user.find(survey.user_id);
    const std::vector<const WindowFeatures*> empty;
    const auto& list = it == by_user.end() ? empty : it->second;

    auto lo = std::lower_bound(list.begin(), list.end(),
                               survey.timestamp_ms - lookback_ms,
                               [](const WindowFeatures* w, std::int64_t t) {
                                 return w->end_ts <= t;
                               });
    auto hi = std::upper_bound(lo, list.end(), survey.timestamp_ms,
                               [](std::int64_t t, const WindowFeatures* w) {
                                 return t < w->end_ts;
                               });
    const int count = static_cast<int>(hi - lo);
    if (count < cfg.min_windows || count == 0) {
      out.dropped.push_back({survey.user_id, survey.timestamp_ms,
                             survey.day_slot,
                             "no window features in lookback"});
      continue;
    }

    Observation obs;
    obs.user_id = survey.user_id;
    obs.survey_ts = survey.timestamp_ms;
    obs.day_slot = survey.day_slot;
    obs.label = bin_stress(survey.raw_score);
    obs.window_count = count;
    obs.features.resize(kNumObservationFeatures);
    for (int f = 0; f < kNumWindowFeatures; ++f) {
      KahanSum sum;
      double mx = (*lo)->values[f];
      double mn = mx;
      for (auto w = lo; w != hi; ++w) {
        const double v = (*w)->values[f];
        sum.add(v);
        mx = std::max(mx, v);
        mn = std::min(mn, v);
      }
      obs.features[3 * f + 0] = sum.value() / count;
      obs.features[3 * f + 1] = mx;
      obs.features[3 * f + 2] = mn;
    }
    out.observations.push_back(std::move(obs));
  }
  return out;
}

struct ClassCounts {
  std::array<std::size_t, kNumLevels> per_level{};
  std::size_t total = 0;
};

inline ClassCounts class_counts(std::span<const Observation> observations) {
  ClassCounts counts;
  for (const auto& o : observations) {
    ++counts.per_level[static_cast<std::size_t>(level_code(o.label))];
    ++counts.total;
  }
  return counts;
}

}  // namespace stresskit
