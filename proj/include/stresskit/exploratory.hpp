#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "stresskit/common.hpp"
#include "stresskit/observations.hpp"

namespace stresskit {

// --------------------------------------------------------------------------
// Weekday summary
// --------------------------------------------------------------------------

struct WeekdaySummary {
  struct Entry {
    int weekday = 0;  // 0 = Monday .. 4 = Friday
    std::size_t n = 0;
    double mean = 0.0;
    double sem = 0.0;  // sample sd / sqrt(n); 0 when n < 2
  };
  std::vector<Entry> entries;
  std::vector<std::string> flags;
};

inline constexpr std::array<const char*, 7> kWeekdayNames = {
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday",
    "sunday"};

// Mean and standard error of the raw 1..5 scores per weekday Mon-Fri over
// all users and all three slots. Weekend timestamps are excluded.
inline WeekdaySummary weekday_stress_summary(
    std::span<const SurveyResponse> surveys, int utc_offset_minutes = 60) {
  if (surveys.empty()) {
    throw std::invalid_argument("weekday summary needs at least one survey");
  }
  std::array<std::vector<double>, 5> scores;
  for (const auto& s : surveys) {
    const int wd = weekday(s.timestamp_ms, utc_offset_minutes);
    if (wd >= 5) continue;
    scores[static_cast<std::size_t>(wd)].push_back(s.raw_score);
  }
  WeekdaySummary out;
  for (int wd = 0; wd < 5; ++wd) {
    const auto& v = scores[static_cast<std::size_t>(wd)];
    if (v.empty()) {
      out.flags.push_back(std::string("no surveys on ") +
                          kWeekdayNames[static_cast<std::size_t>(wd)]);
      continue;
    }
    WeekdaySummary::Entry e;
    e.weekday = wd;
    e.n = v.size();
    e.mean = kahan_mean(v.begin(), v.end());
    if (v.size() >= 2) {
      KahanSum sq;
      for (double x : v) sq.add((x - e.mean) * (x - e.mean));
      const double sample_var = sq.value() / static_cast<double>(v.size() - 1);
      e.sem = std::sqrt(sample_var / static_cast<double>(v.size()));
    }
    out.entries.push_back(e);
  }
  return out;
}

// --------------------------------------------------------------------------
// Mann-Whitney U
// --------------------------------------------------------------------------

struct MannWhitneyResult {
  double u = 0.0;   // min(U_a, U_b), midrank tie handling
  double p = 1.0;   // two-sided
  bool degenerate = false;
};

namespace detail {

inline std::vector<double> midranks(std::span<const double> pooled_sorted) {
  const std::size_t n = pooled_sorted.size();
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && pooled_sorted[j + 1] == pooled_sorted[i]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[k] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

// Two-sided Mann-Whitney U. U = min(U_a, U_b) with midrank tie handling.
// For combined n <= 20 the p-value is the exact permutation tail
// P(min-U <= observed); larger samples use the normal approximation with
// tie and continuity corrections. Identical pooled values degenerate to
// p = 1 with a flag.
inline MannWhitneyResult mann_whitney_u(std::span<const double> a,
                                        std::span<const double> b) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("mann_whitney_u needs non-empty samples");
  }
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;

  // (value, is_a) sorted by value; midranks over the pooled sample.
  std::vector<std::pair<double, bool>> pooled;
  pooled.reserve(n);
  for (double v : a) pooled.push_back({v, true});
  for (double v : b) pooled.push_back({v, false});
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = pooled[i].first;
  const std::vector<double> ranks = detail::midranks(values);

  double rank_sum_a = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (pooled[i].second) rank_sum_a += ranks[i];
  }
  const double ua = rank_sum_a - static_cast<double>(na) *
                                     static_cast<double>(na + 1) / 2.0;
  const double ub = static_cast<double>(na) * static_cast<double>(nb) - ua;
  MannWhitneyResult res;
  res.u = std::min(ua, ub);

  const bool all_tied = values.front() == values.back();
  if (all_tied) {
    res.p = 1.0;
    res.degenerate = true;
    return res;
  }

  if (n <= 20) {
    // Exact enumeration over all C(n, na) group assignments of the midranks.
    std::vector<std::size_t> comb(na);
    for (std::size_t i = 0; i < na; ++i) comb[i] = i;
    std::size_t total = 0, at_or_below = 0;
    const double u_obs = res.u + 1e-9;
    while (true) {
      double rs = 0.0;
      for (std::size_t idx : comb) rs += ranks[idx];
      const double cua =
          rs - static_cast<double>(na) * static_cast<double>(na + 1) / 2.0;
      const double cu = std::min(cua, static_cast<double>(na * nb) - cua);
      ++total;
      if (cu <= u_obs) ++at_or_below;
      // next combination
      std::size_t i = na;
      while (i > 0 && comb[i - 1] == n - na + i - 1) --i;
      if (i == 0) break;
      ++comb[i - 1];
      for (std::size_t j = i; j < na; ++j) comb[j] = comb[j - 1] + 1;
    }
    res.p = static_cast<double>(at_or_below) / static_cast<double>(total);
    return res;
  }

  // Normal approximation with tie correction.
  double tie_term = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[j + 1] == values[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  const double mu = static_cast<double>(na) * static_cast<double>(nb) / 2.0;
  const double var =
      static_cast<double>(na) * static_cast<double>(nb) / 12.0 *
      (static_cast<double>(n + 1) -
       tie_term / (static_cast<double>(n) * static_cast<double>(n - 1)));
  if (var <= 0.0) {
    res.p = 1.0;
    res.degenerate = true;
    return res;
  }
  const double z = (res.u - mu + 0.5) / std::sqrt(var);
  res.p = std::min(1.0, 2.0 * std_normal_cdf(z));
  return res;
}

// --------------------------------------------------------------------------
// Cohen's d
// --------------------------------------------------------------------------

enum class EffectLabel { Negligible, Small, Medium, Large, Degenerate };

inline const char* effect_label_name(EffectLabel l) {
  switch (l) {
    case EffectLabel::Negligible: return "negligible";
    case EffectLabel::Small: return "small";
    case EffectLabel::Medium: return "medium";
    case EffectLabel::Large: return "large";
    case EffectLabel::Degenerate: return "degenerate";
  }
  return "?";
}

// Thresholds are strict '<', so a |d| exactly on a boundary takes the
// larger label.
inline EffectLabel effect_size_label(double d) {
  if (std::isnan(d)) return EffectLabel::Degenerate;
  const double a = std::abs(d);
  if (a < 0.2) return EffectLabel::Negligible;
  if (a < 0.5) return EffectLabel::Small;
  if (a < 0.8) return EffectLabel::Medium;
  return EffectLabel::Large;
}

struct CohensD {
  double d = 0.0;
  EffectLabel label = EffectLabel::Negligible;
};

// d = (mean(a) - mean(b)) / pooled sd, sample variances (n-1 denominators).
// Zero pooled spread leaves d undefined (NaN) with a degenerate label.
inline CohensD cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw std::invalid_argument("cohens_d needs >= 2 values per sample");
  }
  auto sample_var = [](std::span<const double> v) {
    const double m = kahan_mean(v.begin(), v.end());
    KahanSum s;
    for (double x : v) s.add((x - m) * (x - m));
    return s.value() / static_cast<double>(v.size() - 1);
  };
  const double ma = kahan_mean(a.begin(), a.end());
  const double mb = kahan_mean(b.begin(), b.end());
  const double va = sample_var(a);
  const double vb = sample_var(b);
  const double pooled =
      std::sqrt((static_cast<double>(a.size() - 1) * va +
                 static_cast<double>(b.size() - 1) * vb) /
                static_cast<double>(a.size() + b.size() - 2));
  CohensD out;
  if (pooled == 0.0) {
    out.d = std::numeric_limits<double>::quiet_NaN();
    out.label = EffectLabel::Degenerate;
    return out;
  }
  out.d = (ma - mb) / pooled;
  out.label = effect_size_label(out.d);
  return out;
}

inline double bonferroni_correct(double p_raw, std::size_t m) {
  return std::min(1.0, p_raw * static_cast<double>(m));
}

// --------------------------------------------------------------------------
// Per-user feature screen
// --------------------------------------------------------------------------

enum class LevelPair { LowMedium = 0, LowHigh = 1, MediumHigh = 2 };

inline constexpr std::array<std::pair<StressLevel, StressLevel>, 3>
    kLevelPairs = {{{StressLevel::Low, StressLevel::Medium},
                    {StressLevel::Low, StressLevel::High},
                    {StressLevel::Medium, StressLevel::High}}};

inline const char* level_pair_name(LevelPair p) {
  switch (p) {
    case LevelPair::LowMedium: return "low_medium";
    case LevelPair::LowHigh: return "low_high";
    case LevelPair::MediumHigh: return "medium_high";
  }
  return "?";
}

struct PairTestResult {
  std::string user_id;
  int feature_index = 0;
  LevelPair pair = LevelPair::LowMedium;
  double u_stat = 0.0;
  double p_raw = 1.0;
  double p_corrected = 1.0;
  bool significant = false;
  double d = 0.0;
  EffectLabel effect = EffectLabel::Degenerate;
};

struct ScreenConfig {
  double alpha = 0.01;
};

struct ScreenResult {
  std::vector<PairTestResult> results;
  std::vector<std::string> flags;
  std::size_t bonferroni_m = 0;
};

// Generic screen over a feature matrix: per feature and per stress-level
// pair with both sides non-empty, a Mann-Whitney U test plus Cohen's d.
// The Bonferroni multiplicity is features x testable pairs, counted per
// screened unit.
inline ScreenResult screen_feature_matrix(
    const std::string& unit_id,
    const std::vector<const std::vector<double>*>& rows,
    std::span<const StressLevel> labels, std::size_t n_features,
    const ScreenConfig& cfg = {}) {
  ScreenResult out;
  std::array<std::vector<std::size_t>, kNumLevels> level_rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    level_rows[static_cast<std::size_t>(level_code(labels[i]))].push_back(i);
  }
  int present = 0;
  for (const auto& lr : level_rows) present += lr.empty() ? 0 : 1;
  if (present < 2) {
    out.flags.push_back(unit_id + ": fewer than 2 stress levels present");
    return out;
  }

  std::vector<LevelPair> testable;
  for (int p = 0; p < 3; ++p) {
    const auto [la, lb] = kLevelPairs[static_cast<std::size_t>(p)];
    if (!level_rows[static_cast<std::size_t>(level_code(la))].empty() &&
        !level_rows[static_cast<std::size_t>(level_code(lb))].empty()) {
      testable.push_back(static_cast<LevelPair>(p));
    } else {
      out.flags.push_back(unit_id + ": pair " +
                          level_pair_name(static_cast<LevelPair>(p)) +
                          " not testable");
    }
  }
  out.bonferroni_m = n_features * testable.size();

  for (std::size_t f = 0; f < n_features; ++f) {
    for (LevelPair pair : testable) {
      const auto [la, lb] = kLevelPairs[static_cast<std::size_t>(pair)];
      std::vector<double> a, b;
      for (std::size_t i :
           level_rows[static_cast<std::size_t>(level_code(la))]) {
        a.push_back((*rows[i])[f]);
      }
      for (std::size_t i :
           level_rows[static_cast<std::size_t>(level_code(lb))]) {
        b.push_back((*rows[i])[f]);
      }
      PairTestResult r;
      r.user_id = unit_id;
      r.feature_index = static_cast<int>(f);
      r.pair = pair;
      const auto mw = mann_whitney_u(a, b);
      r.u_stat = mw.u;
      r.p_raw = mw.p;
      r.p_corrected = bonferroni_correct(mw.p, out.bonferroni_m);
      r.significant = r.p_corrected < cfg.alpha;
      if (a.size() >= 2 && b.size() >= 2) {
        const auto cd = cohens_d(a, b);
        r.d = cd.d;
        r.effect = cd.label;
      } else {
        r.d = std::numeric_limits<double>::quiet_NaN();
        r.effect = EffectLabel::Degenerate;
      }
      out.results.push_back(std::move(r));
    }
  }
  return out;
}

// Screens the 102 observation aggregates of one user.
inline ScreenResult feature_level_screen(
    std::span<const Observation> user_observations,
    const ScreenConfig& cfg = {}) {
  if (user_observations.empty()) {
    throw std::invalid_argument("feature_level_screen needs observations");
  }
  const std::string user = user_observations.front().user_id;
  const std::size_t width = user_observations.front().features.size();
  std::vector<const std::vector<double>*> rows;
  std::vector<StressLevel> labels;
  for (const auto& o : user_observations) {
    if (o.user_id != user) {
      throw std::invalid_argument(
          "feature_level_screen expects a single user's observations");
    }
    rows.push_back(&o.features);
    labels.push_back(o.label);
  }
  return screen_feature_matrix(user, rows, labels, width, cfg);
}

// Labels each window with the stress level of the slot-2/3 survey whose
// lookback it falls in, for the optional window-level screen.
inline std::pair<std::vector<std::vector<double>>, std::vector<StressLevel>>
label_windows(std::span<const WindowFeatures> windows,
              std::span<const SurveyResponse> surveys,
              const ObservationConfig& cfg = {}) {
  const auto lookback_ms =
      static_cast<std::int64_t>(cfg.lookback_hours * 3600.0 * 1000.0);
  std::vector<std::vector<double>> rows;
  std::vector<StressLevel> labels;
  for (const auto& w : windows) {
    const SurveyResponse* match = nullptr;
    for (const auto& s : surveys) {
      if (s.day_slot == 1 || s.user_id != w.user_id) continue;
      if (w.end_ts > s.timestamp_ms - lookback_ms &&
          w.end_ts <= s.timestamp_ms) {
        if (match == nullptr || s.timestamp_ms < match->timestamp_ms) {
          match = &s;
        }
      }
    }
    if (match == nullptr) continue;
    rows.emplace_back(w.values.begin(), w.values.end());
    labels.push_back(bin_stress(match->raw_score));
  }
  return {std::move(rows), std::move(labels)};
}

}  // namespace stresskit
