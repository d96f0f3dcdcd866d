#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "stresskit/exploratory.hpp"

using namespace stresskit;

namespace {

// 2024-01-01 is a Monday; slot times during the working day in UTC+1.
constexpr std::int64_t kMondayDay = 19723;

std::int64_t weekday_ts(int weekday_offset, int hour = 10) {
  return (kMondayDay + weekday_offset) * kMsPerDay + hour * 3'600'000LL -
         3'600'000LL;
}

}  // namespace

TEST(WeekdaySummary, ConstantScoresGiveZeroSem) {
  std::vector<SurveyResponse> surveys;
  for (int d = 0; d < 5; ++d) {
    surveys.push_back({"u1", weekday_ts(d, 9), 1, 3});
    surveys.push_back({"u1", weekday_ts(d, 13), 2, 3});
  }
  const auto summary = weekday_stress_summary(surveys);
  ASSERT_EQ(summary.entries.size(), 5u);
  for (const auto& e : summary.entries) {
    EXPECT_DOUBLE_EQ(e.mean, 3.0);
    EXPECT_DOUBLE_EQ(e.sem, 0.0);
  }
}

TEST(WeekdaySummary, TwoScoresGiveKnownSem) {
  std::vector<SurveyResponse> surveys = {{"u1", weekday_ts(0, 9), 1, 2},
                                         {"u2", weekday_ts(0, 13), 2, 4}};
  const auto summary = weekday_stress_summary(surveys);
  ASSERT_EQ(summary.entries.size(), 1u);
  EXPECT_EQ(summary.entries[0].weekday, 0);
  EXPECT_DOUBLE_EQ(summary.entries[0].mean, 3.0);
  EXPECT_DOUBLE_EQ(summary.entries[0].sem, 1.0);  // sd/sqrt(n) = sqrt(2)/sqrt(2)
  EXPECT_EQ(summary.flags.size(), 4u);  // other weekdays have no data
}

TEST(WeekdaySummary, WeekendTimestampsExcluded) {
  std::vector<SurveyResponse> surveys = {{"u1", weekday_ts(5, 10), 1, 5},
                                         {"u1", weekday_ts(6, 10), 2, 5},
                                         {"u1", weekday_ts(1, 10), 1, 2}};
  const auto summary = weekday_stress_summary(surveys);
  ASSERT_EQ(summary.entries.size(), 1u);
  EXPECT_EQ(summary.entries[0].weekday, 1);
  EXPECT_EQ(summary.entries[0].n, 1u);
}

TEST(WeekdaySummary, EmptyInputThrows) {
  EXPECT_THROW(weekday_stress_summary({}), std::invalid_argument);
}

TEST(MannWhitney, FullySeparatedTriplesGiveZeroU) {
  const std::vector<double> a = {1, 2, 3}, b = {4, 5, 6};
  const auto r = mann_whitney_u(a, b);
  EXPECT_DOUBLE_EQ(r.u, 0.0);
  EXPECT_DOUBLE_EQ(r.p, 0.1);  // 2 of C(6,3)=20 assignments reach min-U 0
  EXPECT_FALSE(r.degenerate);
}

TEST(MannWhitney, IdenticalMultisetsGiveHalfMaxU) {
  const std::vector<double> a = {1, 2, 3}, b = {1, 2, 3};
  const auto r = mann_whitney_u(a, b);
  EXPECT_DOUBLE_EQ(r.u, 4.5);  // |a||b|/2
  EXPECT_DOUBLE_EQ(r.p, 1.0);
}

TEST(MannWhitney, InterleavedPairsGiveUOne) {
  const std::vector<double> a = {1, 3}, b = {2, 4};
  const auto r = mann_whitney_u(a, b);
  EXPECT_DOUBLE_EQ(r.u, 1.0);
}

TEST(MannWhitney, AllValuesIdenticalIsDegenerate) {
  const std::vector<double> a = {2, 2, 2}, b = {2, 2};
  const auto r = mann_whitney_u(a, b);
  EXPECT_TRUE(r.degenerate);
  EXPECT_DOUBLE_EQ(r.p, 1.0);
}

TEST(MannWhitney, SymmetricInArguments) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> a(3 + next_below(rng, 12));
    std::vector<double> b(3 + next_below(rng, 12));
    for (double& v : a) v = next_below(rng, 8);  // discrete values force ties
    for (double& v : b) v = next_below(rng, 8);
    const auto ab = mann_whitney_u(a, b);
    const auto ba = mann_whitney_u(b, a);
    EXPECT_DOUBLE_EQ(ab.u, ba.u);
    EXPECT_DOUBLE_EQ(ab.p, ba.p);
    EXPECT_GE(ab.u, 0.0);
    EXPECT_LE(ab.u, static_cast<double>(a.size() * b.size()));
    EXPECT_GE(ab.p, 0.0);
    EXPECT_LE(ab.p, 1.0);
  }
}

TEST(MannWhitney, LargeSampleApproximationIsCalibrated) {
  // Well-separated large samples: p must be tiny; identical: p near 1.
  std::vector<double> lo(30), hi(30);
  for (int i = 0; i < 30; ++i) {
    lo[static_cast<std::size_t>(i)] = i;
    hi[static_cast<std::size_t>(i)] = 100 + i;
  }
  EXPECT_LT(mann_whitney_u(lo, hi).p, 1e-9);
  EXPECT_GT(mann_whitney_u(lo, lo).p, 0.9);
}

TEST(CohensD, ZeroMeanDifferenceIsNegligible) {
  const std::vector<double> a = {1, 2, 3}, b = {2, 1, 3};
  const auto r = cohens_d(a, b);
  EXPECT_DOUBLE_EQ(r.d, 0.0);
  EXPECT_EQ(r.label, EffectLabel::Negligible);
}

TEST(CohensD, UnitPooledSdGivesExactD) {
  // Both samples have sample variance exactly 1, so pooled sd is exactly 1.
  const std::vector<double> a = {-1, 0, 1};
  const std::vector<double> b = {-0.5, 0.5, 1.5};
  const auto r = cohens_d(a, b);
  EXPECT_DOUBLE_EQ(r.d, -0.5);
  EXPECT_EQ(r.label, EffectLabel::Medium);  // boundary takes the larger label
}

TEST(CohensD, LargeEffect) {
  const std::vector<double> a = {-1, 0, 1};
  const std::vector<double> b = {-3, -2, -1};
  const auto r = cohens_d(a, b);
  EXPECT_DOUBLE_EQ(r.d, 2.0);
  EXPECT_EQ(r.label, EffectLabel::Large);
}

TEST(CohensD, AntisymmetricAndScaleInvariant) {
  std::mt19937_64 rng(22);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<double> a(5), b(7);
    for (double& v : a) v = next_uniform(rng) * 3;
    for (double& v : b) v = next_uniform(rng) * 3 + 0.5;
    const auto ab = cohens_d(a, b);
    const auto ba = cohens_d(b, a);
    EXPECT_NEAR(ab.d, -ba.d, 1e-12);
    const double c = -2.5;
    std::vector<double> ca = a, cb = b;
    for (double& v : ca) v *= c;
    for (double& v : cb) v *= c;
    const auto scaled = cohens_d(ca, cb);
    EXPECT_NEAR(scaled.d, -ab.d, 1e-9);  // sign(c) * d
  }
}

TEST(CohensD, ZeroPooledSpreadIsDegenerate) {
  const std::vector<double> a = {2, 2, 2}, b = {2, 2};
  const auto r = cohens_d(a, b);
  EXPECT_TRUE(std::isnan(r.d));
  EXPECT_EQ(r.label, EffectLabel::Degenerate);
}

TEST(CohensD, TooFewValuesThrows) {
  const std::vector<double> one = {1.0}, two = {1.0, 2.0};
  EXPECT_THROW(cohens_d(one, two), std::invalid_argument);
}

TEST(EffectLabels, BoundaryProbesTakeLargerLabel) {
  EXPECT_EQ(effect_size_label(0.19), EffectLabel::Negligible);
  EXPECT_EQ(effect_size_label(0.2), EffectLabel::Small);
  EXPECT_EQ(effect_size_label(0.49), EffectLabel::Small);
  EXPECT_EQ(effect_size_label(0.5), EffectLabel::Medium);
  EXPECT_EQ(effect_size_label(0.79), EffectLabel::Medium);
  EXPECT_EQ(effect_size_label(0.8), EffectLabel::Large);
  EXPECT_EQ(effect_size_label(-0.2), EffectLabel::Small);
  EXPECT_EQ(effect_size_label(-0.8), EffectLabel::Large);
}

TEST(Bonferroni, CorrectionNeverBelowRaw) {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 200; ++rep) {
    const double p = next_uniform(rng);
    const std::size_t m = 1 + next_below(rng, 300);
    const double pc = bonferroni_correct(p, m);
    EXPECT_GE(pc, p);
    EXPECT_LE(pc, 1.0);
  }
}

TEST(FeatureScreen, SingleLevelUserGivesEmptyResultWithFlag) {
  std::vector<Observation> obs = {
      oracles::make_obs("u1", StressLevel::Low, {1.0, 2.0}),
      oracles::make_obs("u1", StressLevel::Low, {1.5, 2.5}),
  };
  const auto screen = feature_level_screen(obs);
  EXPECT_TRUE(screen.results.empty());
  ASSERT_EQ(screen.flags.size(), 1u);
  EXPECT_NE(screen.flags[0].find("fewer than 2"), std::string::npos);
}

TEST(FeatureScreen, ConstantFeatureIsDegenerate) {
  std::vector<Observation> obs;
  for (int i = 0; i < 6; ++i) {
    obs.push_back(oracles::make_obs(
        "u1", i % 2 == 0 ? StressLevel::Low : StressLevel::High, {7.0}, i));
  }
  const auto screen = feature_level_screen(obs);
  ASSERT_EQ(screen.results.size(), 1u);  // one feature, one testable pair
  EXPECT_DOUBLE_EQ(screen.results[0].p_raw, 1.0);
  EXPECT_FALSE(screen.results[0].significant);
  EXPECT_EQ(screen.results[0].effect, EffectLabel::Degenerate);
}

TEST(FeatureScreen, StrongSyntheticSeparationIsSignificantAndLarge) {
  std::mt19937_64 rng(24);
  GaussianSampler<std::mt19937_64> gauss;
  std::vector<Observation> obs;
  for (int i = 0; i < 50; ++i) {
    obs.push_back(oracles::make_obs("u1", StressLevel::Low, {gauss(rng)}, i));
    obs.push_back(
        oracles::make_obs("u1", StressLevel::High, {3.0 + gauss(rng)}, 100 + i));
  }
  const auto screen = feature_level_screen(obs);
  ASSERT_EQ(screen.results.size(), 1u);
  const auto& r = screen.results[0];
  EXPECT_TRUE(r.significant);
  EXPECT_LT(r.p_corrected, 0.01);
  EXPECT_EQ(r.effect, EffectLabel::Large);
  EXPECT_GE(r.p_corrected, r.p_raw);
  EXPECT_EQ(screen.bonferroni_m, 1u);
}

TEST(FeatureScreen, AbsentPairSkippedAndFlagged) {
  std::vector<Observation> obs;
  for (int i = 0; i < 4; ++i) {
    obs.push_back(oracles::make_obs(
        "u1", i % 2 == 0 ? StressLevel::Low : StressLevel::Medium, {1.0 * i}, i));
  }
  const auto screen = feature_level_screen(obs);
  // Only the Low/Medium pair is testable; the High pairs are flagged.
  EXPECT_EQ(screen.results.size(), 1u);
  EXPECT_EQ(screen.flags.size(), 2u);
  EXPECT_EQ(screen.bonferroni_m, 1u);
}

TEST(WindowLevelScreen, LabelsWindowsByLookbackSurvey) {
  // Three windows: one inside each survey's lookback, one in neither.
  std::vector<WindowFeatures> windows;
  for (std::int64_t end_ts : {9'000'000, 20'000'000, 40'000'000}) {
    WindowFeatures w;
    w.user_id = "u1";
    w.end_ts = end_ts;
    w.values.fill(1.0);
    windows.push_back(w);
  }
  std::vector<SurveyResponse> surveys = {
      {"u1", 10'000'000, 2, 1},   // lookback (2.8e6, 1e7]
      {"u1", 21'000'000, 3, 5},   // lookback (1.38e7, 2.1e7]
      {"u1", 41'000'000, 1, 3}};  // slot 1: never used
  const auto [rows, labels] = label_windows(windows, surveys);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(labels[0], StressLevel::Low);
  EXPECT_EQ(labels[1], StressLevel::High);
  EXPECT_EQ(rows[0].size(), static_cast<std::size_t>(kNumWindowFeatures));
}

TEST(FeatureScreen, BonferroniCountsFeaturesTimesPairs) {
  std::mt19937_64 rng(25);
  std::vector<Observation> obs;
  for (int i = 0; i < 12; ++i) {
    obs.push_back(oracles::make_obs(
        "u1", level_from_code(i % 3), {next_uniform(rng), next_uniform(rng)}, i));
  }
  const auto screen = feature_level_screen(obs);
  EXPECT_EQ(screen.bonferroni_m, 6u);  // 2 features x 3 pairs
  EXPECT_EQ(screen.results.size(), 6u);
  for (const auto& r : screen.results) {
    EXPECT_GE(r.p_corrected, r.p_raw);
  }
}
