#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "stresskit/eval.hpp"

using namespace stresskit;

namespace {

PredictionRecord rec(StressLevel t, StressLevel p, int i = 0) {
  return {"u" + std::to_string(i % 4), i, 2, t, p};
}

// Cohort where every user shares the same level-to-feature mapping.
std::vector<Observation> homogeneous_cohort(std::mt19937_64& rng, int users,
                                            int obs_per_user) {
  std::vector<Observation> obs;
  for (int u = 0; u < users; ++u) {
    for (int i = 0; i < obs_per_user; ++i) {
      const int label = i % 3;
      obs.push_back(oracles::make_obs(
          "user" + std::to_string(u), level_from_code(label),
          {label * 2.0 + 0.1 * next_uniform(rng), next_uniform(rng)}, i));
    }
  }
  return obs;
}

// Two mirrored halves over a positive amplitude ladder, with per-user
// offsets that blur class boundaries across users but cancel in behavior
// vectors: pooled cross-user training is antagonistic, same-side training
// transfers imperfectly, within-user structure stays clean.
std::vector<Observation> mirrored_cohort(std::mt19937_64& rng, int users_per_side,
                                         int obs_per_user) {
  const std::array<double, 3> ladder = {0.45, 1.0, 1.55};
  std::vector<Observation> obs;
  for (int side = 0; side < 2; ++side) {
    for (int u = 0; u < users_per_side; ++u) {
      const double mult = 1.0 + 0.15 * (2.0 * next_uniform(rng) - 1.0);
      const double offset = 0.35 * (2.0 * next_uniform(rng) - 1.0);
      for (int i = 0; i < obs_per_user; ++i) {
        const int label = i % 3;
        const int rung = side == 0 ? label : 2 - label;
        obs.push_back(oracles::make_obs(
            (side == 0 ? "pos" : "neg") + std::to_string(u),
            level_from_code(label),
            {ladder[static_cast<std::size_t>(rung)] * mult + offset +
                 0.05 * next_uniform(rng),
             next_uniform(rng)},
            i));
      }
    }
  }
  return obs;
}

}  // namespace

TEST(Metrics, AllCorrectPredictions) {
  std::vector<PredictionRecord> log;
  for (int i = 0; i < 9; ++i) {
    log.push_back(rec(level_from_code(i % 3), level_from_code(i % 3), i));
  }
  const auto m = compute_metrics(log);
  EXPECT_DOUBLE_EQ(m.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(m.mae, 0.0);
  EXPECT_DOUBLE_EQ(m.rmse, 0.0);
  EXPECT_DOUBLE_EQ(m.acc_within_1, 1.0);
  EXPECT_DOUBLE_EQ(m.acc_within_2, 1.0);
  for (int c = 0; c < 3; ++c) {
    EXPECT_DOUBLE_EQ(*m.per_class[static_cast<std::size_t>(c)].sensitivity, 1.0);
    EXPECT_DOUBLE_EQ(*m.per_class[static_cast<std::size_t>(c)].precision, 1.0);
  }
  ASSERT_TRUE(m.pearson.has_value());
  EXPECT_NEAR(*m.pearson, 1.0, 1e-12);
}

TEST(Metrics, RotatedPredictionsHandCase) {
  const std::vector<PredictionRecord> log = {
      rec(StressLevel::Low, StressLevel::Medium, 0),
      rec(StressLevel::Medium, StressLevel::High, 1),
      rec(StressLevel::High, StressLevel::Low, 2),
  };
  const auto m = compute_metrics(log);
  EXPECT_DOUBLE_EQ(m.mae, 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.rmse, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(m.accuracy, 0.0);
  EXPECT_DOUBLE_EQ(m.acc_within_1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.acc_within_2, 1.0);
}

TEST(Metrics, ConstantPredictionsHaveNoCorrelation) {
  std::vector<PredictionRecord> log;
  for (int i = 0; i < 6; ++i) {
    log.push_back(rec(level_from_code(i % 3), StressLevel::Medium, i));
  }
  const auto m = compute_metrics(log);
  EXPECT_FALSE(m.pearson.has_value());
  EXPECT_FALSE(m.spearman.has_value());
}

TEST(Metrics, UndefinedRatiosReportedAsNotAvailable) {
  // No High predictions and no High truths: precision and sensitivity for
  // High have zero denominators.
  const std::vector<PredictionRecord> log = {
      rec(StressLevel::Low, StressLevel::Low, 0),
      rec(StressLevel::Medium, StressLevel::Low, 1),
  };
  const auto m = compute_metrics(log);
  EXPECT_FALSE(m.per_class[2].sensitivity.has_value());
  EXPECT_FALSE(m.per_class[2].precision.has_value());
  EXPECT_TRUE(m.per_class[2].specificity.has_value());
}

TEST(Metrics, EmptyLogThrows) {
  EXPECT_THROW(compute_metrics({}), std::invalid_argument);
}

TEST(Metrics, MatchesBruteForceRecomputationExactly) {
  std::mt19937_64 rng(70);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<PredictionRecord> log;
    const int n = 1 + static_cast<int>(next_below(rng, 200));
    for (int i = 0; i < n; ++i) {
      log.push_back(rec(level_from_code(static_cast<int>(next_below(rng, 3))),
                        level_from_code(static_cast<int>(next_below(rng, 3))), i));
    }
    const auto m = compute_metrics(log);
    const auto b = oracles::brute_metrics(log);
    EXPECT_EQ(m.accuracy, b.accuracy);
    EXPECT_EQ(m.mae, b.mae);
    EXPECT_EQ(m.rmse, b.rmse);
    EXPECT_EQ(m.acc_within_1, b.acc1);
    EXPECT_EQ(m.acc_within_2, b.acc2);
    EXPECT_EQ(m.pearson, b.pearson);
    EXPECT_EQ(m.spearman, b.spearman);
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(m.per_class[static_cast<std::size_t>(c)].sensitivity,
                b.sensitivity[static_cast<std::size_t>(c)]);
      EXPECT_EQ(m.per_class[static_cast<std::size_t>(c)].specificity,
                b.specificity[static_cast<std::size_t>(c)]);
      EXPECT_EQ(m.per_class[static_cast<std::size_t>(c)].precision,
                b.precision[static_cast<std::size_t>(c)]);
    }
    EXPECT_LE(m.accuracy, m.acc_within_1);
    EXPECT_DOUBLE_EQ(m.acc_within_2, 1.0);
    EXPECT_LE(m.mae, m.rmse + 1e-15);
    EXPECT_LE(m.rmse, 2.0);
  }
}

TEST(UserSpecific, SkipsUsersBelowObservationFloor) {
  std::mt19937_64 rng(71);
  auto obs = homogeneous_cohort(rng, 3, 12);
  for (int i = 0; i < 9; ++i) {
    obs.push_back(oracles::make_obs("tiny", level_from_code(i % 3), {1.0, 0.0}, i));
  }
  EvalConfig cfg;
  cfg.seed = 3;
  const auto report = run_user_specific(obs, cfg);
  ASSERT_EQ(report.skipped_users.size(), 1u);
  EXPECT_NE(report.skipped_users[0].find("tiny"), std::string::npos);
  EXPECT_EQ(report.per_user.size(), 3u);
}

TEST(UserSpecific, SkipsSingleLevelUsers) {
  std::mt19937_64 rng(72);
  auto obs = homogeneous_cohort(rng, 3, 12);
  for (int i = 0; i < 15; ++i) {
    obs.push_back(oracles::make_obs("flat", StressLevel::Low, {1.0, 0.0}, i));
  }
  EvalConfig cfg;
  cfg.seed = 3;
  const auto report = run_user_specific(obs, cfg);
  ASSERT_EQ(report.skipped_users.size(), 1u);
  EXPECT_NE(report.skipped_users[0].find("single stress level"),
            std::string::npos);
}

TEST(UserSpecific, SeparableCohortScoresHigh) {
  std::mt19937_64 rng(73);
  const auto obs = homogeneous_cohort(rng, 4, 15);
  EvalConfig cfg;
  cfg.seed = 3;
  const auto report = run_user_specific(obs, cfg);
  EXPECT_EQ(report.pooled.n, 60u);
  EXPECT_GT(report.pooled.accuracy, 0.9);
  EXPECT_EQ(report.per_user.size(), 4u);
  EXPECT_FALSE(report.traces.empty());
  // Every fitted fold model is serialized and reloadable.
  EXPECT_EQ(report.fitted_models.size(), 20u);  // 4 users x 5 folds
  for (const auto& [unit, j] : report.fitted_models) {
    EXPECT_NE(load_model(j), nullptr);
  }
}

TEST(General, RequiresAtLeastThreeUsers) {
  std::mt19937_64 rng(74);
  const auto obs = homogeneous_cohort(rng, 2, 12);
  EvalConfig cfg;
  cfg.seed = 3;
  EXPECT_THROW(run_general(obs, cfg), std::invalid_argument);
}

TEST(General, HomogeneousCohortTransfersAcrossUsers) {
  std::mt19937_64 rng(75);
  const auto obs = homogeneous_cohort(rng, 4, 15);
  EvalConfig cfg;
  cfg.seed = 3;
  const auto us = run_user_specific(obs, cfg);
  const auto gen = run_general(obs, cfg);
  EXPECT_GT(gen.pooled.accuracy, 0.9);
  EXPECT_LT(std::abs(gen.pooled.accuracy - us.pooled.accuracy), 0.1);
}

TEST(General, MirroredCohortCollapsesTowardChance) {
  std::mt19937_64 rng(76);
  const auto obs = mirrored_cohort(rng, 3, 15);
  EvalConfig cfg;
  cfg.seed = 3;
  const auto gen = run_general(obs, cfg);
  EXPECT_LT(gen.pooled.accuracy, 0.6);
  const auto sim = run_similar_users(obs, cfg);
  EXPECT_GT(sim.pooled.accuracy, 0.85);
}

TEST(SimilarUsers, RequiresAtLeastFourUsers) {
  std::mt19937_64 rng(77);
  const auto obs = homogeneous_cohort(rng, 3, 12);
  EvalConfig cfg;
  cfg.seed = 3;
  EXPECT_THROW(run_similar_users(obs, cfg), std::invalid_argument);
}

TEST(SimilarUsers, FullShareIsRejected) {
  std::mt19937_64 rng(78);
  const auto obs = homogeneous_cohort(rng, 4, 12);
  EvalConfig cfg;
  cfg.seed = 3;
  cfg.similar.p_percent = 100.0;
  EXPECT_THROW(run_similar_users(obs, cfg), std::invalid_argument);
}

TEST(SimilarUsers, HeldOutObservationsNeverEvaluated) {
  std::mt19937_64 rng(79);
  const auto obs = mirrored_cohort(rng, 3, 12);
  EvalConfig cfg;
  cfg.seed = 5;
  const auto report = run_similar_users(obs, cfg);
  ASSERT_FALSE(report.similar_units.empty());
  std::set<std::string> evaluated;
  for (const auto& r : report.log) evaluated.insert(prediction_id(r));
  for (const auto& unit : report.similar_units) {
    for (const auto& id : unit.selection.held_out_ids) {
      EXPECT_EQ(evaluated.count(id), 0u) << id;
    }
  }
}

TEST(Schemes, TrainTestIdSetsAreDisjointInEveryAudit) {
  std::mt19937_64 rng(80);
  const auto obs = mirrored_cohort(rng, 3, 12);
  EvalConfig cfg;
  cfg.seed = 5;
  for (const auto& report :
       {run_user_specific(obs, cfg), run_general(obs, cfg),
        run_similar_users(obs, cfg)}) {
    ASSERT_FALSE(report.audits.empty());
    for (const auto& audit : report.audits) {
      std::set<std::string> train(audit.train_ids.begin(), audit.train_ids.end());
      for (const auto& id : audit.test_ids) {
        EXPECT_EQ(train.count(id), 0u) << audit.unit << " leaks " << id;
      }
    }
  }
}

TEST(Schemes, ReportsAreDeterministicGivenSeed) {
  std::mt19937_64 rng(81);
  const auto obs = mirrored_cohort(rng, 3, 12);
  EvalConfig cfg;
  cfg.seed = 11;
  const auto a = run_similar_users(obs, cfg);
  const auto b = run_similar_users(obs, cfg);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].predicted, b.log[i].predicted);
    EXPECT_EQ(prediction_id(a.log[i]), prediction_id(b.log[i]));
  }
  EXPECT_EQ(a.pooled.accuracy, b.pooled.accuracy);
}

TEST(Schemes, RandomBaselineSitsNearPriorRate) {
  std::mt19937_64 rng(82);
  const auto obs = homogeneous_cohort(rng, 4, 30);
  EvalConfig cfg;
  cfg.seed = 13;
  cfg.classifier = ClassifierKind::Random;
  cfg.selection.max_features = 0;  // the baseline needs no features
  const auto report = run_user_specific(obs, cfg);
  EXPECT_GT(report.pooled.accuracy, 0.15);
  EXPECT_LT(report.pooled.accuracy, 0.55);
}

TEST(Schemes, EveryClassifierKindRunsEndToEnd) {
  std::mt19937_64 rng(84);
  const auto obs = homogeneous_cohort(rng, 4, 15);
  for (auto kind : {ClassifierKind::NaiveBayes, ClassifierKind::DecisionTree,
                    ClassifierKind::OrdinalNaiveBayes, ClassifierKind::Random}) {
    EvalConfig cfg;
    cfg.seed = 17;
    cfg.classifier = kind;
    if (kind == ClassifierKind::Random) cfg.selection.max_features = 0;
    const auto report = run_general(obs, cfg);
    EXPECT_EQ(report.pooled.n, 60u) << classifier_name(kind);
    EXPECT_GE(report.pooled.accuracy, 0.0);
    EXPECT_LE(report.pooled.accuracy, 1.0);
    if (kind != ClassifierKind::Random) {
      EXPECT_GT(report.pooled.accuracy, 0.85) << classifier_name(kind);
    }
  }
}

TEST(Schemes, WorkerCountDoesNotChangeResults) {
  std::mt19937_64 rng(83);
  const auto obs = mirrored_cohort(rng, 2, 12);
  EvalConfig serial;
  serial.seed = 21;
  EvalConfig parallel = serial;
  parallel.workers = 4;
  const auto a = run_user_specific(obs, serial);
  const auto b = run_user_specific(obs, parallel);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].predicted, b.log[i].predicted);
  }
}
