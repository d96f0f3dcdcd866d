#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "stresskit/common.hpp"
#include "stresskit/models.hpp"
#include "stresskit/selection.hpp"
#include "stresskit/similarity.hpp"

namespace stresskit {

// --------------------------------------------------------------------------
// Metrics
// --------------------------------------------------------------------------

struct PredictionRecord {
  std::string user_id;
  std::int64_t survey_ts = 0;
  int day_slot = 0;
  StressLevel truth = StressLevel::Low;
  StressLevel predicted = StressLevel::Low;
};

inline std::string prediction_id(const PredictionRecord& r) {
  return r.user_id + ":" + std::to_string(r.survey_ts) + ":" +
         std::to_string(r.day_slot);
}

struct ClassMetrics {
  std::optional<double> sensitivity;  // TP / (TP + FN)
  std::optional<double> specificity;  // TN / (TN + FP)
  std::optional<double> precision;    // TP / (TP + FP)
};

struct Metrics {
  std::size_t n = 0;
  double accuracy = 0.0;      // ACC0
  double mae = 0.0;
  double rmse = 0.0;
  double acc_within_1 = 0.0;  // ACC1
  double acc_within_2 = 0.0;  // ACC2; identically 1 with 3 classes
  std::optional<double> pearson;
  std::optional<double> spearman;
  std::array<ClassMetrics, kNumLevels> per_class;
};

// Canonical combination of the raw sums; both the implementation and the
// test oracle funnel their (exactly accumulated) sums through this formula.
inline std::optional<double> pearson_from_sums(double n, double st, double sp,
                                               double stt, double spp,
                                               double stp) {
  const double vt = n * stt - st * st;
  const double vp = n * spp - sp * sp;
  if (vt <= 0.0 || vp <= 0.0) return std::nullopt;  // zero variance
  return (n * stp - st * sp) / (std::sqrt(vt) * std::sqrt(vp));
}

// Midrank of each level given marginal counts over the sample, for the
// Spearman correlation on heavily tied ordinal data.
inline std::array<double, kNumLevels> level_midranks(
    const std::array<std::size_t, kNumLevels>& counts) {
  std::array<double, kNumLevels> ranks{};
  std::size_t below = 0;
  for (int c = 0; c < kNumLevels; ++c) {
    ranks[static_cast<std::size_t>(c)] =
        static_cast<double>(below) +
        (static_cast<double>(counts[static_cast<std::size_t>(c)]) + 1.0) / 2.0;
    below += counts[static_cast<std::size_t>(c)];
  }
  return ranks;
}

// Levels coded 0/1/2. Ratios with a zero denominator are reported as
// not-available, never as 0.
inline Metrics compute_metrics(std::span<const PredictionRecord> records) {
  if (records.empty()) throw std::invalid_argument("metrics: empty prediction log");
  Metrics m;
  m.n = records.size();

  std::array<std::array<std::size_t, kNumLevels>, kNumLevels> confusion{};
  long long abs_sum = 0, sq_sum = 0, within1 = 0;
  long long st = 0, sp = 0, stt = 0, spp = 0, stp = 0;
  for (const auto& r : records) {
    const int t = level_code(r.truth), p = level_code(r.predicted);
    ++confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    const int d = t > p ? t - p : p - t;
    abs_sum += d;
    sq_sum += d * d;
    within1 += d <= 1 ? 1 : 0;
    st += t;
    sp += p;
    stt += t * t;
    spp += p * p;
    stp += t * p;
  }
  const double n = static_cast<double>(m.n);
  std::size_t correct = 0;
  for (int c = 0; c < kNumLevels; ++c) {
    correct += confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
  }
  m.accuracy = static_cast<double>(correct) / n;
  m.mae = static_cast<double>(abs_sum) / n;
  m.rmse = std::sqrt(static_cast<double>(sq_sum) / n);
  m.acc_within_1 = static_cast<double>(within1) / n;
  m.acc_within_2 = 1.0;  // |t - p| <= 2 always holds for 3 levels
  m.pearson = pearson_from_sums(n, static_cast<double>(st),
                                static_cast<double>(sp), static_cast<double>(stt),
                                static_cast<double>(spp), static_cast<double>(stp));

  std::array<std::size_t, kNumLevels> t_counts{}, p_counts{};
  for (int t = 0; t < kNumLevels; ++t) {
    for (int p = 0; p < kNumLevels; ++p) {
      t_counts[static_cast<std::size_t>(t)] +=
          confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
      p_counts[static_cast<std::size_t>(p)] +=
          confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }
  }
  const auto rt = level_midranks(t_counts);
  const auto rp = level_midranks(p_counts);
  double srt = 0, srp = 0, srtt = 0, srpp = 0, srtp = 0;
  for (int t = 0; t < kNumLevels; ++t) {
    for (int p = 0; p < kNumLevels; ++p) {
      const double c = static_cast<double>(
          confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]);
      srt += c * rt[static_cast<std::size_t>(t)];
      srp += c * rp[static_cast<std::size_t>(p)];
      srtt += c * rt[static_cast<std::size_t>(t)] * rt[static_cast<std::size_t>(t)];
      srpp += c * rp[static_cast<std::size_t>(p)] * rp[static_cast<std::size_t>(p)];
      srtp += c * rt[static_cast<std::size_t>(t)] * rp[static_cast<std::size_t>(p)];
    }
  }
  m.spearman = pearson_from_sums(n, srt, srp, srtt, srpp, srtp);

  for (int c = 0; c < kNumLevels; ++c) {
    const std::size_t tp =
        confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
    const std::size_t fn = t_counts[static_cast<std::size_t>(c)] - tp;
    const std::size_t fp = p_counts[static_cast<std::size_t>(c)] - tp;
    const std::size_t tn = m.n - tp - fn - fp;
    auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
      if (den == 0) return std::nullopt;
      return static_cast<double>(num) / static_cast<double>(den);
    };
    auto& cm = m.per_class[static_cast<std::size_t>(c)];
    cm.sensitivity = ratio(tp, tp + fn);
    cm.specificity = ratio(tn, tn + fp);
    cm.precision = ratio(tp, tp + fp);
  }
  return m;
}

// --------------------------------------------------------------------------
// Scheme configuration and report
// --------------------------------------------------------------------------

enum class Scheme { UserSpecific, General, SimilarUsers };
enum class ClassifierKind { NaiveBayes, DecisionTree, OrdinalNaiveBayes, Random };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::UserSpecific: return "user-specific";
    case Scheme::General: return "general";
    case Scheme::SimilarUsers: return "similar-users";
  }
  return "?";
}

inline Scheme parse_scheme(const std::string& s) {
  if (s == "user-specific") return Scheme::UserSpecific;
  if (s == "general") return Scheme::General;
  if (s == "similar-users") return Scheme::SimilarUsers;
  throw std::invalid_argument("unknown scheme: " + s);
}

inline const char* classifier_name(ClassifierKind c) {
  switch (c) {
    case ClassifierKind::NaiveBayes: return "naive-bayes";
    case ClassifierKind::DecisionTree: return "decision-tree";
    case ClassifierKind::OrdinalNaiveBayes: return "ordinal-naive-bayes";
    case ClassifierKind::Random: return "random";
  }
  return "?";
}

inline ClassifierKind parse_classifier(const std::string& s) {
  if (s == "naive-bayes") return ClassifierKind::NaiveBayes;
  if (s == "decision-tree") return ClassifierKind::DecisionTree;
  if (s == "ordinal-naive-bayes") return ClassifierKind::OrdinalNaiveBayes;
  if (s == "random") return ClassifierKind::Random;
  throw std::invalid_argument("unknown classifier: " + s);
}

struct EvalConfig {
  ClassifierKind classifier = ClassifierKind::NaiveBayes;
  int cv_folds = 5;
  std::size_t min_user_obs = 10;
  SimilarUsersConfig similar;
  SelectionOptions selection;
  NaiveBayesConfig nb;
  TreeConfig tree;
  std::uint64_t seed = 1;
  int workers = 1;
};

inline ModelFactory make_model_factory(const EvalConfig& cfg) {
  switch (cfg.classifier) {
    case ClassifierKind::NaiveBayes:
      return [nb = cfg.nb](const Dataset& d, std::span<const int> r,
                           std::span<const int> c) {
        return fit_naive_bayes(d, r, c, nb);
      };
    case ClassifierKind::DecisionTree:
      return [tree = cfg.tree](const Dataset& d, std::span<const int> r,
                               std::span<const int> c) {
        return fit_tree(d, r, c, tree);
      };
    case ClassifierKind::OrdinalNaiveBayes:
      return [nb = cfg.nb](const Dataset& d, std::span<const int> r,
                           std::span<const int> c) {
        return fit_ordinal_naive_bayes(d, r, c, nb);
      };
    case ClassifierKind::Random:
      return [seed = derive_seed(cfg.seed, "random-model")](
                 const Dataset& d, std::span<const int> r,
                 std::span<const int> c) { return fit_random(d, r, c, seed); };
  }
  throw std::invalid_argument("unknown classifier kind");
}

// Train/test identifier sets of one fitted unit, for leakage audits.
struct FoldAudit {
  std::string unit;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

struct UnitTrace {
  std::string unit;
  SelectionTrace trace;
};

struct SimilarUnit {
  std::string test_user;
  SimilarUsersResult selection;
};

struct EvalReport {
  Scheme scheme = Scheme::UserSpecific;
  ClassifierKind classifier = ClassifierKind::NaiveBayes;
  Metrics pooled;
  std::vector<std::pair<std::string, Metrics>> per_user;
  std::vector<PredictionRecord> log;
  std::vector<UnitTrace> traces;
  std::vector<FoldAudit> audits;
  std::vector<SimilarUnit> similar_units;
  // Serialized fitted model per unit, for audit and reload via load_model.
  std::vector<std::pair<std::string, nlohmann::json>> fitted_models;
  std::vector<std::string> skipped_users;
  std::vector<std::string> warnings;
};

// --------------------------------------------------------------------------
// Shared plumbing
// --------------------------------------------------------------------------

namespace detail {

struct ObsDataset {
  Dataset data;
  std::vector<const Observation*> obs;  // aligned with data rows
  std::vector<std::string> users;       // sorted distinct user ids
  std::map<std::string, std::vector<int>> rows_of;
};

inline ObsDataset make_obs_dataset(std::span<const Observation> observations) {
  ObsDataset d;
  d.data = make_dataset(observations);
  for (const auto& o : observations) {
    d.obs.push_back(&o);
    d.rows_of[o.user_id].push_back(
        static_cast<int>(d.obs.size()) - 1);
  }
  for (const auto& [user, rows] : d.rows_of) d.users.push_back(user);
  return d;
}

inline std::vector<std::string> ids_of(const ObsDataset& d,
                                       std::span<const int> rows) {
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (int r : rows) ids.push_back(observation_id(*d.obs[static_cast<std::size_t>(r)]));
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline PredictionRecord make_record(const Observation& o, StressLevel predicted) {
  return {o.user_id, o.survey_ts, o.day_slot, o.label, predicted};
}

// Per-unit result, merged in user order after parallel execution.
struct UnitResult {
  bool skipped = false;
  std::string skip_reason;
  std::vector<PredictionRecord> records;
  std::vector<FoldAudit> audits;
  std::vector<UnitTrace> traces;
  std::vector<SimilarUnit> similar_units;
  std::vector<std::pair<std::string, nlohmann::json>> models;
  std::vector<std::string> warnings;
};

inline void merge_units(EvalReport& report, std::vector<UnitResult>& units,
                        const std::vector<std::string>& users) {
  for (std::size_t i = 0; i < units.size(); ++i) {
    auto& u = units[i];
    if (u.skipped) {
      report.skipped_users.push_back(users[i] + ": " + u.skip_reason);
      continue;
    }
    report.log.insert(report.log.end(), u.records.begin(), u.records.end());
    for (auto& a : u.audits) report.audits.push_back(std::move(a));
    for (auto& t : u.traces) report.traces.push_back(std::move(t));
    for (auto& s : u.similar_units) report.similar_units.push_back(std::move(s));
    for (auto& m : u.models) report.fitted_models.push_back(std::move(m));
    for (auto& w : u.warnings) report.warnings.push_back(std::move(w));
  }
  if (report.log.empty()) {
    throw std::runtime_error("evaluation produced no predictions");
  }
  report.pooled = compute_metrics(report.log);
  std::map<std::string, std::vector<PredictionRecord>> per_user;
  for (const auto& r : report.log) per_user[r.user_id].push_back(r);
  for (const auto& [user, records] : per_user) {
    report.per_user.push_back({user, compute_metrics(records)});
  }
}

inline std::unique_ptr<Model> fit_sanitized(const ObsDataset& d,
                                            const ModelFactory& factory,
                                            std::span<const int> train_rows,
                                            std::span<const int> cols,
                                            UnitResult& unit,
                                            const std::string& unit_name,
                                            std::vector<int>& kept_out) {
  std::vector<std::string> dropped;
  kept_out = sanitize_training_rows(d.data.y, train_rows, &dropped);
  for (const auto& cls : dropped) {
    unit.warnings.push_back(unit_name + ": dropped single-observation class " +
                            cls + " from the training pool");
  }
  if (kept_out.empty()) return nullptr;
  return factory(d.data, kept_out, cols);
}

}  // namespace detail

// --------------------------------------------------------------------------
// Scheme runners
// --------------------------------------------------------------------------

// Stratified k-fold cross-validation per user, with forward selection run
// once per user on that user's folds. Users below the observation floor or
// with a single stress level are skipped and listed.
inline EvalReport run_user_specific(std::span<const Observation> observations,
                                    const EvalConfig& cfg) {
  const auto d = detail::make_obs_dataset(observations);
  const auto factory = make_model_factory(cfg);

  std::vector<detail::UnitResult> units(d.users.size());
  parallel_for(d.users.size(), cfg.workers, [&](std::size_t ui) {
    const std::string& user = d.users[ui];
    auto& unit = units[ui];
    const auto& rows = d.rows_of.at(user);
    if (rows.size() < cfg.min_user_obs) {
      unit.skipped = true;
      unit.skip_reason = "only " + std::to_string(rows.size()) +
                         " observations (need " +
                         std::to_string(cfg.min_user_obs) + ")";
      return;
    }
    std::set<StressLevel> levels;
    for (int r : rows) levels.insert(d.data.y[static_cast<std::size_t>(r)]);
    if (levels.size() < 2) {
      unit.skipped = true;
      unit.skip_reason = "single stress level";
      return;
    }

    const auto unit_seed = derive_seed(cfg.seed, "user-specific:" + user);
    const auto folds =
        stratified_kfold(d.data.y, rows, cfg.cv_folds, derive_seed(unit_seed, "folds"));
    auto opts = cfg.selection;
    opts.workers = 1;  // outer loop already parallel
    const auto trace =
        forward_select(d.data, folds, factory, opts, derive_seed(unit_seed, "select"));
    const auto& cols = trace.selected;
    unit.traces.push_back({user, trace});

    for (std::size_t f = 0; f < folds.size(); ++f) {
      const auto& [train, test] = folds[f];
      std::vector<int> kept;
      const std::string unit_name = "user-specific:" + user + ":fold" + std::to_string(f);
      const auto model =
          detail::fit_sanitized(d, factory, train, cols, unit, unit_name, kept);
      if (!model) {
        unit.warnings.push_back(unit_name + ": empty training pool, fold skipped");
        continue;
      }
      std::mt19937_64 rng(derive_seed(unit_seed, "predict:fold" + std::to_string(f)));
      for (int r : test) {
        const auto features =
            gather_features(d.data.x[static_cast<std::size_t>(r)], cols);
        unit.records.push_back(detail::make_record(
            *d.obs[static_cast<std::size_t>(r)], model->predict(features, rng).predicted));
      }
      unit.audits.push_back({unit_name, detail::ids_of(d, kept), detail::ids_of(d, test)});
      unit.models.push_back({unit_name, model->to_json()});
    }
  });

  EvalReport report;
  report.scheme = Scheme::UserSpecific;
  report.classifier = cfg.classifier;
  detail::merge_units(report, units, d.users);
  return report;
}

// Leave-one-person-out: each user is tested on a model trained on all other
// users; forward selection runs inside the training pool with internal
// leave-one-training-person-out folds.
inline EvalReport run_general(std::span<const Observation> observations,
                              const EvalConfig& cfg) {
  const auto d = detail::make_obs_dataset(observations);
  if (d.users.size() < 3) {
    throw std::invalid_argument("general scheme needs >= 3 users; got " +
                                std::to_string(d.users.size()));
  }
  const auto factory = make_model_factory(cfg);

  std::vector<detail::UnitResult> units(d.users.size());
  parallel_for(d.users.size(), cfg.workers, [&](std::size_t ui) {
    const std::string& test_user = d.users[ui];
    auto& unit = units[ui];
    const auto unit_seed = derive_seed(cfg.seed, "general:" + test_user);

    Folds folds;
    std::vector<int> train_rows;
    for (const auto& other : d.users) {
      if (other == test_user) continue;
      const auto& orows = d.rows_of.at(other);
      train_rows.insert(train_rows.end(), orows.begin(), orows.end());
    }
    for (const auto& held : d.users) {
      if (held == test_user) continue;
      std::vector<int> ftrain, ftest;
      for (const auto& other : d.users) {
        if (other == test_user) continue;
        const auto& orows = d.rows_of.at(other);
        auto& dst = (other == held) ? ftest : ftrain;
        dst.insert(dst.end(), orows.begin(), orows.end());
      }
      folds.push_back({std::move(ftrain), std::move(ftest)});
    }

    auto opts = cfg.selection;
    opts.workers = 1;
    const auto trace =
        forward_select(d.data, folds, factory, opts, derive_seed(unit_seed, "select"));
    const auto& cols = trace.selected;
    unit.traces.push_back({test_user, trace});

    std::vector<int> kept;
    const std::string unit_name = "general:" + test_user;
    const auto model =
        detail::fit_sanitized(d, factory, train_rows, cols, unit, unit_name, kept);
    if (!model) {
      unit.skipped = true;
      unit.skip_reason = "empty training pool";
      return;
    }
    std::mt19937_64 rng(derive_seed(unit_seed, "predict"));
    const auto& test_rows = d.rows_of.at(test_user);
    for (int r : test_rows) {
      const auto features = gather_features(d.data.x[static_cast<std::size_t>(r)], cols);
      unit.records.push_back(detail::make_record(
          *d.obs[static_cast<std::size_t>(r)], model->predict(features, rng).predicted));
    }
    unit.audits.push_back({unit_name, detail::ids_of(d, kept), detail::ids_of(d, test_rows)});
    unit.models.push_back({unit_name, model->to_json()});
  });

  EvalReport report;
  report.scheme = Scheme::General;
  report.classifier = cfg.classifier;
  detail::merge_units(report, units, d.users);
  return report;
}

// Similar-users scheme: training data comes from the test user's nearest
// behavior-vector cluster; the subset of the test user's observations spent
// on the behavior vector is excluded from evaluation.
inline EvalReport run_similar_users(std::span<const Observation> observations,
                                    const EvalConfig& cfg) {
  const auto d = detail::make_obs_dataset(observations);
  if (d.users.size() < 4) {
    throw std::invalid_argument("similar-users scheme needs >= 4 users; got " +
                                std::to_string(d.users.size()));
  }
  if (!(cfg.similar.p_percent > 0.0 && cfg.similar.p_percent < 100.0)) {
    throw std::invalid_argument(
        "similar-users subset percentage must lie in (0, 100)");
  }
  const auto factory = make_model_factory(cfg);

  std::vector<detail::UnitResult> units(d.users.size());
  parallel_for(d.users.size(), cfg.workers, [&](std::size_t ui) {
    const std::string& test_user = d.users[ui];
    auto& unit = units[ui];
    const auto unit_seed = derive_seed(cfg.seed, "similar:" + test_user);

    auto sim = select_similar_users(test_user, observations, cfg.similar,
                                    derive_seed(unit_seed, "select-users"));
    for (const auto& w : sim.warnings) unit.warnings.push_back(w);
    if (sim.similar_users.empty()) {
      unit.skipped = true;
      unit.skip_reason = "no similar users available";
      return;
    }

    std::vector<int> train_rows;
    for (const auto& user : sim.similar_users) {
      const auto& orows = d.rows_of.at(user);
      train_rows.insert(train_rows.end(), orows.begin(), orows.end());
    }
    const std::set<std::string> held(sim.held_out_ids.begin(),
                                     sim.held_out_ids.end());
    std::vector<int> eval_rows;
    for (int r : d.rows_of.at(test_user)) {
      if (held.count(observation_id(*d.obs[static_cast<std::size_t>(r)])) == 0) {
        eval_rows.push_back(r);
      }
    }
    if (eval_rows.empty()) {
      unit.skipped = true;
      unit.skip_reason = "no evaluation observations outside the held-out subset";
      return;
    }

    Folds folds;
    if (sim.similar_users.size() >= 2) {
      for (const auto& held_user : sim.similar_users) {
        std::vector<int> ftrain, ftest;
        for (const auto& user : sim.similar_users) {
          const auto& orows = d.rows_of.at(user);
          auto& dst = (user == held_user) ? ftest : ftrain;
          dst.insert(dst.end(), orows.begin(), orows.end());
        }
        folds.push_back({std::move(ftrain), std::move(ftest)});
      }
    } else {
      const int k = std::min<int>(cfg.cv_folds,
                                  static_cast<int>(train_rows.size()));
      try {
        folds = stratified_kfold(d.data.y, train_rows, std::max(k, 2),
                                 derive_seed(unit_seed, "folds"));
      } catch (const std::invalid_argument& e) {
        unit.warnings.push_back("similar-users:" + test_user +
                                ": selection folds unavailable (" + e.what() +
                                "); using prior-only feature set");
      }
    }

    std::vector<int> cols;
    if (!folds.empty()) {
      auto opts = cfg.selection;
      opts.workers = 1;
      const auto trace =
          forward_select(d.data, folds, factory, opts, derive_seed(unit_seed, "select"));
      cols = trace.selected;
      unit.traces.push_back({test_user, trace});
    }

    std::vector<int> kept;
    const std::string unit_name = "similar-users:" + test_user;
    const auto model =
        detail::fit_sanitized(d, factory, train_rows, cols, unit, unit_name, kept);
    if (!model) {
      unit.skipped = true;
      unit.skip_reason = "empty training pool";
      return;
    }
    std::mt19937_64 rng(derive_seed(unit_seed, "predict"));
    for (int r : eval_rows) {
      const auto features = gather_features(d.data.x[static_cast<std::size_t>(r)], cols);
      unit.records.push_back(detail::make_record(
          *d.obs[static_cast<std::size_t>(r)], model->predict(features, rng).predicted));
    }
    unit.audits.push_back({unit_name, detail::ids_of(d, kept), detail::ids_of(d, eval_rows)});
    unit.models.push_back({unit_name, model->to_json()});
    unit.similar_units.push_back({test_user, std::move(sim)});
  });

  EvalReport report;
  report.scheme = Scheme::SimilarUsers;
  report.classifier = cfg.classifier;
  detail::merge_units(report, units, d.users);
  return report;
}

inline EvalReport run_scheme(Scheme scheme,
                             std::span<const Observation> observations,
                             const EvalConfig& cfg) {
  switch (scheme) {
    case Scheme::UserSpecific: return run_user_specific(observations, cfg);
    case Scheme::General: return run_general(observations, cfg);
    case Scheme::SimilarUsers: return run_similar_users(observations, cfg);
  }
  throw std::invalid_argument("unknown scheme");
}

}  // namespace stresskit
