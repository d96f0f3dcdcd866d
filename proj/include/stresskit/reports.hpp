#pragma once

#include <iomanip>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stresskit/eval.hpp"
#include "stresskit/exploratory.hpp"
#include "stresskit/features.hpp"
#include "stresskit/observations.hpp"

namespace stresskit {

inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : "na";
}

// --------------------------------------------------------------------------
// Window features
// --------------------------------------------------------------------------

inline void write_features_csv(std::ostream& os,
                               std::span<const WindowFeatures> features) {
  os << "user_id,end_ts";
  for (const char* name : kFeatureNames) os << ',' << name;
  os << '\n';
  for (const auto& f : features) {
    os << f.user_id << ',' << f.end_ts;
    for (double v : f.values) os << ',' << format_double(v);
    os << '\n';
  }
}

inline std::vector<WindowFeatures> read_features_csv(const std::string& path) {
  std::vector<WindowFeatures> rows;
  const bool opened = for_each_csv_row(
      path,
      [&](const std::vector<std::string_view>& header) {
        if (header.size() != 2 + kNumWindowFeatures || header[0] != "user_id" ||
            header[1] != "end_ts") {
          throw std::runtime_error("unexpected feature file header in " + path);
        }
        for (int i = 0; i < kNumWindowFeatures; ++i) {
          if (header[static_cast<std::size_t>(2 + i)] != kFeatureNames[static_cast<std::size_t>(i)]) {
            throw std::runtime_error("unexpected feature column order in " + path);
          }
        }
      },
      [&](std::size_t line, const std::vector<std::string_view>& f) {
        if (f.size() != 2 + kNumWindowFeatures) {
          throw std::runtime_error("feature row " + std::to_string(line) +
                                   " has wrong field count");
        }
        WindowFeatures wf;
        wf.user_id = std::string(f[0]);
        const auto ts = parse_int_field(f[1]);
        if (!ts) {
          throw std::runtime_error("feature row " + std::to_string(line) +
                                   " has a bad end_ts");
        }
        wf.end_ts = *ts;
        for (int i = 0; i < kNumWindowFeatures; ++i) {
          const auto v = parse_double_field(f[static_cast<std::size_t>(2 + i)]);
          if (!v) {
            throw std::runtime_error("feature row " + std::to_string(line) +
                                     " has a non-numeric value");
          }
          wf.values[static_cast<std::size_t>(i)] = *v;
        }
        rows.push_back(std::move(wf));
      });
  if (!opened) throw std::runtime_error("cannot open feature file: " + path);
  return rows;
}

// --------------------------------------------------------------------------
// Observations
// --------------------------------------------------------------------------

inline void write_observations_csv(std::ostream& os,
                                   std::span<const Observation> observations) {
  os << "user_id,survey_ts,day_slot,label,window_count";
  for (const auto& name : aggregate_feature_names()) os << ',' << name;
  os << '\n';
  for (const auto& o : observations) {
    os << o.user_id << ',' << o.survey_ts << ',' << o.day_slot << ','
       << level_code(o.label) << ',' << o.window_count;
    for (double v : o.features) os << ',' << format_double(v);
    os << '\n';
  }
}

inline std::vector<Observation> read_observations_csv(const std::string& path) {
  const auto names = aggregate_feature_names();
  std::vector<Observation> rows;
  const bool opened = for_each_csv_row(
      path,
      [&](const std::vector<std::string_view>& header) {
        if (header.size() != 5 + names.size() || header[0] != "user_id" ||
            header[1] != "survey_ts" || header[2] != "day_slot" ||
            header[3] != "label" || header[4] != "window_count") {
          throw std::runtime_error("unexpected observation header in " + path);
        }
        for (std::size_t i = 0; i < names.size(); ++i) {
          if (header[5 + i] != names[i]) {
            throw std::runtime_error("unexpected observation column order in " + path);
          }
        }
      },
      [&](std::size_t line, const std::vector<std::string_view>& f) {
        if (f.size() != 5 + names.size()) {
          throw std::runtime_error("observation row " + std::to_string(line) +
                                   " has wrong field count");
        }
        Observation o;
        o.user_id = std::string(f[0]);
        const auto ts = parse_int_field(f[1]);
        const auto slot = parse_int_field(f[2]);
        const auto label = parse_int_field(f[3]);
        const auto wc = parse_int_field(f[4]);
        if (!ts || !slot || !label || !wc) {
          throw std::runtime_error("observation row " + std::to_string(line) +
                                   " is malformed");
        }
        o.survey_ts = *ts;
        o.day_slot = static_cast<int>(*slot);
        o.label = level_from_code(static_cast<int>(*label));
        o.window_count = static_cast<int>(*wc);
        o.features.reserve(names.size());
        for (std::size_t i = 0; i < names.size(); ++i) {
          const auto v = parse_double_field(f[5 + i]);
          if (!v) {
            throw std::runtime_error("observation row " + std::to_string(line) +
                                     " has a non-numeric value");
          }
          o.features.push_back(*v);
        }
        rows.push_back(std::move(o));
      });
  if (!opened) throw std::runtime_error("cannot open observation file: " + path);
  return rows;
}

// --------------------------------------------------------------------------
// Exploratory reports
// --------------------------------------------------------------------------

inline void write_weekday_summary_csv(std::ostream& os,
                                      const WeekdaySummary& summary) {
  os << "weekday,n,mean,sem\n";
  for (const auto& e : summary.entries) {
    os << kWeekdayNames[static_cast<std::size_t>(e.weekday)] << ',' << e.n
       << ',' << format_double(e.mean) << ',' << format_double(e.sem) << '\n';
  }
}

inline void write_screen_csv(std::ostream& os,
                             std::span<const PairTestResult> results,
                             std::span<const std::string> feature_names) {
  os << "user_id,feature,pair,u,p_raw,p_corrected,significant,d,effect\n";
  for (const auto& r : results) {
    os << r.user_id << ','
       << feature_names[static_cast<std::size_t>(r.feature_index)] << ','
       << level_pair_name(r.pair) << ',' << format_double(r.u_stat) << ','
       << format_double(r.p_raw) << ',' << format_double(r.p_corrected) << ','
       << (r.significant ? 1 : 0) << ',' << format_double(r.d) << ','
       << effect_label_name(r.effect) << '\n';
  }
}

// --------------------------------------------------------------------------
// Evaluation reports
// --------------------------------------------------------------------------

inline void write_prediction_log_csv(std::ostream& os,
                                     std::span<const PredictionRecord> log) {
  os << "user_id,survey_ts,day_slot,true_level,predicted_level\n";
  for (const auto& r : log) {
    os << r.user_id << ',' << r.survey_ts << ',' << r.day_slot << ','
       << level_code(r.truth) << ',' << level_code(r.predicted) << '\n';
  }
}

inline void write_selection_traces_csv(std::ostream& os,
                                       std::span<const UnitTrace> traces,
                                       std::span<const std::string> feature_names) {
  os << "unit,round,feature,accuracy,stop_reason\n";
  for (const auto& t : traces) {
    if (t.trace.steps.empty()) {
      os << t.unit << ",0,," << format_double(t.trace.baseline_accuracy) << ','
         << stop_reason_name(t.trace.stop) << '\n';
      continue;
    }
    for (std::size_t i = 0; i < t.trace.steps.size(); ++i) {
      const auto& s = t.trace.steps[i];
      os << t.unit << ',' << (i + 1) << ','
         << feature_names[static_cast<std::size_t>(s.feature)] << ','
         << format_double(s.accuracy) << ','
         << (i + 1 == t.trace.steps.size() ? stop_reason_name(t.trace.stop) : "")
         << '\n';
    }
  }
}

// One JSON document per evaluation unit; each entry reloads via load_model.
inline void write_models_json(std::ostream& os, const EvalReport& report) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [unit, model] : report.fitted_models) {
    j.push_back({{"unit", unit}, {"model", model}});
  }
  os << j.dump(2) << '\n';
}

inline void write_cluster_report_csv(std::ostream& os,
                                     std::span<const SimilarUnit> units) {
  os << "test_user,candidate_user,cluster_id,silhouette_width,chosen_k,"
        "silhouette_index,selected\n";
  for (const auto& u : units) {
    const auto& s = u.selection;
    for (std::size_t i = 0; i < s.candidate_users.size(); ++i) {
      const bool selected =
          std::find(s.similar_users.begin(), s.similar_users.end(),
                    s.candidate_users[i]) != s.similar_users.end();
      os << u.test_user << ',' << s.candidate_users[i] << ','
         << s.candidate_cluster[i] << ','
         << format_double(s.candidate_silhouette_width[i]) << ',' << s.chosen_k
         << ',' << format_double(s.silhouette_index) << ','
         << (selected ? 1 : 0) << '\n';
    }
  }
}

namespace detail {

inline std::string metric_cell(const std::optional<double>& v) {
  if (!v) return "na";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", *v);
  return buf;
}

inline void write_metrics_block(std::ostream& os, const Metrics& m) {
  os << "                     low   medium     high\n";
  const auto row = [&](const char* name, auto getter) {
    os << std::left << std::setw(15) << name;
    for (int c = 0; c < kNumLevels; ++c) {
      os << std::right << std::setw(9)
         << metric_cell(getter(m.per_class[static_cast<std::size_t>(c)]));
    }
    os << '\n';
  };
  row("sensitivity", [](const ClassMetrics& c) { return c.sensitivity; });
  row("specificity", [](const ClassMetrics& c) { return c.specificity; });
  row("precision", [](const ClassMetrics& c) { return c.precision; });
  os << '\n';
  const auto scalar = [&](const char* name, const std::optional<double>& v) {
    os << std::left << std::setw(15) << name << metric_cell(v) << '\n';
  };
  scalar("accuracy", m.accuracy);
  scalar("mae", m.mae);
  scalar("rmse", m.rmse);
  scalar("pearson_cor", m.pearson);
  scalar("spearman_cor", m.spearman);
  scalar("acc_within_1", m.acc_within_1);
  scalar("acc_within_2", m.acc_within_2);
}

}  // namespace detail

// Table-style text report: per-class rows and ordinal metric rows for the
// pooled predictions, per-user macro averages, and the resolved
// configuration that produced the run.
inline void write_eval_report(std::ostream& os, const EvalReport& report,
                              const nlohmann::json& resolved_config) {
  os << "scheme: " << scheme_name(report.scheme) << '\n';
  os << "classifier: " << classifier_name(report.classifier) << '\n';
  os << "predictions: " << report.pooled.n << '\n';
  os << "users evaluated: " << report.per_user.size() << '\n';
  os << "users skipped: " << report.skipped_users.size() << '\n';
  os << '\n';
  os << "pooled (micro-average over all predictions)\n";
  detail::write_metrics_block(os, report.pooled);

  if (!report.per_user.empty()) {
    os << '\n'
       << "macro average over " << report.per_user.size() << " users\n";
    auto macro = [&](auto getter) -> std::optional<double> {
      KahanSum sum;
      std::size_t n = 0;
      for (const auto& [user, m] : report.per_user) {
        const std::optional<double> v = getter(m);
        if (!v) continue;
        sum.add(*v);
        ++n;
      }
      if (n == 0) return std::nullopt;
      return sum.value() / static_cast<double>(n);
    };
    const auto scalar = [&](const char* name, const std::optional<double>& v) {
      os << std::left << std::setw(15) << name << detail::metric_cell(v) << '\n';
    };
    scalar("accuracy", macro([](const Metrics& m) { return std::optional<double>(m.accuracy); }));
    scalar("mae", macro([](const Metrics& m) { return std::optional<double>(m.mae); }));
    scalar("rmse", macro([](const Metrics& m) { return std::optional<double>(m.rmse); }));
    scalar("pearson_cor", macro([](const Metrics& m) { return m.pearson; }));
    scalar("spearman_cor", macro([](const Metrics& m) { return m.spearman; }));
    scalar("acc_within_1", macro([](const Metrics& m) { return std::optional<double>(m.acc_within_1); }));
    os << '\n' << "per-user accuracy\n";
    for (const auto& [user, m] : report.per_user) {
      os << "  " << std::left << std::setw(20) << user
         << detail::metric_cell(m.accuracy) << "  (n=" << m.n << ")\n";
    }
  }
  if (!report.skipped_users.empty()) {
    os << '\n' << "skipped users\n";
    for (const auto& s : report.skipped_users) os << "  " << s << '\n';
  }
  if (!report.warnings.empty()) {
    os << '\n' << "warnings\n";
    for (const auto& w : report.warnings) os << "  " << w << '\n';
  }
  os << '\n' << "config: " << resolved_config.dump() << '\n';
}

}  // namespace stresskit
