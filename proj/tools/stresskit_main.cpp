// Command-line front end for the stresskit pipeline. Stages communicate
// only through the documented CSV formats, so every intermediate can be
// inspected and re-run:
//
//   synth    -> accel.csv surveys.csv manifest.csv
//   extract  -> features.csv
//   observe  -> observations.csv
//   explore  -> weekday_summary.csv screen.csv
//   evaluate -> report.txt predictions.csv selection_traces.csv clusters.csv

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stresskit/eval.hpp"
#include "stresskit/exploratory.hpp"
#include "stresskit/features.hpp"
#include "stresskit/ingest.hpp"
#include "stresskit/observations.hpp"
#include "stresskit/reports.hpp"
#include "stresskit/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  stresskit::FeatureConfig features;
  stresskit::ObservationConfig observations;
  stresskit::IngestConfig ingest;
  stresskit::EvalConfig eval;
  stresskit::ScreenConfig screen;
  std::string scheme = "user-specific";
  std::string classifier = "naive-bayes";
  std::optional<std::uint64_t> seed;
  int workers = 1;
  // synth knobs
  int users_per_archetype = 6;
  int days_per_user = 10;
  int accel_minutes_per_slot = 10;
  double dropout_prob = 0.0;
};

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j = json::parse(in);

  maybe(j, "window_length", cfg.features.window_length);
  maybe(j, "rate_hz", cfg.features.rate_hz);
  maybe(j, "gap_tolerance_ms", cfg.features.gap_tolerance_ms);
  maybe(j, "pooled_axis_stats", cfg.features.pooled_axis_stats);
  maybe(j, "entropy_bins", cfg.features.entropy_bins);
  maybe(j, "lookback_hours", cfg.observations.lookback_hours);
  maybe(j, "min_windows", cfg.observations.min_windows);
  maybe(j, "utc_offset_minutes", cfg.ingest.utc_offset_minutes);
  maybe(j, "scheme", cfg.scheme);
  maybe(j, "classifier", cfg.classifier);
  maybe(j, "cv_folds", cfg.eval.cv_folds);
  maybe(j, "min_user_obs", cfg.eval.min_user_obs);
  maybe(j, "alpha", cfg.screen.alpha);
  maybe(j, "workers", cfg.workers);
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("selection")) {
    const auto& s = j.at("selection");
    maybe(s, "max_features", cfg.eval.selection.max_features);
    maybe(s, "min_delta", cfg.eval.selection.min_delta);
    maybe(s, "patience", cfg.eval.selection.patience);
  }
  if (j.contains("similar")) {
    const auto& s = j.at("similar");
    maybe(s, "p_percent", cfg.eval.similar.p_percent);
    maybe(s, "k_max", cfg.eval.similar.k_max);
    maybe(s, "restarts", cfg.eval.similar.restarts);
  }
  if (j.contains("tree")) {
    const auto& t = j.at("tree");
    maybe(t, "max_depth", cfg.eval.tree.max_depth);
    maybe(t, "min_leaf", cfg.eval.tree.min_leaf);
  }
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    maybe(s, "users_per_archetype", cfg.users_per_archetype);
    maybe(s, "days_per_user", cfg.days_per_user);
    maybe(s, "accel_minutes_per_slot", cfg.accel_minutes_per_slot);
    maybe(s, "dropout_prob", cfg.dropout_prob);
  }
  return cfg;
}

void validate(const RunConfig& cfg) {
  if (cfg.features.window_length < 2) throw std::runtime_error("window_length must be >= 2");
  if (cfg.features.rate_hz <= 0) throw std::runtime_error("rate_hz must be > 0");
  if (cfg.features.gap_tolerance_ms < 0) throw std::runtime_error("gap_tolerance_ms must be >= 0");
  if (cfg.observations.lookback_hours <= 0) throw std::runtime_error("lookback_hours must be > 0");
  if (cfg.observations.min_windows < 1) throw std::runtime_error("min_windows must be >= 1");
  if (cfg.eval.cv_folds < 2) throw std::runtime_error("cv_folds must be >= 2");
  if (cfg.eval.selection.max_features < 0) throw std::runtime_error("max_features must be >= 0");
  if (!(cfg.eval.similar.p_percent > 0 && cfg.eval.similar.p_percent < 100)) {
    throw std::runtime_error("similar p_percent must lie in (0, 100)");
  }
  if (cfg.workers < 1) throw std::runtime_error("workers must be >= 1");
  if (!(cfg.screen.alpha > 0 && cfg.screen.alpha < 1)) {
    throw std::runtime_error("alpha must lie in (0, 1)");
  }
}

json resolved_config(const RunConfig& cfg) {
  json j;
  j["window_length"] = cfg.features.window_length;
  j["rate_hz"] = cfg.features.rate_hz;
  j["gap_tolerance_ms"] = cfg.features.gap_tolerance_ms;
  j["pooled_axis_stats"] = cfg.features.pooled_axis_stats;
  j["entropy_bins"] = cfg.features.entropy_bins;
  j["lookback_hours"] = cfg.observations.lookback_hours;
  j["min_windows"] = cfg.observations.min_windows;
  j["utc_offset_minutes"] = cfg.ingest.utc_offset_minutes;
  j["scheme"] = cfg.scheme;
  j["classifier"] = cfg.classifier;
  j["cv_folds"] = cfg.eval.cv_folds;
  j["min_user_obs"] = cfg.eval.min_user_obs;
  j["alpha"] = cfg.screen.alpha;
  j["workers"] = cfg.workers;
  if (cfg.seed) j["seed"] = *cfg.seed;
  j["selection"] = {{"max_features", cfg.eval.selection.max_features},
                    {"min_delta", cfg.eval.selection.min_delta},
                    {"patience", cfg.eval.selection.patience}};
  j["similar"] = {{"p_percent", cfg.eval.similar.p_percent},
                  {"k_max", cfg.eval.similar.k_max},
                  {"restarts", cfg.eval.similar.restarts}};
  j["tree"] = {{"max_depth", cfg.eval.tree.max_depth},
               {"min_leaf", cfg.eval.tree.min_leaf}};
  j["synth"] = {{"users_per_archetype", cfg.users_per_archetype},
                {"days_per_user", cfg.days_per_user},
                {"accel_minutes_per_slot", cfg.accel_minutes_per_slot},
                {"dropout_prob", cfg.dropout_prob}};
  return j;
}

// Warnings go to stderr and are mirrored into <out>/run.log together with a
// deterministic run summary.
struct RunLog {
  std::vector<std::string> lines;

  void warn(const std::string& msg) {
    lines.push_back("warning: " + msg);
    std::cerr << "warning: " << msg << '\n';
  }
  void note(const std::string& msg) { lines.push_back(msg); }

  void flush(const fs::path& out_dir) const {
    std::ofstream log(out_dir / "run.log", std::ios::binary);
    for (const auto& line : lines) log << line << '\n';
  }
};

std::uint64_t require_seed(const RunConfig& cfg) {
  if (!cfg.seed) {
    throw std::runtime_error(
        "this command is stochastic; provide --seed or a config seed");
  }
  return *cfg.seed;
}

fs::path prepare_out_dir(const std::string& out) {
  if (out.empty()) throw std::runtime_error("--out is required");
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_synth(const RunConfig& cfg, const std::string& out) {
  const auto dir = prepare_out_dir(out);
  RunLog log;
  auto spec = stresskit::default_mirrored_cohort(require_seed(cfg),
                                                 cfg.users_per_archetype,
                                                 cfg.days_per_user);
  spec.rate_hz = cfg.features.rate_hz;
  spec.accel_minutes_per_slot = cfg.accel_minutes_per_slot;
  spec.dropout_prob = cfg.dropout_prob;
  spec.utc_offset_minutes = cfg.ingest.utc_offset_minutes;
  const auto cohort = stresskit::generate_cohort(spec);

  {
    auto os = stresskit::open_output((dir / "accel.csv").string());
    stresskit::write_accel_csv(os, cohort.samples);
  }
  {
    auto os = stresskit::open_output((dir / "surveys.csv").string());
    stresskit::write_survey_csv(os, cohort.surveys);
  }
  {
    auto os = stresskit::open_output((dir / "manifest.csv").string());
    stresskit::write_manifest_csv(os, cohort.manifest);
  }
  log.note("samples: " + std::to_string(cohort.samples.size()));
  log.note("surveys: " + std::to_string(cohort.surveys.size()));
  log.flush(dir);
  std::cout << "generated " << cohort.samples.size() << " samples, "
            << cohort.surveys.size() << " surveys for "
            << cfg.users_per_archetype * 2 << " users\n";
  return 0;
}

int cmd_extract(const RunConfig& cfg, const std::string& accel_path,
                const std::string& out) {
  const auto dir = prepare_out_dir(out);
  RunLog log;
  const auto parsed = stresskit::parse_accel_file(accel_path);
  for (const auto& r : parsed.rejected) {
    log.warn(accel_path + ":" + std::to_string(r.line) + ": " + r.reason);
  }
  if (parsed.records.empty()) {
    log.warn("no accelerometer samples in " + accel_path);
  }
  auto sessions = stresskit::build_sessions(parsed.records, {}, cfg.features.rate_hz);
  for (const auto& w : sessions.warnings) log.warn(w);

  // Per-user extraction is independent; results merge in user order so the
  // output is identical for any worker count.
  std::vector<const stresskit::UserSession*> session_list;
  for (const auto& [user, session] : sessions.sessions) {
    session_list.push_back(&session);
  }
  std::vector<std::vector<stresskit::WindowFeatures>> per_user(session_list.size());
  std::vector<std::size_t> dropped_per_user(session_list.size());
  stresskit::parallel_for(session_list.size(), cfg.workers, [&](std::size_t i) {
    const auto& session = *session_list[i];
    const auto windows = stresskit::segment_windows(session, cfg.features);
    std::size_t covered = 0;
    for (const auto& w : windows) covered += w.samples.size();
    dropped_per_user[i] = session.samples.size() - covered;
    for (const auto& w : windows) {
      per_user[i].push_back(stresskit::extract_features(w, cfg.features));
    }
  });

  std::vector<stresskit::WindowFeatures> all;
  std::size_t dropped_samples = 0;
  for (std::size_t i = 0; i < session_list.size(); ++i) {
    all.insert(all.end(), per_user[i].begin(), per_user[i].end());
    dropped_samples += dropped_per_user[i];
    log.note("user " + session_list[i]->user_id + ": " +
             std::to_string(per_user[i].size()) + " windows");
  }
  {
    auto os = stresskit::open_output((dir / "features.csv").string());
    stresskit::write_features_csv(os, all);
  }
  log.note("windows: " + std::to_string(all.size()));
  log.note("samples outside windows: " + std::to_string(dropped_samples));
  log.note("rows rejected: " + std::to_string(parsed.rejected.size()));
  log.flush(dir);
  std::cout << "extracted " << all.size() << " windows ("
            << dropped_samples << " samples outside windows, "
            << parsed.rejected.size() << " rows rejected)\n";
  return 0;
}

int cmd_observe(const RunConfig& cfg, const std::string& features_path,
                const std::string& surveys_path, const std::string& out) {
  const auto dir = prepare_out_dir(out);
  RunLog log;
  const auto features = stresskit::read_features_csv(features_path);
  const auto surveys = stresskit::parse_survey_file(surveys_path, {}, cfg.ingest);
  for (const auto& r : surveys.rejected) {
    log.warn(surveys_path + ":" + std::to_string(r.line) + ": " + r.reason);
  }
  const auto build =
      stresskit::build_observations(features, surveys.records, cfg.observations);
  for (const auto& d : build.dropped) {
    log.note("dropped survey " + d.user_id + ":" + std::to_string(d.survey_ts) +
             " slot " + std::to_string(d.day_slot) + ": " + d.reason);
  }
  {
    auto os = stresskit::open_output((dir / "observations.csv").string());
    stresskit::write_observations_csv(os, build.observations);
  }
  const auto counts = stresskit::class_counts(build.observations);
  std::cout << "stress level:   low  medium    high   total\n";
  std::cout << "observations: ";
  for (std::size_t c : counts.per_level) {
    std::cout << std::setw(5) << c << "   ";
  }
  std::cout << std::setw(5) << counts.total << '\n';
  log.note("observations: " + std::to_string(counts.total));
  log.note("dropped surveys: " + std::to_string(build.dropped.size()));
  log.flush(dir);
  return 0;
}

int cmd_explore(const RunConfig& cfg, const std::string& observations_path,
                const std::string& surveys_path, const std::string& out,
                const std::string& window_features_path) {
  const auto dir = prepare_out_dir(out);
  RunLog log;
  const auto observations = stresskit::read_observations_csv(observations_path);
  const auto surveys = stresskit::parse_survey_file(surveys_path, {}, cfg.ingest);
  for (const auto& r : surveys.rejected) {
    log.warn(surveys_path + ":" + std::to_string(r.line) + ": " + r.reason);
  }

  const auto summary = stresskit::weekday_stress_summary(
      surveys.records, cfg.ingest.utc_offset_minutes);
  for (const auto& f : summary.flags) log.warn(f);
  {
    auto os = stresskit::open_output((dir / "weekday_summary.csv").string());
    stresskit::write_weekday_summary_csv(os, summary);
  }

  std::map<std::string, std::vector<stresskit::Observation>> by_user;
  for (const auto& o : observations) by_user[o.user_id].push_back(o);
  std::vector<stresskit::PairTestResult> all_results;
  const auto agg_names = stresskit::aggregate_feature_names();
  for (const auto& [user, obs] : by_user) {
    const auto screen = stresskit::feature_level_screen(obs, cfg.screen);
    for (const auto& f : screen.flags) log.warn(f);
    all_results.insert(all_results.end(), screen.results.begin(),
                       screen.results.end());
  }
  {
    auto os = stresskit::open_output((dir / "screen.csv").string());
    stresskit::write_screen_csv(os, all_results, agg_names);
  }
  log.note("screen rows: " + std::to_string(all_results.size()));

  if (!window_features_path.empty()) {
    const auto windows = stresskit::read_features_csv(window_features_path);
    std::map<std::string, std::vector<stresskit::WindowFeatures>> w_by_user;
    for (const auto& w : windows) w_by_user[w.user_id].push_back(w);
    std::vector<stresskit::PairTestResult> window_results;
    std::vector<std::string> window_names(stresskit::kFeatureNames.begin(),
                                          stresskit::kFeatureNames.end());
    for (const auto& [user, wfs] : w_by_user) {
      const auto [rows, labels] =
          stresskit::label_windows(wfs, surveys.records, cfg.observations);
      if (rows.empty()) continue;
      std::vector<const std::vector<double>*> row_ptrs;
      for (const auto& r : rows) row_ptrs.push_back(&r);
      const auto screen = stresskit::screen_feature_matrix(
          user, row_ptrs, labels, stresskit::kNumWindowFeatures, cfg.screen);
      for (const auto& f : screen.flags) log.warn(f);
      window_results.insert(window_results.end(), screen.results.begin(),
                            screen.results.end());
    }
    auto os = stresskit::open_output((dir / "window_screen.csv").string());
    stresskit::write_screen_csv(os, window_results, window_names);
    log.note("window screen rows: " + std::to_string(window_results.size()));
  }

  log.flush(dir);
  std::cout << "wrote weekday summary (" << summary.entries.size()
            << " weekdays) and feature screen (" << all_results.size()
            << " rows)\n";
  return 0;
}

int cmd_evaluate(RunConfig cfg, const std::string& observations_path,
                 const std::string& out) {
  const auto dir = prepare_out_dir(out);
  RunLog log;
  cfg.eval.seed = require_seed(cfg);
  cfg.eval.workers = cfg.workers;
  cfg.eval.classifier = stresskit::parse_classifier(cfg.classifier);
  const auto scheme = stresskit::parse_scheme(cfg.scheme);

  const auto observations = stresskit::read_observations_csv(observations_path);
  const auto report = stresskit::run_scheme(scheme, observations, cfg.eval);
  for (const auto& w : report.warnings) log.warn(w);
  for (const auto& s : report.skipped_users) log.note("skipped: " + s);

  const json config_echo = resolved_config(cfg);
  {
    auto os = stresskit::open_output((dir / "report.txt").string());
    stresskit::write_eval_report(os, report, config_echo);
  }
  {
    auto os = stresskit::open_output((dir / "predictions.csv").string());
    stresskit::write_prediction_log_csv(os, report.log);
  }
  {
    auto os = stresskit::open_output((dir / "selection_traces.csv").string());
    const auto names = stresskit::aggregate_feature_names();
    stresskit::write_selection_traces_csv(os, report.traces, names);
  }
  {
    auto os = stresskit::open_output((dir / "models.json").string());
    stresskit::write_models_json(os, report);
  }
  if (scheme == stresskit::Scheme::SimilarUsers) {
    auto os = stresskit::open_output((dir / "clusters.csv").string());
    stresskit::write_cluster_report_csv(os, report.similar_units);
  }
  {
    auto os = stresskit::open_output((dir / "run_config.json").string());
    os << config_echo.dump(2) << '\n';
  }
  log.note("predictions: " + std::to_string(report.pooled.n));
  log.flush(dir);
  std::cout << stresskit::scheme_name(scheme) << " "
            << stresskit::classifier_name(cfg.eval.classifier)
            << ": accuracy " << stresskit::format_double(report.pooled.accuracy)
            << " over " << report.pooled.n << " predictions\n";
  return 0;
}

}  // namespace

int run_main(int argc, char** argv) {
  CLI::App app{"Accelerometer stress-level pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_dir, accel_path, surveys_path, features_path,
      observations_path, window_features_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::string> scheme_flag, classifier_flag;
  std::optional<int> workers_flag;

  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--seed", seed_flag, "seed for all stochastic steps");
  app.add_option("--workers", workers_flag, "parallel worker cap");

  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  synth->add_option("--out", out_dir, "output directory")->required();

  auto* extract = app.add_subcommand("extract", "window features from raw samples");
  extract->add_option("--accel", accel_path, "accelerometer CSV")->required();
  extract->add_option("--out", out_dir, "output directory")->required();

  auto* observe = app.add_subcommand("observe", "build labeled observations");
  observe->add_option("--features", features_path, "window feature CSV")->required();
  observe->add_option("--surveys", surveys_path, "survey CSV")->required();
  observe->add_option("--out", out_dir, "output directory")->required();

  auto* explore = app.add_subcommand("explore", "exploratory statistics");
  explore->add_option("--observations", observations_path, "observation CSV")->required();
  explore->add_option("--surveys", surveys_path, "survey CSV")->required();
  explore->add_option("--window-features", window_features_path,
                      "optional window feature CSV for a window-level screen");
  explore->add_option("--out", out_dir, "output directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "train and evaluate a scheme");
  evaluate->add_option("--observations", observations_path, "observation CSV")->required();
  evaluate->add_option("--scheme", scheme_flag,
                       "user-specific | general | similar-users");
  evaluate->add_option("--classifier", classifier_flag,
                       "naive-bayes | decision-tree | ordinal-naive-bayes | random");
  evaluate->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  RunConfig cfg = load_config(config_path);
  if (seed_flag) cfg.seed = *seed_flag;
  if (workers_flag) cfg.workers = *workers_flag;
  if (scheme_flag) cfg.scheme = *scheme_flag;
  if (classifier_flag) cfg.classifier = *classifier_flag;
  validate(cfg);

  if (synth->parsed()) return cmd_synth(cfg, out_dir);
  if (extract->parsed()) return cmd_extract(cfg, accel_path, out_dir);
  if (observe->parsed()) return cmd_observe(cfg, features_path, surveys_path, out_dir);
  if (explore->parsed()) {
    return cmd_explore(cfg, observations_path, surveys_path, out_dir,
                       window_features_path);
  }
  if (evaluate->parsed()) return cmd_evaluate(cfg, observations_path, out_dir);
  std::cerr << "no subcommand\n";
  return 1;
}

int main(int argc, char** argv) {
  try {
    return run_main(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
