#pragma once

#include <algorithm>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "stresskit/common.hpp"
#include "stresskit/csv.hpp"

namespace stresskit {

// One timestamped triaxial accelerometer reading. Axis values are in m/s²
// and are guaranteed finite once a sample has passed parsing.
struct AccelSample {
  std::string user_id;
  std::int64_t timestamp_ms = 0;
  double x = 0.0, y = 0.0, z = 0.0;

  bool operator==(const AccelSample&) const = default;
};

// One self-reported stress score: day_slot 1/2/3 = morning, afternoon,
// end of workday; raw_score on the 1..5 scale.
struct SurveyResponse {
  std::string user_id;
  std::int64_t timestamp_ms = 0;
  int day_slot = 0;
  int raw_score = 0;

  bool operator==(const SurveyResponse&) const = default;
};

// All records of one user, samples and surveys sorted by timestamp.
// Immutable after build_sessions; safe to share read-only across threads.
struct UserSession {
  std::string user_id;
  std::vector<AccelSample> samples;
  std::vector<SurveyResponse> surveys;
  double nominal_rate_hz = 5.0;
};

struct RowRejection {
  std::size_t line = 0;
  std::string reason;
};

template <typename T>
struct ParseResult {
  std::vector<T> records;
  std::vector<RowRejection> rejected;
};

// Column names expected in the header row; remap when ingesting files that
// use different labels for the same columns.
struct AccelSchema {
  std::string user_col = "user_id";
  std::string ts_col = "timestamp_ms";
  std::string x_col = "x";
  std::string y_col = "y";
  std::string z_col = "z";
};

struct SurveySchema {
  std::string user_col = "user_id";
  std::string ts_col = "timestamp_ms";
  std::string slot_col = "day_slot";
  std::string score_col = "stress_score";
};

// Calendar days (for per-day survey-slot uniqueness) are resolved in a fixed
// UTC offset; default +01:00.
struct IngestConfig {
  int utc_offset_minutes = 60;
};

namespace detail {

inline int find_column(const std::vector<std::string_view>& header,
                       const std::string& name, const std::string& path) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  throw std::runtime_error("missing column '" + name + "' in " + path);
}

}  // namespace detail

// Parses an accelerometer CSV. Malformed rows (wrong field count,
// non-numeric or non-finite axis values, bad timestamps) become rejection
// entries with their line number; surviving samples are sorted by
// (user_id, timestamp) and per-user duplicate timestamps are rejected in
// favour of the row that appeared first in the file.
inline ParseResult<AccelSample> parse_accel_file(
    const std::string& path, const AccelSchema& schema = {}) {
  ParseResult<AccelSample> result;
  std::vector<std::pair<std::size_t, AccelSample>> rows;
  int ci_user = -1, ci_ts = -1, ci_x = -1, ci_y = -1, ci_z = -1;

  const bool opened = for_each_csv_row(
      path,
      [&](const std::vector<std::string_view>& header) {
        ci_user = detail::find_column(header, schema.user_col, path);
        ci_ts = detail::find_column(header, schema.ts_col, path);
        ci_x = detail::find_column(header, schema.x_col, path);
        ci_y = detail::find_column(header, schema.y_col, path);
        ci_z = detail::find_column(header, schema.z_col, path);
      },
      [&](std::size_t line, const std::vector<std::string_view>& f) {
        const std::size_t needed = static_cast<std::size_t>(
            std::max({ci_user, ci_ts, ci_x, ci_y, ci_z}) + 1);
        if (f.size() < needed) {
          result.rejected.push_back({line, "too few fields"});
          return;
        }
        auto ts = parse_int_field(f[ci_ts]);
        if (!ts) {
          result.rejected.push_back({line, "bad timestamp_ms"});
          return;
        }
        auto px = parse_double_field(f[ci_x]);
        auto py = parse_double_field(f[ci_y]);
        auto pz = parse_double_field(f[ci_z]);
        if (!px || !py || !pz) {
          result.rejected.push_back({line, "non-numeric or non-finite axis value"});
          return;
        }
        if (f[ci_user].empty()) {
          result.rejected.push_back({line, "empty user_id"});
          return;
        }
        rows.push_back({line, AccelSample{std::string(f[ci_user]), *ts, *px, *py, *pz}});
      });
  if (!opened) throw std::runtime_error("cannot open accel file: " + path);

  // Order-insensitive result: sort by user/timestamp, line number last so the
  // earliest file row wins a duplicate-timestamp conflict.
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.second.user_id, a.second.timestamp_ms, a.first) <
           std::tie(b.second.user_id, b.second.timestamp_ms, b.first);
  });
  result.records.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!result.records.empty() &&
        result.records.back().user_id == rows[i].second.user_id &&
        result.records.back().timestamp_ms == rows[i].second.timestamp_ms) {
      result.rejected.push_back(
          {rows[i].first, "duplicate timestamp for user " + rows[i].second.user_id});
      continue;
    }
    result.records.push_back(std::move(rows[i].second));
  }
  return result;
}

// Parses a survey CSV. Scores outside 1..5 and slots outside 1..3 are
// rejected per row; for each (user, calendar day, slot) only the earliest
// file row is kept.
inline ParseResult<SurveyResponse> parse_survey_file(
    const std::string& path, const SurveySchema& schema = {},
    const IngestConfig& cfg = {}) {
  ParseResult<SurveyResponse> result;
  std::vector<std::pair<std::size_t, SurveyResponse>> rows;
  int ci_user = -1, ci_ts = -1, ci_slot = -1, ci_score = -1;

  const bool opened = for_each_csv_row(
      path,
      [&](const std::vector<std::string_view>& header) {
        ci_user = detail::find_column(header, schema.user_col, path);
        ci_ts = detail::find_column(header, schema.ts_col, path);
        ci_slot = detail::find_column(header, schema.slot_col, path);
        ci_score = detail::find_column(header, schema.score_col, path);
      },
      [&](std::size_t line, const std::vector<std::string_view>& f) {
        const std::size_t needed = static_cast<std::size_t>(
            std::max({ci_user, ci_ts, ci_slot, ci_score}) + 1);
        if (f.size() < needed) {
          result.rejected.push_back({line, "too few fields"});
          return;
        }
        auto ts = parse_int_field(f[ci_ts]);
        auto slot = parse_int_field(f[ci_slot]);
        auto score = parse_int_field(f[ci_score]);
        if (!ts) {
          result.rejected.push_back({line, "bad timestamp_ms"});
          return;
        }
        if (!slot || *slot < 1 || *slot > 3) {
          result.rejected.push_back({line, "day_slot outside 1..3"});
          return;
        }
        if (!score || *score < 1 || *score > 5) {
          result.rejected.push_back({line, "stress_score outside 1..5"});
          return;
        }
        if (f[ci_user].empty()) {
          result.rejected.push_back({line, "empty user_id"});
          return;
        }
        rows.push_back({line, SurveyResponse{std::string(f[ci_user]), *ts,
                                             static_cast<int>(*slot),
                                             static_cast<int>(*score)}});
      });
  if (!opened) throw std::runtime_error("cannot open survey file: " + path);

  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.second.user_id, a.second.timestamp_ms, a.first) <
           std::tie(b.second.user_id, b.second.timestamp_ms, b.first);
  });
  std::set<std::tuple<std::string, std::int64_t, int>> seen;
  for (auto& [line, rec] : rows) {
    auto key = std::make_tuple(rec.user_id,
                               day_index(rec.timestamp_ms, cfg.utc_offset_minutes),
                               rec.day_slot);
    if (!seen.insert(key).second) {
      result.rejected.push_back(
          {line, "duplicate survey for user " + rec.user_id + " day slot " +
                     std::to_string(rec.day_slot)});
      continue;
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

struct SessionIndex {
  std::map<std::string, UserSession> sessions;
  std::vector<std::string> warnings;
};

// Groups validated samples and surveys into one session per user appearing
// in either input. Users with surveys but no samples are flagged, never
// dropped.
inline SessionIndex build_sessions(std::vector<AccelSample> samples,
                                   std::vector<SurveyResponse> surveys,
                                   double nominal_rate_hz = 5.0) {
  SessionIndex index;
  for (auto& s : samples) {
    auto& session = index.sessions[s.user_id];
    session.user_id = s.user_id;
    session.nominal_rate_hz = nominal_rate_hz;
    session.samples.push_back(std::move(s));
  }
  for (auto& s : surveys) {
    auto& session = index.sessions[s.user_id];
    session.user_id = s.user_id;
    session.nominal_rate_hz = nominal_rate_hz;
    session.surveys.push_back(std::move(s));
  }
  for (auto& [user, session] : index.sessions) {
    std::sort(session.samples.begin(), session.samples.end(),
              [](const auto& a, const auto& b) {
                return a.timestamp_ms < b.timestamp_ms;
              });
    std::sort(session.surveys.begin(), session.surveys.end(),
              [](const auto& a, const auto& b) {
                return a.timestamp_ms < b.timestamp_ms;
              });
    if (session.samples.empty() && !session.surveys.empty()) {
      index.warnings.push_back("user " + user +
                               " has surveys but no accelerometer samples");
    }
  }
  return index;
}

inline void write_accel_csv(std::ostream& out, std::span<const AccelSample> samples) {
  out << "user_id,timestamp_ms,x,y,z\n";
  for (const auto& s : samples) {
    out << s.user_id << ',' << s.timestamp_ms << ',' << format_double(s.x)
        << ',' << format_double(s.y) << ',' << format_double(s.z) << '\n';
  }
}

inline void write_survey_csv(std::ostream& out,
                             std::span<const SurveyResponse> surveys) {
  out << "user_id,timestamp_ms,day_slot,stress_score\n";
  for (const auto& s : surveys) {
    out << s.user_id << ',' << s.timestamp_ms << ',' << s.day_slot << ','
        << s.raw_score << '\n';
  }
}

}  // namespace stresskit
