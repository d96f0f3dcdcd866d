#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "stresskit/ingest.hpp"

namespace fs = std::filesystem;
using namespace stresskit;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = fs::path(testing::TempDir()) / name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path.string();
}

}  // namespace

TEST(ParseAccel, IdentityParseAtNominalRate) {
  const auto path = write_temp("accel_ok.csv",
                               "user_id,timestamp_ms,x,y,z\n"
                               "u1,0,0,0,9.81\n"
                               "u1,200,0,0,9.81\n"
                               "u1,400,0,0,9.81\n");
  const auto result = parse_accel_file(path);
  ASSERT_EQ(result.records.size(), 3u);
  EXPECT_TRUE(result.rejected.empty());
  EXPECT_EQ(result.records[1].timestamp_ms - result.records[0].timestamp_ms, 200);
  EXPECT_EQ(result.records[2].timestamp_ms - result.records[1].timestamp_ms, 200);
  EXPECT_DOUBLE_EQ(result.records[0].z, 9.81);
}

TEST(ParseAccel, NonNumericAxisRejectedWithLineNumber) {
  const auto path = write_temp("accel_bad.csv",
                               "user_id,timestamp_ms,x,y,z\n"
                               "u1,0,0,0,9.81\n"
                               "u1,200,abc,0,9.81\n"
                               "u1,400,0,0,9.81\n");
  const auto result = parse_accel_file(path);
  EXPECT_EQ(result.records.size(), 2u);
  ASSERT_EQ(result.rejected.size(), 1u);
  EXPECT_EQ(result.rejected[0].line, 3u);
}

TEST(ParseAccel, NonFiniteValuesRejected) {
  const auto path = write_temp("accel_inf.csv",
                               "user_id,timestamp_ms,x,y,z\n"
                               "u1,0,inf,0,9.81\n"
                               "u1,200,0,nan,9.81\n");
  const auto result = parse_accel_file(path);
  EXPECT_TRUE(result.records.empty());
  EXPECT_EQ(result.rejected.size(), 2u);
}

TEST(ParseAccel, OutOfOrderRowsAreSorted) {
  const auto path = write_temp("accel_unsorted.csv",
                               "user_id,timestamp_ms,x,y,z\n"
                               "u1,400,1,0,0\n"
                               "u1,0,2,0,0\n"
                               "u1,200,3,0,0\n");
  const auto result = parse_accel_file(path);
  ASSERT_EQ(result.records.size(), 3u);
  EXPECT_EQ(result.records[0].timestamp_ms, 0);
  EXPECT_EQ(result.records[1].timestamp_ms, 200);
  EXPECT_EQ(result.records[2].timestamp_ms, 400);
}

TEST(ParseAccel, DuplicateTimestampRejectsLaterRow) {
  const auto path = write_temp("accel_dup.csv",
                               "user_id,timestamp_ms,x,y,z\n"
                               "u1,0,1,0,0\n"
                               "u1,0,2,0,0\n"
                               "u2,0,3,0,0\n");
  const auto result = parse_accel_file(path);
  ASSERT_EQ(result.records.size(), 2u);
  EXPECT_DOUBLE_EQ(result.records[0].x, 1.0);  // first file row wins
  ASSERT_EQ(result.rejected.size(), 1u);
  EXPECT_EQ(result.rejected[0].line, 3u);
}

TEST(ParseAccel, MissingFileThrows) {
  EXPECT_THROW(parse_accel_file("/nonexistent/accel.csv"), std::runtime_error);
}

TEST(ParseAccel, MissingColumnThrows) {
  const auto path = write_temp("accel_cols.csv", "user_id,timestamp_ms,x,y\nu1,0,0,0\n");
  EXPECT_THROW(parse_accel_file(path), std::runtime_error);
}

TEST(ParseAccel, EmptyFileYieldsNoRecords) {
  const auto path = write_temp("accel_empty.csv", "");
  const auto result = parse_accel_file(path);
  EXPECT_TRUE(result.records.empty());
  EXPECT_TRUE(result.rejected.empty());
}

TEST(ParseSurvey, ValidRow) {
  const auto path = write_temp("survey_ok.csv",
                               "user_id,timestamp_ms,day_slot,stress_score\n"
                               "u1,1000,2,4\n");
  const auto result = parse_survey_file(path);
  ASSERT_EQ(result.records.size(), 1u);
  EXPECT_EQ(result.records[0].day_slot, 2);
  EXPECT_EQ(result.records[0].raw_score, 4);
}

TEST(ParseSurvey, ScoreOutOfRangeRejected) {
  const auto path = write_temp("survey_range.csv",
                               "user_id,timestamp_ms,day_slot,stress_score\n"
                               "u1,1000,2,6\n"
                               "u1,2000,3,0\n"
                               "u1,3000,1,5\n");
  const auto result = parse_survey_file(path);
  EXPECT_EQ(result.records.size(), 1u);
  EXPECT_EQ(result.rejected.size(), 2u);
}

TEST(ParseSurvey, DuplicateSlotPerDayRejected) {
  // Both rows fall on the same calendar day in the +01:00 default offset.
  const auto path = write_temp("survey_dup.csv",
                               "user_id,timestamp_ms,day_slot,stress_score\n"
                               "u1,1000,2,4\n"
                               "u1,5000000,2,5\n");
  const auto result = parse_survey_file(path);
  ASSERT_EQ(result.records.size(), 1u);
  EXPECT_EQ(result.records[0].raw_score, 4);
  ASSERT_EQ(result.rejected.size(), 1u);
  EXPECT_EQ(result.rejected[0].line, 3u);
}

TEST(ParseSurvey, SameSlotOnDifferentDaysKept) {
  const auto path = write_temp("survey_days.csv",
                               "user_id,timestamp_ms,day_slot,stress_score\n"
                               "u1,1000,2,4\n"
                               "u1,90000000,2,5\n");
  const auto result = parse_survey_file(path);
  EXPECT_EQ(result.records.size(), 2u);
}

TEST(BuildSessions, GroupsByUser) {
  std::vector<AccelSample> samples = {{"u1", 0, 0, 0, 1}, {"u2", 0, 0, 0, 1}};
  std::vector<SurveyResponse> surveys = {{"u1", 5, 2, 3}, {"u2", 5, 2, 3}};
  const auto index = build_sessions(samples, surveys);
  EXPECT_EQ(index.sessions.size(), 2u);
  EXPECT_TRUE(index.warnings.empty());
}

TEST(BuildSessions, SurveysOnlyUserFlagged) {
  const auto index = build_sessions({}, {{"u9", 5, 2, 3}});
  ASSERT_EQ(index.sessions.size(), 1u);
  EXPECT_TRUE(index.sessions.at("u9").samples.empty());
  ASSERT_EQ(index.warnings.size(), 1u);
  EXPECT_NE(index.warnings[0].find("u9"), std::string::npos);
}

TEST(BuildSessions, EmptyInputsYieldEmptyMap) {
  const auto index = build_sessions({}, {});
  EXPECT_TRUE(index.sessions.empty());
}

TEST(IngestRoundTrip, WriteThenParseYieldsIdenticalRecords) {
  std::mt19937_64 rng(7);
  std::vector<AccelSample> samples;
  std::vector<SurveyResponse> surveys;
  for (int u = 0; u < 3; ++u) {
    const std::string user = "user" + std::to_string(u);
    for (int i = 0; i < 50; ++i) {
      samples.push_back({user, i * 200,
                         next_uniform(rng) * 20 - 10,
                         next_uniform(rng) * 20 - 10,
                         9.81 + next_uniform(rng)});
    }
    surveys.push_back({user, 1'000'000 + u, 2, 1 + static_cast<int>(next_below(rng, 5))});
  }

  const auto accel_path = fs::path(testing::TempDir()) / "roundtrip_accel.csv";
  const auto survey_path = fs::path(testing::TempDir()) / "roundtrip_survey.csv";
  {
    std::ofstream out(accel_path, std::ios::binary);
    write_accel_csv(out, samples);
    std::ofstream sout(survey_path, std::ios::binary);
    write_survey_csv(sout, surveys);
  }
  const auto parsed_accel = parse_accel_file(accel_path.string());
  const auto parsed_survey = parse_survey_file(survey_path.string());
  EXPECT_TRUE(parsed_accel.rejected.empty());
  EXPECT_TRUE(parsed_survey.rejected.empty());
  ASSERT_EQ(parsed_accel.records.size(), samples.size());
  // Parse output is sorted by (user, timestamp); our input already is.
  EXPECT_EQ(parsed_accel.records, samples);
  EXPECT_EQ(parsed_survey.records, surveys);
}

TEST(ParseAccel, SchemaRemapsColumnNames) {
  const auto path = write_temp("accel_schema.csv",
                               "device,ms,ax,ay,az\n"
                               "u1,0,1,2,3\n"
                               "u1,200,4,5,6\n");
  AccelSchema schema;
  schema.user_col = "device";
  schema.ts_col = "ms";
  schema.x_col = "ax";
  schema.y_col = "ay";
  schema.z_col = "az";
  const auto result = parse_accel_file(path, schema);
  ASSERT_EQ(result.records.size(), 2u);
  EXPECT_DOUBLE_EQ(result.records[1].y, 5.0);
}

TEST(ParseAccel, ColumnsMayAppearInAnyOrder) {
  const auto path = write_temp("accel_order.csv",
                               "z,y,x,timestamp_ms,user_id\n"
                               "3,2,1,0,u1\n");
  const auto result = parse_accel_file(path);
  ASSERT_EQ(result.records.size(), 1u);
  EXPECT_DOUBLE_EQ(result.records[0].x, 1.0);
  EXPECT_DOUBLE_EQ(result.records[0].z, 3.0);
}

TEST(ParseSurvey, DayBoundaryFollowsConfiguredUtcOffset) {
  // 23:30 UTC on day 0 is already day 1 in a +01:00 offset, so these two
  // rows land on different calendar days and both survive.
  const std::int64_t late_utc = 23LL * 3'600'000 + 30LL * 60'000;
  const std::int64_t next_morning = 24LL * 3'600'000 + 8LL * 3'600'000;
  const auto path = write_temp(
      "survey_offset.csv",
      "user_id,timestamp_ms,day_slot,stress_score\n"
      "u1," + std::to_string(late_utc) + ",3,4\n"
      "u1," + std::to_string(next_morning) + ",3,4\n");
  IngestConfig plus_one;
  plus_one.utc_offset_minutes = 60;
  const auto split = parse_survey_file(path, {}, plus_one);
  EXPECT_EQ(split.records.size(), 1u);  // both map to local day 1: duplicate
  IngestConfig utc;
  utc.utc_offset_minutes = 0;
  const auto kept = parse_survey_file(path, {}, utc);
  EXPECT_EQ(kept.records.size(), 2u);
}

TEST(IngestProperties, ParsingIsOrderInsensitive) {
  std::mt19937_64 rng(11);
  std::vector<std::string> rows;
  for (int u = 0; u < 2; ++u) {
    for (int i = 0; i < 30; ++i) {
      rows.push_back("user" + std::to_string(u) + "," + std::to_string(i * 200) +
                     ",1,2,3");
    }
  }
  auto write_rows = [&](const std::string& name) {
    std::string content = "user_id,timestamp_ms,x,y,z\n";
    for (const auto& r : rows) content += r + "\n";
    return write_temp(name, content);
  };
  const auto sorted_path = write_rows("order_a.csv");
  deterministic_shuffle(rows, rng);
  const auto shuffled_path = write_rows("order_b.csv");

  const auto a = parse_accel_file(sorted_path);
  const auto b = parse_accel_file(shuffled_path);
  EXPECT_EQ(a.records, b.records);
  const auto sessions_a = build_sessions(a.records, {});
  const auto sessions_b = build_sessions(b.records, {});
  ASSERT_EQ(sessions_a.sessions.size(), sessions_b.sessions.size());
  for (const auto& [user, session] : sessions_a.sessions) {
    EXPECT_EQ(session.samples, sessions_b.sessions.at(user).samples);
  }
}
