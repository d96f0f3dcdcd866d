#pragma once

#include <array>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "stresskit/common.hpp"
#include "stresskit/ingest.hpp"
#include "stresskit/observations.hpp"

namespace stresskit {

// --------------------------------------------------------------------------
// Cohort specification
// --------------------------------------------------------------------------

// Signal parameters of one archetype at one stress level.
struct LevelParams {
  double base_amp = 0.0;     // sinusoid amplitude, m/s^2
  double tremor_amp = 0.0;   // high-frequency secondary component
  double freq_hz = 0.5;      // dominant frequency; must stay below Nyquist
  double bursts_per_hour = 0.0;
  double noise_sd = 0.0;     // AR(1) innovation standard deviation
};

enum class Monotonicity { RisesWithStress, FallsWithStress, Flat };

// How one behavioural archetype moves at each stress level. Mirrored
// archetypes (one rising, one falling with stress) are what makes pooled
// cross-user training data antagonistic.
struct ArchetypeSpec {
  std::string name;
  std::array<LevelParams, kNumLevels> per_level;
  Monotonicity direction = Monotonicity::Flat;
};

struct CohortSpec {
  std::vector<std::pair<ArchetypeSpec, int>> archetypes;  // spec, user count
  int days_per_user = 10;
  // Local minutes after midnight of the three survey slots.
  std::array<int, 3> slot_minutes = {9 * 60, 13 * 60, 17 * 60};
  double rate_hz = 5.0;
  // Accelerometer coverage emitted before each slot-2/slot-3 survey. There
  // is deliberately no data before the first survey of a day.
  int accel_minutes_per_slot = 10;
  std::array<double, kNumLevels> level_probs = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  // Per-user amplitude variation: a relative multiplier plus an additive
  // offset (m/s^2). The offset blurs class boundaries across users while
  // cancelling exactly in behavior-vector median differences, so it widens
  // the user-specific vs similar-users gap without touching clustering.
  double user_amp_jitter = 0.15;
  double user_amp_offset = 0.0;
  double dropout_prob = 0.0;  // per-sample drop chance; injects gaps
  int utc_offset_minutes = 60;
  std::uint64_t seed = 1;
};

inline void validate_spec(const CohortSpec& spec) {
  if (spec.archetypes.empty()) {
    throw std::invalid_argument("cohort spec needs at least one archetype");
  }
  for (const auto& [arch, count] : spec.archetypes) {
    if (count < 1) throw std::invalid_argument("archetype user count must be >= 1");
    for (const auto& lp : arch.per_level) {
      if (lp.base_amp < 0.0 || lp.tremor_amp < 0.0 || lp.noise_sd < 0.0) {
        throw std::invalid_argument("archetype amplitudes must be >= 0");
      }
      if (!(lp.freq_hz > 0.0 && lp.freq_hz <= spec.rate_hz / 2.0)) {
        throw std::invalid_argument(
            "dominant frequency must lie in (0, rate/2]");
      }
    }
  }
  if (spec.days_per_user < 1) throw std::invalid_argument("days_per_user must be >= 1");
  if (spec.accel_minutes_per_slot < 1) {
    throw std::invalid_argument("accel_minutes_per_slot must be >= 1");
  }
  double total = 0.0;
  for (double p : spec.level_probs) {
    if (p < 0.0) throw std::invalid_argument("level probabilities must be >= 0");
    total += p;
  }
  if (total <= 0.0) throw std::invalid_argument("level probabilities sum to 0");
  if (spec.dropout_prob < 0.0 || spec.dropout_prob >= 1.0) {
    throw std::invalid_argument("dropout_prob must lie in [0, 1)");
  }
}

struct ManifestRow {
  std::string user_id;
  std::int64_t survey_ts = 0;
  StressLevel true_level = StressLevel::Low;
  std::string archetype;
};

struct GeneratedCohort {
  std::vector<AccelSample> samples;
  std::vector<SurveyResponse> surveys;
  std::vector<ManifestRow> manifest;
};

// --------------------------------------------------------------------------
// Generation
// --------------------------------------------------------------------------

namespace detail {

// First Monday of 2024 in UTC; weekday days are counted from here so the
// generated study never touches a weekend.
inline constexpr std::int64_t kStudyEpochDay = 19723;  // 2024-01-01

inline std::int64_t nth_weekday_ms(int day_number, int minutes,
                                   int utc_offset_minutes) {
  const std::int64_t day = kStudyEpochDay + (day_number / 5) * 7 + day_number % 5;
  return day * kMsPerDay + std::int64_t{minutes} * 60'000 -
         std::int64_t{utc_offset_minutes} * 60'000;
}

template <class Engine>
inline StressLevel draw_level(const std::array<double, kNumLevels>& probs,
                              Engine& rng) {
  double total = 0.0;
  for (double p : probs) total += p;
  const double u = next_uniform(rng) * total;
  double cum = 0.0;
  for (int c = 0; c < kNumLevels; ++c) {
    cum += probs[static_cast<std::size_t>(c)];
    if (u < cum) return level_from_code(c);
  }
  return StressLevel::High;
}

template <class Engine>
inline int draw_score(StressLevel level, Engine& rng) {
  switch (level) {
    case StressLevel::Low: return next_uniform(rng) < 0.5 ? 1 : 2;
    case StressLevel::Medium: return 3;
    case StressLevel::High: return next_uniform(rng) < 0.5 ? 4 : 5;
  }
  return 3;
}

}  // namespace detail

// Draws each user's surveys and synthesises the accelerometer stream as
// gravity baseline + level-dependent sinusoid + AR(1) noise + Poisson
// activity bursts, at exactly 1000/rate ms spacing. Every latent choice is
// recorded in the manifest. Per-user streams use seeds derived from the
// cohort seed, so output is byte-stable and users are independent.
inline GeneratedCohort generate_cohort(const CohortSpec& spec) {
  validate_spec(spec);
  GeneratedCohort out;
  const auto period_ms = static_cast<std::int64_t>(1000.0 / spec.rate_hz);
  const double dt = 1.0 / spec.rate_hz;
  const int samples_per_slot = static_cast<int>(
      spec.accel_minutes_per_slot * 60 * static_cast<int>(spec.rate_hz));

  int user_counter = 0;
  for (const auto& [arch, count] : spec.archetypes) {
    for (int u = 0; u < count; ++u, ++user_counter) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "u%02d", user_counter);
      const std::string user_id = arch.name + "_" + buf;
      std::mt19937_64 rng(derive_seed(spec.seed, "user:" + user_id));
      GaussianSampler<std::mt19937_64> gauss;

      const double amp_mult =
          1.0 + spec.user_amp_jitter * (2.0 * next_uniform(rng) - 1.0);
      const double amp_offset =
          spec.user_amp_offset * (2.0 * next_uniform(rng) - 1.0);
      const double phase = 2.0 * std::numbers::pi * next_uniform(rng);

      for (int day = 0; day < spec.days_per_user; ++day) {
        for (int slot = 1; slot <= 3; ++slot) {
          const std::int64_t survey_ts = detail::nth_weekday_ms(
              day, spec.slot_minutes[static_cast<std::size_t>(slot - 1)],
              spec.utc_offset_minutes);
          const StressLevel level = detail::draw_level(spec.level_probs, rng);
          const int score = detail::draw_score(level, rng);
          out.surveys.push_back({user_id, survey_ts, slot, score});
          out.manifest.push_back({user_id, survey_ts, level, arch.name});

          if (slot == 1) continue;  // no accelerometer data before slot 1

          const auto& lp = arch.per_level[static_cast<std::size_t>(level_code(level))];
          const double amp = std::max(0.0, lp.base_amp * amp_mult + amp_offset);
          // The tremor keeps its specified ratio to the base amplitude, so
          // every level-dependent component is blurred by the same per-user
          // variation and no single component transfers across users
          // unblurred.
          const double tremor_amp =
              lp.base_amp > 0.0 ? lp.tremor_amp * (amp / lp.base_amp)
                                : lp.tremor_amp * amp_mult;
          std::array<double, 3> ar{};  // AR(1) state per axis
          double burst = 0.0;
          const double burst_p = lp.bursts_per_hour / 3600.0 * dt;
          const std::int64_t first_ts =
              survey_ts - static_cast<std::int64_t>(samples_per_slot - 1) * period_ms;
          for (int i = 0; i < samples_per_slot; ++i) {
            const double t = static_cast<double>(i) * dt;
            const double carrier =
                std::sin(2.0 * std::numbers::pi * lp.freq_hz * t + phase);
            const double tremor = tremor_amp *
                std::sin(2.0 * std::numbers::pi * 2.2 * t + 2.0 * phase);
            for (double& a : ar) a = 0.5 * a + lp.noise_sd * gauss(rng);
            burst *= std::exp(-dt / 0.8);
            if (next_uniform(rng) < burst_p) burst += 2.0 * (amp + 0.5);
            AccelSample s;
            s.user_id = user_id;
            s.timestamp_ms = first_ts + static_cast<std::int64_t>(i) * period_ms;
            s.x = amp * carrier + tremor + ar[0] + burst;
            s.y = 0.6 * amp * std::cos(2.0 * std::numbers::pi * lp.freq_hz * t + phase) +
                  ar[1] + 0.7 * burst;
            s.z = 9.81 + 0.3 * tremor + ar[2];
            if (spec.dropout_prob > 0.0 && next_uniform(rng) < spec.dropout_prob) {
              continue;
            }
            out.samples.push_back(std::move(s));
          }
        }
      }
    }
  }
  return out;
}

// The default verification cohort: two mirrored archetypes whose dominant
// amplitude rises resp. falls with stress, with level separation well above
// the noise floor.
inline CohortSpec default_mirrored_cohort(std::uint64_t seed,
                                          int users_per_archetype = 6,
                                          int days_per_user = 10) {
  auto level = [](double amp, double tremor, double freq, double bursts,
                  double noise) {
    return LevelParams{amp, tremor, freq, bursts, noise};
  };
  // A single dominant frequency and burst rate across levels keeps the
  // label signal in the amplitude alone, where the per-user offset can blur
  // it across users; within one user the levels stay cleanly separated.
  ArchetypeSpec riser;
  riser.name = "riser";
  riser.direction = Monotonicity::RisesWithStress;
  riser.per_level = {level(0.45, 0.05, 0.9, 3.0, 0.05),
                     level(1.00, 0.10, 0.9, 3.0, 0.05),
                     level(1.55, 0.16, 0.9, 3.0, 0.05)};
  ArchetypeSpec faller;
  faller.name = "faller";
  faller.direction = Monotonicity::FallsWithStress;
  faller.per_level = {level(1.55, 0.16, 0.9, 3.0, 0.05),
                      level(1.00, 0.10, 0.9, 3.0, 0.05),
                      level(0.45, 0.05, 0.9, 3.0, 0.05)};

  CohortSpec spec;
  spec.archetypes = {{riser, users_per_archetype}, {faller, users_per_archetype}};
  spec.days_per_user = days_per_user;
  spec.user_amp_jitter = 0.15;
  spec.user_amp_offset = 0.35;
  spec.seed = seed;
  return spec;
}

// --------------------------------------------------------------------------
// Ground-truth join
// --------------------------------------------------------------------------

struct TruthRow {
  const Observation* obs = nullptr;
  StressLevel true_level = StressLevel::Low;
  std::string archetype;
};

// Attaches the generating stress level to each built observation. An
// observation without a manifest entry signals pipeline misalignment and is
// an error.
inline std::vector<TruthRow> oracle_labels(
    std::span<const ManifestRow> manifest,
    std::span<const Observation> observations) {
  std::map<std::pair<std::string, std::int64_t>, const ManifestRow*> index;
  for (const auto& row : manifest) {
    index[{row.user_id, row.survey_ts}] = &row;
  }
  std::vector<TruthRow> out;
  out.reserve(observations.size());
  for (const auto& o : observations) {
    auto it = index.find({o.user_id, o.survey_ts});
    if (it == index.end()) {
      throw std::runtime_error("observation has no manifest entry: " +
                               observation_id(o));
    }
    out.push_back({&o, it->second->true_level, it->second->archetype});
  }
  return out;
}

inline void write_manifest_csv(std::ostream& os,
                               std::span<const ManifestRow> manifest) {
  os << "user_id,survey_ts,true_level,archetype\n";
  for (const auto& row : manifest) {
    os << row.user_id << ',' << row.survey_ts << ','
       << level_code(row.true_level) << ',' << row.archetype << '\n';
  }
}

inline std::vector<ManifestRow> read_manifest_csv(const std::string& path) {
  std::vector<ManifestRow> rows;
  const bool opened = for_each_csv_row(
      path,
      [&](const std::vector<std::string_view>& header) {
        if (header.size() < 4 || header[0] != "user_id" ||
            header[1] != "survey_ts" || header[2] != "true_level" ||
            header[3] != "archetype") {
          throw std::runtime_error("unexpected manifest header in " + path);
        }
      },
      [&](std::size_t line, const std::vector<std::string_view>& f) {
        if (f.size() < 4) {
          throw std::runtime_error("manifest row " + std::to_string(line) +
                                   " is malformed");
        }
        ManifestRow row;
        row.user_id = std::string(f[0]);
        const auto ts = parse_int_field(f[1]);
        const auto lvl = parse_int_field(f[2]);
        if (!ts || !lvl) {
          throw std::runtime_error("manifest row " + std::to_string(line) +
                                   " is malformed");
        }
        row.survey_ts = *ts;
        row.true_level = level_from_code(static_cast<int>(*lvl));
        row.archetype = std::string(f[3]);
        rows.push_back(std::move(row));
      });
  if (!opened) throw std::runtime_error("cannot open manifest file: " + path);
  return rows;
}

}  // namespace stresskit
