#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace stresskit {

// Ordinal stress level. The total order Low < Medium < High is part of the
// contract; code values 0/1/2 appear as-is in files and metrics.
enum class StressLevel : int { Low = 0, Medium = 1, High = 2 };

inline constexpr int kNumLevels = 3;

inline constexpr int level_code(StressLevel l) { return static_cast<int>(l); }

inline StressLevel level_from_code(int code) {
  if (code < 0 || code >= kNumLevels) {
    throw std::invalid_argument("stress level code out of range: " +
                                std::to_string(code));
  }
  return static_cast<StressLevel>(code);
}

inline const char* level_name(StressLevel l) {
  switch (l) {
    case StressLevel::Low: return "low";
    case StressLevel::Medium: return "medium";
    case StressLevel::High: return "high";
  }
  return "?";
}

// --------------------------------------------------------------------------
// Deterministic seeding
// --------------------------------------------------------------------------

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent sub-seed from a base seed and a textual tag, so
// per-user / per-fold random streams never overlap and are stable no matter
// in which order units execute.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return splitmix64(base ^ h);
}

// --------------------------------------------------------------------------
// Calendar helpers (integer ms since epoch, fixed UTC offset)
// --------------------------------------------------------------------------

inline constexpr std::int64_t kMsPerDay = 86'400'000;

inline constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

inline constexpr std::int64_t day_index(std::int64_t ts_ms,
                                        int utc_offset_minutes) {
  return floor_div(ts_ms + std::int64_t{utc_offset_minutes} * 60'000,
                   kMsPerDay);
}

// 0 = Monday .. 6 = Sunday. Day 0 of the epoch (1970-01-01) is a Thursday.
inline constexpr int weekday(std::int64_t ts_ms, int utc_offset_minutes) {
  std::int64_t d = day_index(ts_ms, utc_offset_minutes) + 3;
  return static_cast<int>(((d % 7) + 7) % 7);
}

inline constexpr bool is_weekend(std::int64_t ts_ms, int utc_offset_minutes) {
  return weekday(ts_ms, utc_offset_minutes) >= 5;
}

// --------------------------------------------------------------------------
// Numeric helpers
// --------------------------------------------------------------------------

// Round-trip-exact text form; identical input bits always yield identical
// text, which is what makes report files byte-reproducible.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "na";
  char buf[40];
  for (int prec : {15, 16}) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// 53-bit uniform in [0, 1). Avoids std::uniform_real_distribution so streams
// do not depend on the standard library implementation.
template <class Engine>
inline double next_uniform(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Marsaglia polar normal draw built on next_uniform for the same reason.
template <class Engine>
class GaussianSampler {
 public:
  double operator()(Engine& rng) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_uniform(rng) - 1.0;
      v = 2.0 * next_uniform(rng) - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

 private:
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Bounded uniform integer draw via rejection; stable across platforms.
template <class Engine>
inline std::uint64_t next_below(Engine& rng, std::uint64_t bound) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

// Fisher-Yates with next_below, so shuffles do not depend on the standard
// library's std::shuffle implementation.
template <class T, class Engine>
inline void deterministic_shuffle(std::vector<T>& v, Engine& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(next_below(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

// Compensated (Kahan) sum; keeps window statistics exact on constant input.
class KahanSum {
 public:
  void add(double v) {
    const double y = v - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

template <class It>
inline double kahan_mean(It first, It last) {
  KahanSum s;
  std::size_t n = 0;
  for (It it = first; it != last; ++it, ++n) s.add(*it);
  if (n == 0) throw std::invalid_argument("mean of empty range");
  return s.value() / static_cast<double>(n);
}

inline double std_normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

// --------------------------------------------------------------------------
// Minimal fork/join helper. Bodies must only touch their own index; outputs
// are merged by index so results never depend on scheduling.
// --------------------------------------------------------------------------

template <class F>
void parallel_for(std::size_t n, int workers, F&& body) {
  if (n == 0) return;
  const std::size_t w =
      std::min<std::size_t>(n, workers <= 1 ? 1 : static_cast<std::size_t>(workers));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(w);
  std::exception_ptr first_error;
  std::mutex err_mutex;
  for (std::size_t t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += w) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace stresskit
