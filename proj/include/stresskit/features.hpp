#pragma once

#include <array>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "stresskit/common.hpp"
#include "stresskit/ingest.hpp"

namespace stresskit {

// A contiguous run of samples of one user, exactly window_length long with
// no intra-window gap above the configured tolerance.
struct Window {
  std::string user_id;
  std::int64_t start_ts = 0;
  std::int64_t end_ts = 0;
  std::vector<AccelSample> samples;
};

struct FeatureConfig {
  int window_length = 128;
  double rate_hz = 5.0;
  // Windows spanning logger gaps would corrupt spectral content; anything
  // above 5x the nominal 200 ms period breaks a window.
  std::int64_t gap_tolerance_ms = 1000;
  // The "3 axes" statistics pool all per-axis values by default; set false
  // to compute them on the magnitude series instead.
  bool pooled_axis_stats = true;
  int entropy_bins = 16;
};

inline constexpr int kNumWindowFeatures = 34;

// Canonical feature order. Every window-feature file column, every
// aggregate name and every index in WindowFeatures::values follows it.
inline constexpr std::array<const char*, kNumWindowFeatures> kFeatureNames = {
    "mean_x",
    "mean_y",
    "mean_z",
    "stddev_x",
    "stddev_y",
    "stddev_z",
    "variance_x",
    "variance_y",
    "variance_z",
    "variance_3axes",
    "mean_3axes",
    "max_3axes",
    "min_3axes",
    "stddev_3axes",
    "absval_3axes",
    "median_3axes",
    "range_3axes",
    "variance_sum",
    "magnitude",
    "sma",
    "rms",
    "curve_length",
    "nonlinear_energy",
    "entropy",
    "energy",
    "mean_energy",
    "stddev_energy",
    "dft",
    "peak_magnitude",
    "peak_magnitude_freq",
    "peak_power",
    "peak_power_freq",
    "magnitude_entropy",
    "power_shannon_entropy",
};

struct WindowFeatures {
  std::string user_id;
  std::int64_t end_ts = 0;
  std::array<double, kNumWindowFeatures> values{};
};

// --------------------------------------------------------------------------
// Series statistics
// --------------------------------------------------------------------------

inline double series_mean(std::span<const double> v) {
  return kahan_mean(v.begin(), v.end());
}

// Population variance (n denominator); two-pass with compensated sums so a
// constant series gives exactly zero.
inline double series_variance(std::span<const double> v) {
  const double m = series_mean(v);
  KahanSum s;
  for (double x : v) s.add((x - m) * (x - m));
  return s.value() / static_cast<double>(v.size());
}

inline double series_stddev(std::span<const double> v) {
  return std::sqrt(series_variance(v));
}

inline double series_median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty series");
  const std::size_t n = v.size();
  auto mid = v.begin() + n / 2;
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  double hi = *mid;
  double lo = *std::max_element(v.begin(), mid);
  return (lo + hi) / 2.0;
}

// Total variation of the series: sum of |x_{i-1} - x_i|.
inline double curve_length(std::span<const double> v) {
  KahanSum s;
  for (std::size_t i = 1; i < v.size(); ++i) s.add(std::abs(v[i - 1] - v[i]));
  return s.value();
}

// Teager-Kaiser operator x_i^2 - x_{i-1} x_{i+1}, averaged over interior
// points.
inline double teager_kaiser_mean(std::span<const double> v) {
  if (v.size() < 3) return 0.0;
  KahanSum s;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    s.add(v[i] * v[i] - v[i - 1] * v[i + 1]);
  }
  return s.value() / static_cast<double>(v.size() - 2);
}

// Histogram plug-in differential entropy with bin-width correction,
// natural log: h = -sum p ln p + ln(bin_width). A constant series has no
// spread to estimate a density on and is defined as 0.
inline double differential_entropy(std::span<const double> v, int bins = 16) {
  if (v.empty()) throw std::invalid_argument("entropy of empty series");
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) return 0.0;
  const double width = (hi - lo) / bins;
  std::vector<std::size_t> counts(bins, 0);
  for (double x : v) {
    int b = static_cast<int>((x - lo) / width);
    if (b >= bins) b = bins - 1;
    if (b < 0) b = 0;
    ++counts[b];
  }
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(v.size());
    h -= p * std::log(p);
  }
  return h + std::log(width);
}

// Shannon entropy in bits of the distribution obtained by normalising the
// non-negative weights to sum 1. All-zero weights degenerate to 0.
inline double shannon_entropy_bits(std::span<const double> weights) {
  KahanSum total;
  for (double w : weights) total.add(w);
  const double t = total.value();
  if (!(t > 0.0)) return 0.0;
  double h = 0.0;
  for (double w : weights) {
    if (w <= 0.0) continue;
    const double p = w / t;
    h -= p * std::log2(p);
  }
  return h;
}

// --------------------------------------------------------------------------
// Windowing
// --------------------------------------------------------------------------

// Greedy left-to-right packing into consecutive fixed-length windows.
// A candidate window containing a gap above tolerance is abandoned and
// packing restarts at the sample after the gap; a trailing remainder
// shorter than window_length is dropped.
inline std::vector<Window> segment_windows(const UserSession& session,
                                           const FeatureConfig& cfg = {}) {
  const int n = cfg.window_length;
  if (n < 2) throw std::invalid_argument("window_length must be >= 2");
  std::vector<Window> windows;
  const auto& s = session.samples;
  std::size_t i = 0;
  while (i + static_cast<std::size_t>(n) <= s.size()) {
    bool gap = false;
    for (std::size_t j = i + 1; j < i + static_cast<std::size_t>(n); ++j) {
      if (s[j].timestamp_ms - s[j - 1].timestamp_ms > cfg.gap_tolerance_ms) {
        i = j;  // restart after the gap
        gap = true;
        break;
      }
    }
    if (gap) continue;
    Window w;
    w.user_id = session.user_id;
    w.start_ts = s[i].timestamp_ms;
    w.end_ts = s[i + n - 1].timestamp_ms;
    w.samples.assign(s.begin() + i, s.begin() + i + n);
    windows.push_back(std::move(w));
    i += static_cast<std::size_t>(n);
  }
  return windows;
}

inline std::vector<double> magnitude_series(const Window& w) {
  std::vector<double> m;
  m.reserve(w.samples.size());
  for (const auto& s : w.samples) {
    m.push_back(std::sqrt(s.x * s.x + s.y * s.y + s.z * s.z));
  }
  return m;
}

// --------------------------------------------------------------------------
// Spectrum
// --------------------------------------------------------------------------

// Magnitudes |X_k| of the discrete Fourier transform, index 0 = DC.
// Power-of-two lengths run through an iterative radix-2 FFT; other lengths
// fall back to the direct O(n^2) sum.
inline std::vector<double> dft_spectrum(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 2) throw std::invalid_argument("dft_spectrum needs >= 2 samples");
  std::vector<std::complex<double>> a(series.begin(), series.end());

  if ((n & (n - 1)) == 0) {
    for (std::size_t i = 1, j = 0; i < n; ++i) {
      std::size_t bit = n >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
      for (std::size_t i = 0; i < n; i += len) {
        for (std::size_t j = 0; j < len / 2; ++j) {
          const auto w = std::polar(1.0, ang * static_cast<double>(j));
          const auto u = a[i + j];
          const auto v = a[i + j + len / 2] * w;
          a[i + j] = u + v;
          a[i + j + len / 2] = u - v;
        }
      }
    }
  } else {
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
      std::complex<double> acc{0.0, 0.0};
      for (std::size_t j = 0; j < n; ++j) {
        const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) *
                           static_cast<double>(j) / static_cast<double>(n);
        acc += a[j] * std::polar(1.0, ang);
      }
      out[k] = acc;
    }
    a = std::move(out);
  }

  std::vector<double> mags(n);
  for (std::size_t k = 0; k < n; ++k) mags[k] = std::abs(a[k]);
  return mags;
}

// --------------------------------------------------------------------------
// The 34-feature vector
// --------------------------------------------------------------------------

// Spectral features use components i = 1..n/2, excluding DC: with DC
// included, peak magnitude would always be the window mean and lose its
// discriminative content. The scalar "dft" feature is the mean non-DC
// spectral magnitude.
inline WindowFeatures extract_features(const Window& w,
                                       const FeatureConfig& cfg = {}) {
  const std::size_t n = w.samples.size();
  if (n < 4) throw std::invalid_argument("window too short for features");

  std::vector<double> ax(n), ay(n), az(n);
  for (std::size_t i = 0; i < n; ++i) {
    ax[i] = w.samples[i].x;
    ay[i] = w.samples[i].y;
    az[i] = w.samples[i].z;
  }
  const std::vector<double> mag = magnitude_series(w);

  // Basis for the "3 axes" statistics.
  std::vector<double> pooled;
  if (cfg.pooled_axis_stats) {
    pooled.reserve(3 * n);
    pooled.insert(pooled.end(), ax.begin(), ax.end());
    pooled.insert(pooled.end(), ay.begin(), ay.end());
    pooled.insert(pooled.end(), az.begin(), az.end());
  } else {
    pooled = mag;
  }

  const double mean_x = series_mean(ax);
  const double mean_y = series_mean(ay);
  const double mean_z = series_mean(az);
  const double var_x = series_variance(ax);
  const double var_y = series_variance(ay);
  const double var_z = series_variance(az);

  const auto [pooled_min_it, pooled_max_it] =
      std::minmax_element(pooled.begin(), pooled.end());
  const double pooled_min = *pooled_min_it;
  const double pooled_max = *pooled_max_it;
  KahanSum abs_sum;
  for (double v : pooled) abs_sum.add(std::abs(v));

  KahanSum sma_sum;
  for (std::size_t i = 0; i < n; ++i) {
    sma_sum.add(std::abs(ax[i]) + std::abs(ay[i]) + std::abs(az[i]));
  }

  KahanSum mag_sq_sum;
  for (double m : mag) mag_sq_sum.add(m * m);

  // Non-DC spectral components i = 1..n/2.
  const std::vector<double> spectrum = dft_spectrum(mag);
  const std::size_t half = n / 2;
  std::vector<double> smag(spectrum.begin() + 1, spectrum.begin() + 1 + half);
  std::vector<double> spow(half);
  for (std::size_t i = 0; i < half; ++i) spow[i] = smag[i] * smag[i];

  KahanSum energy_sum;
  for (double p : spow) energy_sum.add(p);

  const std::size_t peak_idx = static_cast<std::size_t>(
      std::max_element(smag.begin(), smag.end()) - smag.begin());
  const std::size_t peak_pow_idx = static_cast<std::size_t>(
      std::max_element(spow.begin(), spow.end()) - spow.begin());
  const double bin_hz = cfg.rate_hz / static_cast<double>(n);

  WindowFeatures out;
  out.user_id = w.user_id;
  out.end_ts = w.end_ts;
  auto& v = out.values;
  int k = 0;
  v[k++] = mean_x;
  v[k++] = mean_y;
  v[k++] = mean_z;
  v[k++] = std::sqrt(var_x);
  v[k++] = std::sqrt(var_y);
  v[k++] = std::sqrt(var_z);
  v[k++] = var_x;
  v[k++] = var_y;
  v[k++] = var_z;
  v[k++] = series_variance(pooled);
  v[k++] = series_mean(pooled);
  v[k++] = pooled_max;
  v[k++] = pooled_min;
  v[k++] = series_stddev(pooled);
  v[k++] = abs_sum.value() / static_cast<double>(pooled.size());
  v[k++] = series_median(pooled);
  v[k++] = pooled_max - pooled_min;
  v[k++] = var_x + var_y + var_z;
  v[k++] = series_mean(mag);
  v[k++] = sma_sum.value() / static_cast<double>(n);
  v[k++] = std::sqrt(mag_sq_sum.value() / static_cast<double>(n));
  v[k++] = curve_length(mag);
  v[k++] = teager_kaiser_mean(mag);
  v[k++] = differential_entropy(mag, cfg.entropy_bins);
  v[k++] = energy_sum.value();
  v[k++] = series_mean(spow);
  v[k++] = series_stddev(spow);
  v[k++] = series_mean(smag);
  v[k++] = smag[peak_idx];
  v[k++] = static_cast<double>(peak_idx + 1) * bin_hz;
  v[k++] = spow[peak_pow_idx];
  v[k++] = static_cast<double>(peak_pow_idx + 1) * bin_hz;
  v[k++] = shannon_entropy_bits(smag);
  v[k++] = shannon_entropy_bits(spow);
  return out;
}

inline std::vector<WindowFeatures> extract_all_features(
    const UserSession& session, const FeatureConfig& cfg = {}) {
  std::vector<WindowFeatures> out;
  for (const auto& w : segment_windows(session, cfg)) {
    out.push_back(extract_features(w, cfg));
  }
  return out;
}

}  // namespace stresskit
