#pragma once

// Baseline removal and amplitude scaling applied before the network sees a
// signal. Inputs are detrended with a centered moving average, the target
// with a centered running median; both use windows of one second that shrink
// at the record boundaries. One scale factor (unit variance of the detrended
// target) is shared by inputs and target.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ecgdn/errors.hpp"

namespace ecgdn {

struct NormalizationSpec {
  double scale_factor = 1.0;
  std::size_t window_samples = 1;

  void validate() const {
    require(std::isfinite(scale_factor) && scale_factor > 0, Errc::ZeroVariance,
            "scale factor must be positive and finite");
    require(window_samples >= 1, Errc::EmptyInput, "window must be >= 1 sample");
  }

  bool operator==(const NormalizationSpec&) const = default;
};

/// Half-widths of a centered window of `window` samples: [i - left, i + right].
/// Even windows lean one sample towards the past.
struct WindowExtent {
  std::size_t left;
  std::size_t right;
};

constexpr WindowExtent centered_extent(std::size_t window) {
  return {window / 2, window - 1 - window / 2};
}

/// The running-median window is forced odd so it is symmetric about each sample.
constexpr std::size_t median_window_for(std::size_t window) {
  return window % 2 == 0 ? window + 1 : window;
}

inline std::vector<double> moving_average_trend(std::span<const double> x, std::size_t window) {
  require(!x.empty(), Errc::EmptyInput, "moving average of an empty sequence");
  require(window >= 1, Errc::EmptyInput, "window must be >= 1 sample");
  const std::size_t n = x.size();
  const auto [left, right] = centered_extent(window);

  std::vector<long double> prefix(n + 1, 0.0L);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];

  std::vector<double> trend(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= left ? i - left : 0;
    const std::size_t hi = std::min(n, i + right + 1);
    trend[i] = static_cast<double>((prefix[hi] - prefix[lo]) / static_cast<long double>(hi - lo));
  }
  return trend;
}

inline std::vector<double> moving_average_detrend(std::span<const double> x, std::size_t window) {
  auto trend = moving_average_trend(x, window);
  for (std::size_t i = 0; i < x.size(); ++i) trend[i] = x[i] - trend[i];
  return trend;
}

/// Running median over a truncated centered window (odd-adjusted, see
/// median_window_for). Even-sized truncated windows average the two middle values.
inline std::vector<double> median_trend(std::span<const double> x, std::size_t window) {
  require(!x.empty(), Errc::EmptyInput, "median of an empty sequence");
  require(window >= 1, Errc::EmptyInput, "window must be >= 1 sample");
  const std::size_t n = x.size();
  const std::size_t half = median_window_for(window) / 2;

  std::vector<double> sorted;
  sorted.reserve(2 * half + 1);
  for (std::size_t j = 0; j < std::min(n, half); ++j)
    sorted.insert(std::upper_bound(sorted.begin(), sorted.end(), x[j]), x[j]);

  std::vector<double> trend(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i + half < n)
      sorted.insert(std::upper_bound(sorted.begin(), sorted.end(), x[i + half]), x[i + half]);
    if (i > half) sorted.erase(std::lower_bound(sorted.begin(), sorted.end(), x[i - half - 1]));
    const std::size_t m = sorted.size();
    trend[i] = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  }
  return trend;
}

inline std::vector<double> median_detrend(std::span<const double> x, std::size_t window) {
  auto trend = median_trend(x, window);
  for (std::size_t i = 0; i < x.size(); ++i) trend[i] = x[i] - trend[i];
  return trend;
}

/// Population standard deviation.
inline double population_stddev(std::span<const double> x) {
  long double mean = 0;
  for (double v : x) mean += v;
  mean /= static_cast<long double>(x.size());
  long double ss = 0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return static_cast<double>(std::sqrt(ss / static_cast<long double>(x.size())));
}

/// scale_factor = 1 / stddev, so the scaled sequence has unit variance.
inline NormalizationSpec fit_scale(std::span<const double> detrended_target,
                                   std::size_t window_samples = 1) {
  require(detrended_target.size() >= 2, Errc::ZeroVariance, "need at least two samples");
  const double sd = population_stddev(detrended_target);
  require(sd > 0 && std::isfinite(sd), Errc::ZeroVariance, "target has zero variance");
  NormalizationSpec spec{1.0 / sd, window_samples};
  return spec;
}

struct NormalizedSignals {
  std::vector<std::vector<double>> inputs;
  std::vector<double> target;
  NormalizationSpec spec;
};

inline std::vector<double> normalize_input(std::span<const double> x, const NormalizationSpec& spec) {
  auto out = moving_average_detrend(x, spec.window_samples);
  for (double& v : out) v *= spec.scale_factor;
  return out;
}

/// Detrends every input (moving average) and the target (median), fitting the
/// scale on the detrended target. When `fit_mask` is given only samples where it
/// is true contribute to the scale.
inline NormalizedSignals normalize_for_training(
    const std::vector<std::span<const double>>& inputs, std::span<const double> target, int fs,
    const std::vector<bool>* fit_mask = nullptr) {
  require(fs >= 1, Errc::EmptyInput, "sampling rate must be >= 1");
  for (const auto& in : inputs)
    require(in.size() == target.size(), Errc::LengthMismatch, "input/target length differ");
  const auto window = static_cast<std::size_t>(fs);

  NormalizedSignals out;
  out.target = median_detrend(target, window);

  if (fit_mask) {
    require(fit_mask->size() == target.size(), Errc::LengthMismatch, "mask length differs");
    std::vector<double> selected;
    for (std::size_t i = 0; i < target.size(); ++i)
      if ((*fit_mask)[i]) selected.push_back(out.target[i]);
    out.spec = fit_scale(selected, window);
  } else {
    out.spec = fit_scale(out.target, window);
  }

  for (double& v : out.target) v *= out.spec.scale_factor;
  out.inputs.reserve(inputs.size());
  for (const auto& in : inputs) out.inputs.push_back(normalize_input(in, out.spec));
  return out;
}

/// Maps a normalized network output back to amplitude units:
/// output / scale_factor + baseline.
inline std::vector<double> denormalize(std::span<const double> output, const NormalizationSpec& spec,
                                       std::span<const double> baseline) {
  require(output.size() == baseline.size(), Errc::LengthMismatch,
          "output and baseline lengths differ");
  spec.validate();
  std::vector<double> out(output.size());
  for (std::size_t i = 0; i < output.size(); ++i)
    out[i] = output[i] / spec.scale_factor + baseline[i];
  return out;
}

}  // namespace ecgdn
