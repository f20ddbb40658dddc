#pragma once

// Small derivative-energy QRS detector so that evaluation can run without
// external programs. Not a substitute for a clinical detector.
//
// band-pass (difference of two centered moving averages)
//   -> central derivative, squared
//   -> 150 ms moving-window integration
//   -> local maxima above threshold_fraction * running peak estimate,
//      with a refractory period; the estimate halves for every 1.5 s
//      without a detection so the detector recovers after loud segments
//   -> each detection is placed at the largest |band-passed| sample nearby.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "ecgdn/errors.hpp"
#include "ecgdn/preprocess.hpp"
#include "ecgdn/records.hpp"

namespace ecgdn {

struct DetectorConfig {
  double bandpass_low_hz = 5;
  double bandpass_high_hz = 15;
  double refractory_ms = 200;
  double threshold_fraction = 0.3;
  double searchback_fraction = 0.5;  // of the threshold, for gaps longer than 1.66 mean RR; 0 disables

  void validate(int fs) const {
    require(bandpass_low_hz > 0 && bandpass_low_hz < bandpass_high_hz && bandpass_high_hz < fs / 2.0,
            Errc::InvalidConfig, "band-pass edges must satisfy 0 < low < high < fs/2");
    require(refractory_ms > 0, Errc::InvalidConfig, "refractory period must be positive");
    require(threshold_fraction > 0 && threshold_fraction < 1, Errc::InvalidConfig,
            "threshold fraction must lie in (0, 1)");
    require(searchback_fraction >= 0 && searchback_fraction < 1, Errc::InvalidConfig,
            "searchback fraction must lie in [0, 1)");
  }
};

namespace detail {

// A centered moving average of width w has its -3 dB point near 0.443 fs / w.
inline std::size_t ma_width_for_cutoff(double cutoff_hz, int fs) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.443 * fs / cutoff_hz)));
}

inline std::size_t ms_to_samples(double ms, int fs) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ms * fs / 1000.0)));
}

}  // namespace detail

/// Band-passed signal used for peak placement.
inline std::vector<double> qrs_bandpass(std::span<const double> x, int fs, const DetectorConfig& cfg) {
  const auto short_w = detail::ma_width_for_cutoff(cfg.bandpass_high_hz, fs);
  const auto long_w = std::max(short_w + 1, detail::ma_width_for_cutoff(cfg.bandpass_low_hz, fs));
  auto lp = moving_average_trend(x, short_w);
  const auto baseline = moving_average_trend(x, long_w);
  for (std::size_t i = 0; i < lp.size(); ++i) lp[i] -= baseline[i];
  return lp;
}

/// Integrated squared-derivative energy.
inline std::vector<double> qrs_energy(std::span<const double> bandpassed, int fs) {
  const std::size_t n = bandpassed.size();
  std::vector<double> sq(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double d = 0.5 * (bandpassed[i + 1] - bandpassed[i - 1]);
    sq[i] = d * d;
  }
  return moving_average_trend(sq, detail::ms_to_samples(150, fs));
}

inline AnnotationList detect_qrs(std::span<const double> x, int fs, const DetectorConfig& cfg = {}) {
  cfg.validate(fs);
  require(x.size() > 2 * static_cast<std::size_t>(fs), Errc::TooShort,
          "detector needs more than two seconds of signal");
  const auto bp = qrs_bandpass(x, fs, cfg);
  const auto energy = qrs_energy(bp, fs);
  const std::size_t n = energy.size();
  const auto refractory = detail::ms_to_samples(cfg.refractory_ms, fs);
  const auto locate_half = detail::ms_to_samples(75, fs);
  const auto decay_period = static_cast<std::size_t>(1.5 * fs);

  double peak_estimate = *std::max_element(energy.begin(), energy.begin() + 2 * fs);

  struct Hit {
    std::size_t at;   // energy maximum
    double energy;
    double threshold;  // undecayed threshold in effect when accepted
  };
  std::vector<Hit> hits;
  std::size_t last_hit = 0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(energy[i] > energy[i - 1] && energy[i] >= energy[i + 1])) continue;
    double threshold = cfg.threshold_fraction * peak_estimate;
    if (!hits.empty()) {
      const auto silence = i - last_hit;
      threshold *= std::pow(0.5, static_cast<double>(silence / decay_period));
    }
    if (!(energy[i] > threshold)) continue;
    if (!hits.empty() && i - hits.back().at < refractory) {
      if (energy[i] > hits.back().energy) hits.back() = {i, energy[i], hits.back().threshold};
      last_hit = hits.back().at;
      continue;
    }
    hits.push_back({i, energy[i], cfg.threshold_fraction * peak_estimate});
    last_hit = i;
    peak_estimate = 0.875 * peak_estimate + 0.125 * energy[i];
  }

  // Searchback: a gap much longer than the recent mean RR usually hides a
  // low-energy beat (wide ectopics); take the largest peak above a lowered threshold.
  if (cfg.searchback_fraction > 0 && hits.size() >= 3) {
    std::vector<Hit> filled{hits[0]};
    std::deque<std::size_t> recent;
    for (std::size_t k = 1; k < hits.size(); ++k) {
      const auto& prev = filled.back();
      const auto gap = hits[k].at - prev.at;
      if (recent.size() >= 2) {
        double mean_rr = 0;
        for (auto r : recent) mean_rr += static_cast<double>(r);
        mean_rr /= static_cast<double>(recent.size());
        if (static_cast<double>(gap) > 1.66 * mean_rr && gap > 2 * refractory) {
          std::optional<std::size_t> best;
          for (std::size_t j = prev.at + refractory; j + refractory <= hits[k].at; ++j)
            if (energy[j] > energy[j - 1] && energy[j] >= energy[j + 1] && (!best || energy[j] > energy[*best]))
              best = j;
          if (best && energy[*best] > cfg.searchback_fraction * prev.threshold) {
            filled.push_back({*best, energy[*best], prev.threshold});
            recent.push_back(*best - prev.at);
            if (recent.size() > 8) recent.pop_front();
          }
        }
      }
      recent.push_back(hits[k].at - filled.back().at);
      if (recent.size() > 8) recent.pop_front();
      filled.push_back(hits[k]);
    }
    hits = std::move(filled);
  }

  std::vector<Annotation> beats;
  double last_energy = 0;
  for (const auto& h : hits) {
    const auto lo = h.at >= locate_half ? h.at - locate_half : 0;
    const auto hi = std::min(n, h.at + locate_half + 1);
    std::size_t best = lo;
    for (std::size_t j = lo; j < hi; ++j)
      if (std::abs(bp[j]) > std::abs(bp[best])) best = j;
    if (!beats.empty() && best < beats.back().sample_index + refractory) {
      if (h.energy > last_energy) {
        beats.back().sample_index = best;
        last_energy = h.energy;
      }
      continue;
    }
    beats.push_back({best, BeatLabel::Normal});
    last_energy = h.energy;
  }
  // Keep the refractory contract after relocation.
  std::vector<Annotation> spaced;
  for (const auto& b : beats)
    if (spaced.empty() || b.sample_index >= spaced.back().sample_index + refractory) spaced.push_back(b);
  return AnnotationList(std::move(spaced));
}

}  // namespace ecgdn
