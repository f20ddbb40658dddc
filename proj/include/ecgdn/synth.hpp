#pragma once

// Seeded synthetic corpus for desk-scale experiments: a three-lead
// pseudo-ECG built from Gaussian P/Q/R/S/T waves with occasional premature
// wide ectopic beats, and a separate electrode-motion-like noise record.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ecgdn/errors.hpp"
#include "ecgdn/records.hpp"

namespace ecgdn {

struct SynthConfig {
  int sampling_rate = 250;
  double duration_seconds = 20 * 60;
  double mean_rr_seconds = 0.8;
  double ectopic_fraction = 0.05;
  std::uint64_t seed = 2024;

  void validate() const {
    require(sampling_rate >= 50, Errc::InvalidConfig, "synthetic sampling rate must be >= 50 Hz");
    require(duration_seconds >= 10, Errc::InvalidConfig, "synthetic duration must be >= 10 s");
    require(mean_rr_seconds >= 0.4 && mean_rr_seconds <= 2, Errc::InvalidConfig,
            "mean RR must lie in [0.4, 2] s");
    require(ectopic_fraction >= 0 && ectopic_fraction < 0.5, Errc::InvalidConfig,
            "ectopic fraction must lie in [0, 0.5)");
  }
};

struct SynthRecord {
  Record record;
  AnnotationList beats;
};

namespace detail {

struct Wave {
  double offset;  // seconds relative to the beat fiducial
  double width;   // Gaussian sigma, seconds
  std::array<double, 3> amplitude;  // per lead, mV
};

// Leads roughly like MLII, V1 and V5.
inline const std::vector<Wave>& normal_beat() {
  static const std::vector<Wave> w{
      {-0.200, 0.025, {0.15, 0.08, 0.12}},   // P
      {-0.030, 0.010, {-0.12, -0.05, -0.15}},  // Q
      {0.000, 0.011, {1.20, 0.45, 1.00}},    // R
      {0.032, 0.012, {-0.28, -0.85, -0.12}},  // S
      {0.280, 0.055, {0.32, -0.12, 0.36}},   // T
  };
  return w;
}

inline const std::vector<Wave>& ectopic_beat() {
  static const std::vector<Wave> w{
      {-0.020, 0.022, {-0.35, 0.60, -0.45}},
      {0.000, 0.030, {1.45, -0.95, 1.30}},
      {0.055, 0.030, {-0.55, 0.40, -0.65}},
      {0.300, 0.070, {-0.45, 0.30, -0.40}},
  };
  return w;
}

}  // namespace detail

/// Three-lead pseudo-ECG with N/V annotations at the R fiducial.
inline SynthRecord synth_ecg(const SynthConfig& cfg = {}) {
  cfg.validate();
  const int fs = cfg.sampling_rate;
  const auto n = static_cast<std::size_t>(std::llround(cfg.duration_seconds * fs));
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::array<std::vector<double>, 3> leads;
  for (auto& l : leads) l.assign(n, 0.0);

  // Slow respiratory modulation of heart rate and amplitude.
  const double resp_hz = 0.25;
  std::vector<Annotation> beats;
  double t = 0.6;
  bool previous_ectopic = false;
  while (true) {
    const bool ectopic = !previous_ectopic && unit(rng) < cfg.ectopic_fraction;
    const double rr_sinus = cfg.mean_rr_seconds *
                            (1.0 + 0.04 * std::sin(2 * std::numbers::pi * resp_hz * t) + 0.02 * gauss(rng));
    const double beat_t = ectopic ? t - 0.35 * rr_sinus : t;
    const auto fiducial = static_cast<long long>(std::llround(beat_t * fs));
    if (fiducial + static_cast<long long>(0.6 * fs) >= static_cast<long long>(n)) break;

    const auto& waves = ectopic ? detail::ectopic_beat() : detail::normal_beat();
    const double scale = 1.0 + 0.05 * std::sin(2 * std::numbers::pi * resp_hz * beat_t) + 0.03 * gauss(rng);
    for (const auto& w : waves) {
      const double centre = beat_t + w.offset;
      const auto lo = std::max<long long>(0, std::llround((centre - 4 * w.width) * fs));
      const auto hi = std::min<long long>(static_cast<long long>(n) - 1, std::llround((centre + 4 * w.width) * fs));
      for (long long s = lo; s <= hi; ++s) {
        const double dt = static_cast<double>(s) / fs - centre;
        const double g = std::exp(-0.5 * dt * dt / (w.width * w.width));
        for (std::size_t c = 0; c < 3; ++c) leads[c][static_cast<std::size_t>(s)] += scale * w.amplitude[c] * g;
      }
    }
    beats.push_back({static_cast<std::size_t>(fiducial), ectopic ? BeatLabel::Veb : BeatLabel::Normal});
    previous_ectopic = ectopic;
    // Compensatory pause after an ectopic beat keeps the sinus rhythm in phase.
    t += rr_sinus;
  }

  // Baseline wander plus a little sensor noise.
  const std::array<double, 3> phase{0.0, 1.3, 2.1};
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t s = 0; s < n; ++s) {
      const double ts = static_cast<double>(s) / fs;
      leads[c][s] += 0.08 * std::sin(2 * std::numbers::pi * 0.11 * ts + phase[c]) +
                     0.05 * std::sin(2 * std::numbers::pi * 0.037 * ts + 2 * phase[c]) + 0.005 * gauss(rng);
    }

  std::vector<Channel> ch{{"MLII", std::move(leads[0])}, {"V1", std::move(leads[1])}, {"V5", std::move(leads[2])}};
  return {Record(fs, std::move(ch)), AnnotationList(std::move(beats))};
}

/// Electrode-motion-like noise: band-limited (mostly 1-15 Hz) Gaussian noise
/// with a slowly varying envelope, occasional decaying step transients and
/// some baseline drift. Channels are independent. Twice the configured
/// duration, so each half covers a whole synthetic record without tiling.
inline Record synth_noise(const SynthConfig& cfg = {}) {
  cfg.validate();
  const int fs = cfg.sampling_rate;
  const auto n = static_cast<std::size_t>(std::llround(2 * cfg.duration_seconds * fs));
  std::mt19937_64 rng(cfg.seed ^ 0x6e6f697365ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Two-pole resonators centred near 4 and 10 Hz.
  auto resonator = [fs](double f0, double r) {
    const double w = 2 * std::numbers::pi * f0 / fs;
    return std::array<double, 2>{2 * r * std::cos(w), -r * r};
  };
  const auto low = resonator(4.0, 0.96);
  const auto high = resonator(10.0, 0.93);

  std::vector<Channel> out;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> x(n, 0.0);
    double a1 = 0, a2 = 0, b1 = 0, b2 = 0, drift = 0, step = 0;
    double envelope_phase = unit(rng) * 2 * std::numbers::pi;
    for (std::size_t s = 0; s < n; ++s) {
      const double e = gauss(rng);
      const double a = low[0] * a1 + low[1] * a2 + e;
      a2 = a1; a1 = a;
      const double b = high[0] * b1 + high[1] * b2 + 0.6 * gauss(rng);
      b2 = b1; b1 = b;
      drift = 0.999 * drift + 0.02 * gauss(rng);
      if (unit(rng) < 0.3 / fs) step += 2.0 * gauss(rng);
      step *= std::exp(-1.0 / (0.4 * fs));
      const double ts = static_cast<double>(s) / fs;
      const double envelope = 1.0 + 0.5 * std::sin(2 * std::numbers::pi * 0.03 * ts + envelope_phase);
      x[s] = 0.05 * envelope * (a + b) + 0.1 * drift + step;
    }
    out.push_back({"noise" + std::to_string(c), std::move(x)});
  }
  return Record(fs, std::move(out));
}

}  // namespace ecgdn
