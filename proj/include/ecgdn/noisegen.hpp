#pragma once

// Calibrated noise injection on an alternating on/off schedule.
//
// SNR = 10 log10(S / N) where
//   S = (mean QRS peak-to-peak amplitude / 2)^2, measured within +-50 ms of each
//       annotated beat on the moving-average-detrended channel;
//   N = mean square of the noise after moving-average detrending with a
//       one-second window, which discounts very-low-frequency content. When
//       noise is gated by a schedule, each on-interval is detrended separately
//       and N is the mean square over all on-samples.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecgdn/errors.hpp"
#include "ecgdn/preprocess.hpp"
#include "ecgdn/records.hpp"

namespace ecgdn {

struct NoiseSchedule {
  double lead_in_seconds = 300;
  double on_seconds = 120;
  double off_seconds = 120;

  void validate() const {
    require(lead_in_seconds >= 0 && std::isfinite(lead_in_seconds), Errc::InvalidConfig,
            "lead-in must be non-negative");
    require(on_seconds > 0 && off_seconds > 0 && std::isfinite(on_seconds) && std::isfinite(off_seconds),
            Errc::InvalidConfig, "on and off durations must be positive");
  }
};

/// Half-open sample range.
struct Interval {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool operator==(const Interval&) const = default;
};

/// On-intervals of the schedule for a record of `duration` samples. The last
/// on-interval is cut at the record end.
inline std::vector<Interval> schedule_intervals(const NoiseSchedule& s, int fs, std::size_t duration) {
  s.validate();
  auto samples = [fs](double sec) { return static_cast<std::size_t>(std::llround(sec * fs)); };
  const std::size_t lead = samples(s.lead_in_seconds);
  const std::size_t on = std::max<std::size_t>(1, samples(s.on_seconds));
  const std::size_t off = std::max<std::size_t>(1, samples(s.off_seconds));
  std::vector<Interval> out;
  for (std::size_t start = lead; start < duration; start += on + off)
    out.push_back({start, std::min(start + on, duration)});
  return out;
}

inline std::vector<bool> mask_from_intervals(std::span<const Interval> intervals, std::size_t duration) {
  std::vector<bool> mask(duration, false);
  for (const auto& iv : intervals) {
    require(iv.start <= iv.end && iv.end <= duration, Errc::OutOfRange, "interval outside the record");
    std::fill(mask.begin() + static_cast<std::ptrdiff_t>(iv.start),
              mask.begin() + static_cast<std::ptrdiff_t>(iv.end), true);
  }
  return mask;
}

inline std::vector<Interval> intervals_from_mask(const std::vector<bool>& mask) {
  std::vector<Interval> out;
  for (std::size_t t = 0; t < mask.size();) {
    if (!mask[t]) { ++t; continue; }
    std::size_t e = t;
    while (e < mask.size() && mask[e]) ++e;
    out.push_back({t, e});
    t = e;
  }
  return out;
}

inline void save_mask(const std::filesystem::path& path, std::span<const Interval> intervals) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  for (const auto& iv : intervals) out << iv.start << ' ' << iv.end << '\n';
}

inline std::vector<Interval> load_mask(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<Interval> out;
  std::string line;
  while (std::getline(in, line)) {
    auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto sp = body.find_first_of(" \t");
    Interval iv;
    if (sp == std::string_view::npos || !detail::parse_number(body.substr(0, sp), iv.start) ||
        !detail::parse_number(body.substr(sp), iv.end) || iv.end < iv.start)
      throw Error(Errc::OutOfRange, "bad mask line '" + std::string(body) + "'");
    if (!out.empty() && iv.start < out.back().end)
      throw Error(Errc::OutOfRange, "mask intervals overlap or are unsorted");
    out.push_back(iv);
  }
  return out;
}

/// Half-width of the peak-to-peak search window around each beat.
inline std::size_t qrs_half_window(int fs) {
  return static_cast<std::size_t>(std::llround(0.05 * fs));
}

inline double estimate_signal_power(std::span<const double> channel, const AnnotationList& beats, int fs) {
  require(beats.size() >= 10, Errc::TooFewBeats,
          "need at least 10 annotated beats, got " + std::to_string(beats.size()));
  beats.validate_against(channel.size());
  const auto detrended = moving_average_detrend(channel, static_cast<std::size_t>(fs));
  const auto half = qrs_half_window(fs);
  double sum_pp = 0;
  for (const auto& b : beats) {
    const auto lo = b.sample_index >= half ? b.sample_index - half : 0;
    const auto hi = std::min(channel.size(), b.sample_index + half + 1);
    const auto [mn, mx] = std::minmax_element(detrended.begin() + static_cast<std::ptrdiff_t>(lo),
                                              detrended.begin() + static_cast<std::ptrdiff_t>(hi));
    sum_pp += *mx - *mn;
  }
  const double amplitude = sum_pp / static_cast<double>(beats.size()) / 2.0;
  return amplitude * amplitude;
}

inline double estimate_noise_power(std::span<const double> noise, int fs) {
  require(noise.size() >= static_cast<std::size_t>(fs), Errc::TooShort,
          "noise shorter than one second");
  const auto d = moving_average_detrend(noise, static_cast<std::size_t>(fs));
  long double ss = 0;
  for (double v : d) ss += static_cast<long double>(v) * v;
  return static_cast<double>(ss / static_cast<long double>(d.size()));
}

/// N over the samples covered by `intervals`, each interval detrended on its own.
inline double gated_noise_power(std::span<const double> track, std::span<const Interval> intervals, int fs) {
  long double ss = 0;
  std::size_t n = 0;
  for (const auto& iv : intervals) {
    if (iv.length() == 0) continue;
    require(iv.end <= track.size(), Errc::OutOfRange, "interval outside the noise track");
    const auto d = moving_average_detrend(track.subspan(iv.start, iv.length()), static_cast<std::size_t>(fs));
    for (double v : d) ss += static_cast<long double>(v) * v;
    n += d.size();
  }
  require(n > 0, Errc::EmptyMask, "no noise samples to measure");
  return static_cast<double>(ss / static_cast<long double>(n));
}

/// Gain g such that 10 log10(S / (g^2 N)) = snr_db.
inline double gain_for_snr(double signal_power, double noise_power, double snr_db) {
  require(signal_power > 0 && noise_power > 0 && std::isfinite(signal_power) && std::isfinite(noise_power),
          Errc::NonPositivePower, "signal and noise power must be positive");
  return std::sqrt(signal_power / (noise_power * std::pow(10.0, snr_db / 10.0)));
}

inline double snr_db(double signal_power, double noise_power) {
  return 10.0 * std::log10(signal_power / noise_power);
}

/// A sub-range [begin, end) of a noise record that the mixer may consume.
struct NoiseSource {
  const Record* record = nullptr;
  std::size_t begin = 0;
  std::size_t end = 0;

  static NoiseSource whole(const Record& r) { return {&r, 0, r.duration()}; }
  std::size_t length() const { return end - begin; }
};

/// Disjoint halves of a noise record: the first for test-time corruption, the
/// second for training augmentation.
inline std::pair<NoiseSource, NoiseSource> split_noise_halves(const Record& noise) {
  const auto mid = noise.duration() / 2;
  return {{&noise, 0, mid}, {&noise, mid, noise.duration()}};
}

/// Noise for record channel `channel` aligned to record time, tiling the
/// source cyclically. Record channel i uses noise channel i mod (noise channels).
inline std::vector<double> aligned_noise_track(const NoiseSource& src, std::size_t channel,
                                               std::size_t duration) {
  require(src.record && src.length() > 0 && src.end <= src.record->duration(), Errc::TooShort,
          "empty noise source");
  const auto& samples = src.record->channel(channel % src.record->channel_count()).samples;
  std::vector<double> track(duration);
  for (std::size_t t = 0; t < duration; ++t) track[t] = samples[src.begin + t % src.length()];
  return track;
}

/// Noise-source sample indices consumed by `intervals` (for disjointness checks).
inline std::vector<std::size_t> consumed_noise_samples(const NoiseSource& src,
                                                       std::span<const Interval> intervals) {
  std::vector<std::size_t> out;
  for (const auto& iv : intervals)
    for (std::size_t t = iv.start; t < iv.end; ++t) out.push_back(src.begin + t % src.length());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct MixResult {
  Record noisy;
  std::vector<Interval> intervals;
  std::vector<bool> mask;
  std::vector<double> gains;          // per record channel
  std::vector<double> signal_power;   // S per record channel
  std::vector<double> noise_power;    // N per record channel, before gain
  std::vector<std::size_t> tiling_boundaries;  // record samples where the noise source wraps
};

/// Adds gain-scaled noise inside `intervals`; samples elsewhere are copied
/// unchanged. A non-finite positive snr_db disables mixing.
inline MixResult mix_with_intervals(const Record& record, const NoiseSource& noise,
                                    const AnnotationList& beats, double snr_db,
                                    std::vector<Interval> intervals) {
  require(noise.record != nullptr, Errc::TooShort, "no noise record");
  require(noise.record->sampling_rate() == record.sampling_rate(), Errc::RateMismatch,
          "noise at " + std::to_string(noise.record->sampling_rate()) + " Hz, record at " +
              std::to_string(record.sampling_rate()) + " Hz");
  const auto duration = record.duration();
  const int fs = record.sampling_rate();

  MixResult out;
  if (std::isinf(snr_db) && snr_db > 0) intervals.clear();
  out.intervals = std::move(intervals);
  out.mask = mask_from_intervals(out.intervals, duration);
  if (out.intervals.empty()) {
    out.noisy = record;
    return out;
  }
  require(noise.length() > 0, Errc::TooShort, "empty noise source");
  for (std::size_t t = noise.length(); t < duration; t += noise.length())
    out.tiling_boundaries.push_back(t);

  std::vector<Channel> channels;
  for (std::size_t c = 0; c < record.channel_count(); ++c) {
    const auto& clean = record.channel(c);
    const double S = estimate_signal_power(clean.samples, beats, fs);
    const auto track = aligned_noise_track(noise, c, duration);
    const double N = gated_noise_power(track, out.intervals, fs);
    const double g = gain_for_snr(S, N, snr_db);
    Channel noisy{clean.name, clean.samples};
    for (const auto& iv : out.intervals)
      for (std::size_t t = iv.start; t < iv.end; ++t) noisy.samples[t] += g * track[t];
    channels.push_back(std::move(noisy));
    out.gains.push_back(g);
    out.signal_power.push_back(S);
    out.noise_power.push_back(N);
  }
  out.noisy = Record(fs, std::move(channels));
  return out;
}

inline MixResult mix_with_schedule(const Record& record, const NoiseSource& noise,
                                   const AnnotationList& beats, double snr_db,
                                   const NoiseSchedule& schedule) {
  return mix_with_intervals(record, noise, beats, snr_db,
                            schedule_intervals(schedule, record.sampling_rate(), record.duration()));
}

/// SNR actually present in `noisy`: S from the clean channel, N from
/// noisy - clean over the same intervals.
inline double measured_snr(std::span<const double> clean, std::span<const double> noisy,
                           const AnnotationList& beats, std::span<const Interval> intervals, int fs) {
  require(clean.size() == noisy.size(), Errc::LengthMismatch, "clean/noisy lengths differ");
  std::vector<double> added(clean.size());
  for (std::size_t t = 0; t < clean.size(); ++t) added[t] = noisy[t] - clean[t];
  return snr_db(estimate_signal_power(clean, beats, fs), gated_noise_power(added, intervals, fs));
}

}  // namespace ecgdn
