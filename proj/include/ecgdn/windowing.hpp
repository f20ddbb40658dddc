#pragma once

// Fixed-length windows over the normalized channels: dense stride-5 training
// pairs restricted to an allowed mask, stride-16 reconstruction windows over a
// span, and per-sample averaging of the overlapping window outputs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ecgdn/errors.hpp"
#include "ecgdn/linalg.hpp"

namespace ecgdn {

/// Window length: 1 s for target + other channels, 2 s for other channels
/// only, 3 s for the target channel alone.
inline std::size_t segment_seconds_for(bool uses_target_as_input, std::size_t n_other_inputs) {
  require(uses_target_as_input || n_other_inputs >= 1, Errc::NoInputChannels,
          "at least one input channel is required");
  if (uses_target_as_input) return n_other_inputs >= 1 ? 1 : 3;
  return 2;
}

inline std::size_t segment_length_for(bool uses_target_as_input, std::size_t n_other_inputs,
                                      int fs) {
  require(fs >= 1, Errc::InvalidConfig, "sampling rate must be >= 1");
  return segment_seconds_for(uses_target_as_input, n_other_inputs) * static_cast<std::size_t>(fs);
}

struct WindowConfig {
  /// Target channel first when it is an input; each channel contributes one
  /// contiguous block of the input row in this order.
  std::vector<std::string> input_channel_names;
  std::string target_channel_name;
  std::size_t segment_seconds = 0;
  std::size_t train_stride_samples = 5;
  std::size_t recon_stride_samples = 16;

  bool uses_target_as_input() const {
    return std::find(input_channel_names.begin(), input_channel_names.end(),
                     target_channel_name) != input_channel_names.end();
  }

  std::size_t other_input_count() const {
    return input_channel_names.size() - (uses_target_as_input() ? 1 : 0);
  }

  std::size_t segment_samples(int fs) const { return segment_seconds * static_cast<std::size_t>(fs); }

  std::size_t input_width(int fs) const { return input_channel_names.size() * segment_samples(fs); }

  /// Builds a config with the canonical channel order and the rule-derived
  /// segment length.
  static WindowConfig make(std::string target, std::vector<std::string> inputs) {
    WindowConfig c;
    c.target_channel_name = std::move(target);
    auto it = std::find(inputs.begin(), inputs.end(), c.target_channel_name);
    if (it != inputs.end()) std::rotate(inputs.begin(), it, it + 1);
    c.input_channel_names = std::move(inputs);
    c.segment_seconds = segment_seconds_for(c.uses_target_as_input(), c.other_input_count());
    return c;
  }

  void validate(int fs) const {
    require(!input_channel_names.empty(), Errc::NoInputChannels, "no input channels");
    for (std::size_t i = 0; i < input_channel_names.size(); ++i)
      for (std::size_t j = i + 1; j < input_channel_names.size(); ++j)
        require(input_channel_names[i] != input_channel_names[j], Errc::InvalidConfig,
                "input channel '" + input_channel_names[i] + "' listed twice");
    if (uses_target_as_input())
      require(input_channel_names.front() == target_channel_name, Errc::InvalidConfig,
              "the target channel must be the first input");
    const auto expected = segment_seconds_for(uses_target_as_input(), other_input_count());
    require(segment_seconds == expected, Errc::InvalidConfig,
            "segment length " + std::to_string(segment_seconds) + " s does not match the " +
                std::to_string(expected) + " s required by this channel selection");
    const auto len = segment_samples(fs);
    require(train_stride_samples >= 1 && train_stride_samples <= len, Errc::InvalidConfig,
            "training stride must be in [1, segment length]");
    require(recon_stride_samples >= 1 && recon_stride_samples <= len, Errc::InvalidConfig,
            "reconstruction stride must be in [1, segment length]");
  }

  bool operator==(const WindowConfig&) const = default;
};

template <typename T = float>
struct SegmentDataset {
  RowMatrix<T> inputs;
  RowMatrix<T> targets;
  std::vector<std::size_t> positions;

  std::size_t size() const { return positions.size(); }
};

/// Start indices (multiples of `stride`) of every window of `length` samples
/// lying entirely where `allowed` is true.
inline std::vector<std::size_t> eligible_positions(const std::vector<bool>& allowed, std::size_t length,
                                                   std::size_t stride) {
  std::vector<std::size_t> blocked(allowed.size() + 1, 0);
  for (std::size_t i = 0; i < allowed.size(); ++i) blocked[i + 1] = blocked[i] + !allowed[i];
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p + length <= allowed.size(); p += stride)
    if (blocked[p + length] == blocked[p]) out.push_back(p);
  return out;
}

namespace detail {

template <typename T>
void fill_input_row(RowMatrix<T>& m, Eigen::Index row,
                    const std::vector<std::span<const double>>& inputs, std::size_t pos,
                    std::size_t length) {
  for (std::size_t c = 0; c < inputs.size(); ++c)
    for (std::size_t j = 0; j < length; ++j)
      m(row, static_cast<Eigen::Index>(c * length + j)) = static_cast<T>(inputs[c][pos + j]);
}

inline void check_lengths(const std::vector<std::span<const double>>& inputs, std::size_t n) {
  for (const auto& in : inputs)
    require(in.size() == n, Errc::LengthMismatch, "input channel lengths differ");
}

}  // namespace detail

/// Appends the windows at `positions` to `ds` (rows are added at the end).
template <typename T>
void append_training_pairs(SegmentDataset<T>& ds, const std::vector<std::span<const double>>& inputs,
                           std::span<const double> target, std::span<const std::size_t> positions,
                           std::size_t length) {
  detail::check_lengths(inputs, target.size());
  const auto old_rows = ds.inputs.rows();
  const auto width = static_cast<Eigen::Index>(inputs.size() * length);
  const auto rows = old_rows + static_cast<Eigen::Index>(positions.size());
  if (old_rows == 0) {
    ds.inputs.resize(rows, width);
    ds.targets.resize(rows, static_cast<Eigen::Index>(length));
  } else {
    require(ds.inputs.cols() == width && ds.targets.cols() == static_cast<Eigen::Index>(length),
            Errc::DimensionMismatch, "appended windows differ in shape");
    ds.inputs.conservativeResize(rows, Eigen::NoChange);
    ds.targets.conservativeResize(rows, Eigen::NoChange);
  }
  for (std::size_t k = 0; k < positions.size(); ++k) {
    const auto row = old_rows + static_cast<Eigen::Index>(k);
    const auto p = positions[k];
    if (p + length > target.size()) throw Error(Errc::OutOfRange, "window past the signal end");
    detail::fill_input_row(ds.inputs, row, inputs, p, length);
    for (std::size_t j = 0; j < length; ++j)
      ds.targets(row, static_cast<Eigen::Index>(j)) = static_cast<T>(target[p + j]);
    ds.positions.push_back(p);
  }
}

/// Every training-stride window fully inside `allowed`. Input rows concatenate
/// the channel windows in `inputs` order (which must follow the config order).
template <typename T = float>
SegmentDataset<T> make_training_pairs(const std::vector<std::span<const double>>& inputs,
                                      std::span<const double> target, const WindowConfig& config,
                                      int fs, const std::vector<bool>& allowed) {
  require(allowed.size() == target.size(), Errc::LengthMismatch, "mask length differs");
  require(inputs.size() == config.input_channel_names.size(), Errc::DimensionMismatch,
          "input count differs from the config");
  const auto length = config.segment_samples(fs);
  const auto positions = eligible_positions(allowed, length, config.train_stride_samples);
  require(!positions.empty(), Errc::NoEligibleSegments, "no window fits inside the allowed mask");
  SegmentDataset<T> ds;
  append_training_pairs(ds, inputs, target, positions, length);
  return ds;
}

template <typename T = float>
struct ReconstructionSegments {
  RowMatrix<T> inputs;
  std::vector<std::size_t> positions;  // absolute sample index of each window start
};

/// Reconstruction-stride windows covering [span_start, span_end); the last
/// window is pulled back so it ends exactly at span_end.
inline std::vector<std::size_t> reconstruction_positions(std::size_t span_start, std::size_t span_end,
                                                         std::size_t length, std::size_t stride) {
  require(span_end >= span_start && span_end - span_start >= length, Errc::SpanTooShort,
          "span of " + std::to_string(span_end - span_start) + " samples is shorter than one " +
              std::to_string(length) + "-sample segment");
  std::vector<std::size_t> out;
  const std::size_t last = span_end - length;
  for (std::size_t p = span_start; p <= last; p += stride) out.push_back(p);
  if (out.back() != last) out.push_back(last);
  return out;
}

template <typename T = float>
ReconstructionSegments<T> make_reconstruction_segments(
    const std::vector<std::span<const double>>& inputs, const WindowConfig& config, int fs,
    std::size_t span_start, std::size_t span_end) {
  require(!inputs.empty(), Errc::NoInputChannels, "no input channels");
  require(span_end <= inputs.front().size(), Errc::OutOfRange, "span past the record end");
  detail::check_lengths(inputs, inputs.front().size());
  const auto length = config.segment_samples(fs);
  ReconstructionSegments<T> out;
  out.positions = reconstruction_positions(span_start, span_end, length, config.recon_stride_samples);
  out.inputs.resize(static_cast<Eigen::Index>(out.positions.size()),
                    static_cast<Eigen::Index>(inputs.size() * length));
  for (std::size_t k = 0; k < out.positions.size(); ++k)
    detail::fill_input_row(out.inputs, static_cast<Eigen::Index>(k), inputs, out.positions[k], length);
  return out;
}

struct OverlapResult {
  std::vector<double> samples;  // NaN where not covered
  std::vector<bool> covered;
};

/// out[t] = mean of the outputs of every window containing t. Positions index
/// into an output of `total_len` samples.
template <typename Derived>
OverlapResult overlap_average(const Eigen::MatrixBase<Derived>& outputs,
                              std::span<const std::size_t> positions, std::size_t total_len) {
  require(static_cast<std::size_t>(outputs.rows()) == positions.size(), Errc::DimensionMismatch,
          "one output row per position is required");
  const auto length = static_cast<std::size_t>(outputs.cols());
  std::vector<double> sum(total_len, 0.0);
  std::vector<std::size_t> count(total_len, 0);
  for (std::size_t k = 0; k < positions.size(); ++k) {
    const auto p = positions[k];
    if (p + length > total_len) throw Error(Errc::OutOfRange, "window past the output end");
    for (std::size_t j = 0; j < length; ++j) {
      sum[p + j] += static_cast<double>(outputs(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)));
      ++count[p + j];
    }
  }

  OverlapResult out;
  out.samples.assign(total_len, std::numeric_limits<double>::quiet_NaN());
  out.covered.assign(total_len, false);
  if (positions.empty()) return out;
  const auto [lo, hi] = std::minmax_element(positions.begin(), positions.end());
  for (std::size_t t = *lo; t < *hi + length; ++t)
    if (count[t] == 0) throw Error(Errc::CoverageGap, "sample " + std::to_string(t) + " is not covered");
  for (std::size_t t = 0; t < total_len; ++t) {
    if (count[t] == 0) continue;
    out.covered[t] = true;
    out.samples[t] = sum[t] / static_cast<double>(count[t]);
  }
  return out;
}

}  // namespace ecgdn
