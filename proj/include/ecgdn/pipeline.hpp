#pragma once

// End-to-end steps shared by the command-line tool and the acceptance suite:
// test-noise injection, training on the noise-free spans, reconstruction and
// evaluation.

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecgdn/errors.hpp"
#include "ecgdn/evalharness.hpp"
#include "ecgdn/model_io.hpp"
#include "ecgdn/network.hpp"
#include "ecgdn/noisegen.hpp"
#include "ecgdn/preprocess.hpp"
#include "ecgdn/qrsdetect.hpp"
#include "ecgdn/rbm.hpp"
#include "ecgdn/records.hpp"
#include "ecgdn/windowing.hpp"

namespace ecgdn {

inline const std::vector<double>& default_test_snrs() {
  static const std::vector<double> v{24, 18, 12, 6, 0, -6};
  return v;
}

struct TrainConfig {
  std::string target;
  std::vector<std::string> inputs;
  std::size_t hidden = LayerSpec::kDefaultHidden;
  std::size_t train_stride = 5;
  std::size_t recon_stride = 16;
  TrainHyper hyper;
  NoiseSchedule schedule;                          // spans excluded from training
  std::vector<double> augmentation_snr_db{6, 0};   // one noisy copy per entry
  double min_training_seconds = 300;

  WindowConfig window() const {
    auto w = WindowConfig::make(target, inputs);
    w.train_stride_samples = train_stride;
    w.recon_stride_samples = recon_stride;
    return w;
  }

  /// Canonical description used for the config hash.
  nlohmann::json to_json() const {
    return {{"window", window_to_json(window())},
            {"hidden", hidden},
            {"hyper", hyper_to_json(hyper)},
            {"schedule",
             {{"lead_in_seconds", schedule.lead_in_seconds},
              {"on_seconds", schedule.on_seconds},
              {"off_seconds", schedule.off_seconds}}},
            {"augmentation_snr_db", augmentation_snr_db},
            {"min_training_seconds", min_training_seconds}};
  }
};

using LogFn = std::function<void(const std::string&)>;

inline void check_channels(const Record& r, const WindowConfig& w, Errc code) {
  require(r.has_channel(w.target_channel_name), code,
          "record has no channel '" + w.target_channel_name + "'");
  for (const auto& name : w.input_channel_names)
    require(r.has_channel(name), code, "record has no channel '" + name + "'");
}

inline std::string dataset_fingerprint(const Record& clean, const AnnotationList& beats, const Record& noise) {
  Fnv1a h;
  auto add_record = [&](const Record& r) {
    const auto fs = r.sampling_rate();
    h.update(&fs, sizeof fs);
    for (const auto& c : r.channels()) {
      h.update(c.name);
      h.update(c.samples.data(), c.samples.size() * sizeof(double));
    }
  };
  add_record(clean);
  for (const auto& b : beats) {
    const std::uint64_t s = b.sample_index;
    const char l = label_to_char(b.label);
    h.update(&s, sizeof s);
    h.update(&l, 1);
  }
  add_record(noise);
  return h.hex();
}

/// Samples usable for training: everything outside the scheduled test-noise spans.
inline std::vector<bool> training_mask(const NoiseSchedule& schedule, int fs, std::size_t duration) {
  auto mask = mask_from_intervals(schedule_intervals(schedule, fs, duration), duration);
  mask.flip();
  return mask;
}

/// Normalized input rows and clean targets: one block of windows from the
/// clean record, then one per augmentation copy corrupted with training-half noise.
struct TrainingSet {
  SegmentDataset<float> data;
  NormalizationSpec normalization;
  std::size_t scale_fit_samples = 0;
};

inline TrainingSet build_training_set(const Record& clean, const AnnotationList& beats, const Record& noise,
                                      const TrainConfig& cfg, const LogFn& log = {}) {
  const int fs = clean.sampling_rate();
  const auto window = cfg.window();
  window.validate(fs);
  check_channels(clean, window, Errc::InvalidConfig);
  for (double snr : cfg.augmentation_snr_db)
    require(std::isfinite(snr), Errc::InvalidConfig, "augmentation SNRs must be finite");

  const auto duration = clean.duration();
  const auto allowed = training_mask(cfg.schedule, fs, duration);
  const auto n_allowed = static_cast<std::size_t>(std::count(allowed.begin(), allowed.end(), true));
  const auto needed = static_cast<std::size_t>(std::llround(cfg.min_training_seconds * fs));
  require(n_allowed >= needed && n_allowed > 0, Errc::InsufficientTrainingData,
          std::to_string(n_allowed) + " noise-free samples available, " + std::to_string(needed) + " required");

  std::vector<std::span<const double>> clean_inputs;
  for (const auto& name : window.input_channel_names) clean_inputs.emplace_back(clean.channel(name).samples);
  const auto norm = normalize_for_training(clean_inputs, clean.channel(window.target_channel_name).samples, fs,
                                           &allowed);

  const auto length = window.segment_samples(fs);
  const auto positions = eligible_positions(allowed, length, window.train_stride_samples);
  require(!positions.empty(), Errc::NoEligibleSegments, "no training window fits between the noise spans");

  TrainingSet out;
  out.normalization = norm.spec;
  out.scale_fit_samples = n_allowed;
  const auto copies = 1 + cfg.augmentation_snr_db.size();
  out.data.inputs.resize(static_cast<Eigen::Index>(copies * positions.size()),
                         static_cast<Eigen::Index>(window.input_width(fs)));
  out.data.targets.resize(out.data.inputs.rows(), static_cast<Eigen::Index>(length));

  auto add_copy = [&](const std::vector<std::vector<double>>& inputs, std::size_t block) {
    std::vector<std::span<const double>> views(inputs.begin(), inputs.end());
    SegmentDataset<float> part;
    append_training_pairs(part, views, norm.target, positions, length);
    const auto row0 = static_cast<Eigen::Index>(block * positions.size());
    out.data.inputs.middleRows(row0, part.inputs.rows()) = part.inputs;
    out.data.targets.middleRows(row0, part.targets.rows()) = part.targets;
    out.data.positions.insert(out.data.positions.end(), part.positions.begin(), part.positions.end());
  };
  add_copy(norm.inputs, 0);

  const auto train_noise = split_noise_halves(noise).second;
  const std::vector<Interval> whole{{0, duration}};
  for (std::size_t k = 0; k < cfg.augmentation_snr_db.size(); ++k) {
    const auto mixed = mix_with_intervals(clean, train_noise, beats, cfg.augmentation_snr_db[k], whole);
    if (log && !mixed.tiling_boundaries.empty())
      log("training noise tiled " + std::to_string(mixed.tiling_boundaries.size()) + " time(s)");
    std::vector<std::vector<double>> inputs;
    for (const auto& name : window.input_channel_names)
      inputs.push_back(normalize_input(mixed.noisy.channel(name).samples, norm.spec));
    add_copy(inputs, k + 1);
  }
  if (log)
    log(std::to_string(out.data.inputs.rows()) + " training windows of " + std::to_string(length) +
        " samples (" + std::to_string(copies) + " copies)");
  return out;
}

/// Pretrains the RBM stack and fine-tunes the unrolled network. Deterministic
/// for a given config, seed and input data.
inline Model train_model(const Record& clean, const AnnotationList& beats, const Record& noise,
                         const TrainConfig& cfg, const LogFn& log = {}) {
  cfg.hyper.validate();
  require(cfg.hidden >= 1, Errc::InvalidConfig, "hidden width must be >= 1");
  require(noise.sampling_rate() == clean.sampling_rate(), Errc::RateMismatch,
          "noise and record sampling rates differ");
  beats.validate_against(clean.duration());
  const int fs = clean.sampling_rate();
  auto set = build_training_set(clean, beats, noise, cfg, log);
  const auto window = cfg.window();

  const auto spec = LayerSpec::make(window.input_width(fs), window.segment_samples(fs), cfg.hidden);
  std::mt19937_64 rng(cfg.hyper.rng_seed);
  auto rbms = pretrain_stack<float>(set.data.inputs, spec, cfg.hyper, rng, [&](const PretrainProgress& p) {
    if (log)
      log("pretrain layer " + std::to_string(p.layer + 1) + " epoch " + std::to_string(p.epoch + 1) +
          " reconstruction error " + std::to_string(p.reconstruction_error));
  });
  auto net = unroll(rbms, spec.sizes.back(), rng);
  rbms.clear();

  const auto report = finetune(net, set.data.inputs, set.data.targets, cfg.hyper,
                               [&](std::size_t epoch, const FinetuneReport& r) {
                                 if (log)
                                   log("finetune epoch " + std::to_string(epoch + 1) + " mse " +
                                       std::to_string(r.train_mse.back()));
                               });

  Model m;
  m.net = std::move(net);
  m.normalization = set.normalization;
  m.window = window;
  m.sampling_rate = fs;
  m.hyper = cfg.hyper;
  Fnv1a h;
  h.update(cfg.to_json().dump());
  m.provenance.config_hash = h.hex();
  m.provenance.dataset_fingerprint = dataset_fingerprint(clean, beats, noise);
  m.provenance.training_windows = static_cast<std::size_t>(set.data.inputs.rows());
  m.provenance.scale_fit_samples = set.scale_fit_samples;
  m.provenance.finetune_mse = report.train_mse;
  return m;
}

/// Reconstructed target channel over [start, end) of `record`, in the
/// record's amplitude units. The output has end - start samples.
inline std::vector<double> denoise(const Model& model, const Record& record, std::size_t start, std::size_t end) {
  require(record.sampling_rate() == model.sampling_rate, Errc::ModelRecordMismatch,
          "model trained at " + std::to_string(model.sampling_rate) + " Hz, record is at " +
              std::to_string(record.sampling_rate()) + " Hz");
  check_channels(record, model.window, Errc::ModelRecordMismatch);
  require(start < end && end <= record.duration(), Errc::OutOfRange, "span outside the record");
  const int fs = record.sampling_rate();
  const auto length = model.window.segment_samples(fs);
  require(model.net.n_in() == model.window.input_width(fs) && model.net.n_out() == length,
          Errc::ModelRecordMismatch, "network shape does not match the window configuration");

  std::vector<std::vector<double>> inputs;
  for (const auto& name : model.window.input_channel_names)
    inputs.push_back(normalize_input(record.channel(name).samples, model.normalization));
  std::vector<std::span<const double>> views(inputs.begin(), inputs.end());
  const auto segs = make_reconstruction_segments<float>(views, model.window, fs, start, end);

  RowMatrix<float> outputs(segs.inputs.rows(), static_cast<Eigen::Index>(length));
  constexpr Eigen::Index chunk = 2048;
  for (Eigen::Index r = 0; r < segs.inputs.rows(); r += chunk) {
    const auto n = std::min(chunk, segs.inputs.rows() - r);
    outputs.middleRows(r, n) = model.net.forward_batch(segs.inputs.middleRows(r, n));
  }
  std::vector<std::size_t> relative(segs.positions.size());
  for (std::size_t k = 0; k < relative.size(); ++k) relative[k] = segs.positions[k] - start;
  const auto merged = overlap_average(outputs, relative, end - start);

  const auto& target = record.channel(model.window.target_channel_name).samples;
  const auto trend = median_trend(std::span<const double>(target).subspan(start, end - start),
                                  model.normalization.window_samples);
  return denormalize(merged.samples, model.normalization, trend);
}

inline std::vector<double> denoise(const Model& model, const Record& record) {
  return denoise(model, record, 0, record.duration());
}

struct EvalOptions {
  double match_window_ms = kDefaultMatchWindowMs;
  DetectorConfig detector;
  std::optional<Interval> span;  // default_eval_span when empty
};

/// Detection and RMSE comparison of the noisy and denoised versions of one channel.
inline RecordEvaluation evaluate_record(const std::string& name, std::span<const double> clean,
                                        std::span<const double> noisy, std::span<const double> denoised,
                                        const AnnotationList& reference, std::span<const Interval> noise_intervals,
                                        int fs, const EvalOptions& opt = {}) {
  require(clean.size() == noisy.size() && clean.size() == denoised.size(), Errc::LengthMismatch,
          "clean, noisy and denoised lengths differ");
  const auto span = opt.span.value_or(default_eval_span(clean.size(), fs));
  require(span.start < span.end && span.end <= clean.size(), Errc::OutOfRange, "evaluation span is empty");
  const auto window = match_window_samples(opt.match_window_ms, fs);

  RecordEvaluation r;
  r.name = name;
  auto mask = mask_from_intervals(noise_intervals, clean.size());
  for (std::size_t t = 0; t < mask.size(); ++t)
    if (t < span.start || t >= span.end) mask[t] = false;
  if (std::find(mask.begin(), mask.end(), true) != mask.end()) r.rmse_ratio = rmse_ratio(clean, noisy, denoised, mask);

  r.noisy = DetectionScore::from(match_beats(reference, detect_qrs(noisy, fs, opt.detector), window, span));
  r.denoised = DetectionScore::from(match_beats(reference, detect_qrs(denoised, fs, opt.detector), window, span));
  return r;
}

}  // namespace ecgdn
