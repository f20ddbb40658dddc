// ecgdn: command-line front end for noise injection, training, reconstruction,
// QRS detection and evaluation.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ecgdn/evalharness.hpp"
#include "ecgdn/model_io.hpp"
#include "ecgdn/noisegen.hpp"
#include "ecgdn/pipeline.hpp"
#include "ecgdn/qrsdetect.hpp"
#include "ecgdn/records.hpp"
#include "ecgdn/synth.hpp"

namespace fs = std::filesystem;
using namespace ecgdn;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  bool deterministic = false;
  bool quiet = false;
};

void log_line(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << '\n';
}

fs::path out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out);
  return fs::path(g.out) / name;
}

std::string snr_tag(double snr) {
  if (std::isinf(snr)) return "clean";
  std::ostringstream os;
  os << "snr" << (snr < 0 ? "m" : "") << std::abs(snr);
  return os.str();
}

fs::path annotations_for(const std::string& record, const std::string& given) {
  if (!given.empty()) return given;
  return fs::path(record).replace_extension(".ann");
}

// Runs jobs concurrently unless --deterministic asks for strictly sequential
// execution. Results are collected in submission order either way.
template <typename R, typename F>
std::vector<R> run_jobs(const Globals& g, std::size_t n, F job) {
  std::vector<R> out;
  if (g.deterministic || n < 2) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(job(i));
    return out;
  }
  std::vector<std::future<R>> futures;
  for (std::size_t i = 0; i < n; ++i) futures.push_back(std::async(std::launch::async, job, i));
  for (auto& f : futures) out.push_back(f.get());
  return out;
}

struct ScheduleOpts {
  NoiseSchedule s;
  void add(CLI::App* app) {
    app->add_option("--lead-in", s.lead_in_seconds, "Seconds before the first noise interval")->capture_default_str();
    app->add_option("--on", s.on_seconds, "Seconds of noise per cycle")->capture_default_str();
    app->add_option("--off", s.off_seconds, "Seconds without noise per cycle")->capture_default_str();
  }
};

// --- synth ---------------------------------------------------------------

struct SynthCmd {
  double minutes = 20;
  int fs = 250;
  double ectopic = 0.05;
  std::string name = "synth";

  void run(const Globals& g) const {
    SynthConfig cfg;
    cfg.sampling_rate = fs;
    cfg.duration_seconds = minutes * 60;
    cfg.ectopic_fraction = ectopic;
    if (g.seed) cfg.seed = *g.seed;
    const auto rec = synth_ecg(cfg);
    const auto noise = synth_noise(cfg);
    save_record(out_path(g, name + ".csv"), rec.record, 8);
    save_annotations(out_path(g, name + ".ann"), rec.beats);
    save_record(out_path(g, name + "_noise.csv"), noise, 8);
    log_line(g, "wrote " + name + ".csv (" + std::to_string(rec.beats.size()) + " beats), " + name +
                    ".ann, " + name + "_noise.csv");
  }
};

// --- add-noise -----------------------------------------------------------

struct AddNoiseCmd {
  std::string record, annotations, noise;
  std::vector<double> snrs = default_test_snrs();
  ScheduleOpts schedule;

  void run(const Globals& g) const {
    const auto rec = load_record(record);
    const auto beats = load_annotations(annotations_for(record, annotations));
    const auto noise_rec = load_record(noise);
    const auto test_half = split_noise_halves(noise_rec).first;
    const auto stem = fs::path(record).stem().string();

    const auto results = run_jobs<MixResult>(g, snrs.size(), [&](std::size_t i) {
      return mix_with_schedule(rec, test_half, beats, snrs[i], schedule.s);
    });
    for (std::size_t i = 0; i < snrs.size(); ++i) {
      const auto base = stem + "_" + snr_tag(snrs[i]);
      save_record(out_path(g, base + ".csv"), results[i].noisy, 8);
      save_mask(out_path(g, base + ".mask"), results[i].intervals);
      for (auto b : results[i].tiling_boundaries)
        log_line(g, base + ": noise source wraps at sample " + std::to_string(b));
      log_line(g, "wrote " + base + ".csv and " + base + ".mask");
    }
  }
};

// --- train ---------------------------------------------------------------

struct TrainCmd {
  std::string record, annotations, noise, model = "model.ecgdn";
  TrainConfig cfg;
  ScheduleOpts schedule;

  void add(CLI::App* app) {
    app->add_option("--record", record, "Clean record used for training")->required();
    app->add_option("--annotations", annotations, "Beat annotations (default: record with .ann)");
    app->add_option("--noise", noise, "Noise record; its second half is used for augmentation")->required();
    app->add_option("--target", cfg.target, "Channel to reconstruct")->required();
    app->add_option("--inputs", cfg.inputs, "Input channels (comma separated)")->required()->delimiter(',');
    app->add_option("--hidden", cfg.hidden, "Width of each hidden layer")->capture_default_str();
    app->add_option("--train-stride", cfg.train_stride, "Training window stride (samples)")->capture_default_str();
    app->add_option("--recon-stride", cfg.recon_stride, "Reconstruction window stride (samples)")
        ->capture_default_str();
    app->add_option("--pretrain-epochs", cfg.hyper.pretrain_epochs)->capture_default_str();
    app->add_option("--finetune-epochs", cfg.hyper.finetune_epochs)->capture_default_str();
    app->add_option("--batch", cfg.hyper.minibatch_size, "Minibatch size")->capture_default_str();
    app->add_option("--lr-pretrain-gaussian", cfg.hyper.learning_rate_pretrain_gaussian)->capture_default_str();
    app->add_option("--lr-pretrain", cfg.hyper.learning_rate_pretrain)->capture_default_str();
    app->add_option("--lr-finetune", cfg.hyper.learning_rate_finetune)->capture_default_str();
    app->add_option("--weight-decay", cfg.hyper.weight_decay)->capture_default_str();
    app->add_option("--validation-fraction", cfg.hyper.validation_fraction)->capture_default_str();
    app->add_option("--augment-snr", cfg.augmentation_snr_db, "SNRs of the noisy training copies")
        ->delimiter(',')
        ->capture_default_str();
    app->add_option("--min-train-seconds", cfg.min_training_seconds)->capture_default_str();
    app->add_option("--model", model, "Output model file name")->capture_default_str();
    schedule.add(app);
  }

  void run(const Globals& g, const CLI::App& root) {
    auto c = cfg;
    c.schedule = schedule.s;
    if (g.seed) c.hyper.rng_seed = *g.seed;
    const auto rec = load_record(record);
    const auto beats = load_annotations(annotations_for(record, annotations));
    const auto noise_rec = load_record(noise);
    const auto m = train_model(rec, beats, noise_rec, c, [&](const std::string& s) { log_line(g, s); });
    const auto path = out_path(g, model);
    save_model(path, m);
    std::ofstream(out_path(g, fs::path(model).stem().string() + ".ini")) << root.config_to_str(true, false);
    log_line(g, "wrote " + path.string() + " (config " + m.provenance.config_hash + ")");
  }
};

// --- denoise -------------------------------------------------------------

struct DenoiseCmd {
  std::string model, record, output;
  std::optional<std::size_t> start, end;

  void run(const Globals& g) const {
    const auto m = load_model(model);
    const auto rec = load_record(record);
    const auto s = start.value_or(0);
    const auto e = end.value_or(rec.duration());
    auto y = denoise(m, rec, s, e);
    Record out(rec.sampling_rate(), {Channel{m.window.target_channel_name, std::move(y)}});
    const auto name = output.empty() ? fs::path(record).stem().string() + "_denoised.csv" : output;
    save_record(out_path(g, name), out, 8);
    log_line(g, "wrote " + name + " (" + std::to_string(e - s) + " samples from sample " + std::to_string(s) + ")");
  }
};

// --- detect --------------------------------------------------------------

struct DetectCmd {
  std::string record, channel, output;
  DetectorConfig det;

  void run(const Globals& g) const {
    const auto rec = load_record(record);
    const auto& ch = channel.empty() ? rec.channel(std::size_t{0}) : rec.channel(channel);
    const auto beats = detect_qrs(ch.samples, rec.sampling_rate(), det);
    const auto name = output.empty() ? fs::path(record).stem().string() + ".qrs" : output;
    save_annotations(out_path(g, name), beats);
    log_line(g, "wrote " + name + " (" + std::to_string(beats.size()) + " detections)");
  }
};

void add_detector_options(CLI::App* app, DetectorConfig& d) {
  app->add_option("--bandpass-low", d.bandpass_low_hz)->capture_default_str();
  app->add_option("--bandpass-high", d.bandpass_high_hz)->capture_default_str();
  app->add_option("--refractory-ms", d.refractory_ms)->capture_default_str();
  app->add_option("--threshold", d.threshold_fraction, "Fraction of the running peak estimate")
      ->capture_default_str();
  app->add_option("--searchback", d.searchback_fraction, "Fraction of the threshold for RR searchback (0: off)")
      ->capture_default_str();
}

// --- evaluate / rmse -----------------------------------------------------

const std::vector<double>& channel_or_only(const Record& r, const std::string& name) {
  if (r.has_channel(name)) return r.channel(name).samples;
  require(r.channel_count() == 1, Errc::InvalidConfig, "record has no channel '" + name + "'");
  return r.channel(std::size_t{0}).samples;
}

struct EvaluateCmd {
  std::vector<std::string> clean, noisy, denoised, annotations, masks;
  std::string model, channel, report = "report";
  double window_ms = kDefaultMatchWindowMs;
  std::optional<double> span_start_s, span_end_s;
  DetectorConfig det;

  void run(const Globals& g) const {
    const auto n = noisy.size();
    require(clean.size() == n && masks.size() == n, Errc::InvalidConfig,
            "--clean, --noisy and --mask need one entry per record");
    require(denoised.size() == n || (denoised.empty() && !model.empty()), Errc::InvalidConfig,
            "give one --denoised file per record or a --model");
    require(annotations.empty() || annotations.size() == n, Errc::InvalidConfig,
            "--annotations needs one entry per record");
    std::optional<Model> m;
    if (denoised.empty()) m = load_model(model);

    auto one = [&](std::size_t i) {
      const auto c = load_record(clean[i]);
      const auto x = load_record(noisy[i]);
      const auto ref = load_annotations(annotations_for(clean[i], annotations.empty() ? "" : annotations[i]));
      const auto intervals = load_mask(masks[i]);
      const auto name = channel.empty() ? (m ? m->window.target_channel_name : c.channel(std::size_t{0}).name)
                                        : channel;
      std::vector<double> y;
      if (m) {
        y = denoise(*m, x);
      } else {
        y = channel_or_only(load_record(denoised[i]), name);
      }
      EvalOptions opt;
      opt.match_window_ms = window_ms;
      opt.detector = det;
      const int fs = c.sampling_rate();
      if (span_start_s || span_end_s) {
        const auto def = default_eval_span(c.duration(), fs);
        opt.span = Interval{span_start_s ? static_cast<std::size_t>(std::llround(*span_start_s * fs)) : def.start,
                            span_end_s ? static_cast<std::size_t>(std::llround(*span_end_s * fs)) : def.end};
      }
      return evaluate_record(fs::path(noisy[i]).stem().string(), c.channel(name).samples,
                             x.channel(name).samples, y, ref, intervals, fs, opt);
    };

    EvalReport rep;
    rep.records = run_jobs<RecordEvaluation>(g, n, one);
    write_report_text(std::cout, rep);
    std::ofstream text(out_path(g, report + ".txt"));
    write_report_text(text, rep);
    std::ofstream kv(out_path(g, report + ".kv"));
    write_report_kv(kv, rep);
    log_line(g, "wrote " + report + ".txt and " + report + ".kv");
  }
};

struct RmseCmd {
  std::string clean, noisy, denoised, mask, channel;

  void run(const Globals&) const {
    const auto c = load_record(clean);
    const auto x = load_record(noisy);
    const auto y = load_record(denoised);
    const auto name = channel.empty() ? y.channel(std::size_t{0}).name : channel;
    const auto& cs = c.channel(name).samples;
    auto m = mask_from_intervals(load_mask(mask), cs.size());
    std::printf("%.6f\n", rmse_ratio(cs, x.channel(name).samples, channel_or_only(y, name), m));
  }
};

int exit_code_for(Errc e) {
  switch (category(e)) {
    case ErrorCategory::Usage: return 1;
    case ErrorCategory::Numeric: return 3;
    default: return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline ECG denoising with a pretrained deep network"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Read options from a key = value file ([subcommand] sections)");
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random stream");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_flag("--deterministic", g.deterministic, "Run everything on one thread, in order");
  app.add_flag("-q,--quiet", g.quiet, "Suppress progress messages");

  SynthCmd synth;
  auto* s = app.add_subcommand("synth", "Generate the synthetic three-lead corpus and a noise record");
  s->add_option("--minutes", synth.minutes)->capture_default_str();
  s->add_option("--fs", synth.fs, "Sampling rate (Hz)")->capture_default_str();
  s->add_option("--ectopic", synth.ectopic, "Fraction of ectopic beats")->capture_default_str();
  s->add_option("--name", synth.name, "Output file stem")->capture_default_str();

  AddNoiseCmd add_noise;
  auto* a = app.add_subcommand("add-noise", "Corrupt a record on the on/off schedule at each SNR");
  a->add_option("--record", add_noise.record)->required();
  a->add_option("--annotations", add_noise.annotations, "Beat annotations (default: record with .ann)");
  a->add_option("--noise", add_noise.noise, "Noise record; its first half is used")->required();
  a->add_option("--snr", add_noise.snrs, "SNRs in dB (comma separated)")->delimiter(',')->capture_default_str();
  add_noise.schedule.add(a);

  TrainCmd train;
  auto* t = app.add_subcommand("train", "Train a denoising network");
  train.add(t);

  DenoiseCmd dn;
  auto* d = app.add_subcommand("denoise", "Reconstruct the target channel of a record");
  d->add_option("--model", dn.model)->required();
  d->add_option("--record", dn.record)->required();
  d->add_option("--start", dn.start, "First sample of the span");
  d->add_option("--end", dn.end, "One past the last sample of the span");
  d->add_option("--output", dn.output, "Output file name");

  DetectCmd det;
  auto* q = app.add_subcommand("detect", "Run the built-in QRS detector");
  q->add_option("--record", det.record)->required();
  q->add_option("--channel", det.channel, "Channel name (default: first)");
  q->add_option("--output", det.output, "Output file name");
  add_detector_options(q, det.det);

  EvaluateCmd ev;
  auto* e = app.add_subcommand("evaluate", "Compare noisy and denoised signals against the reference");
  e->add_option("--clean", ev.clean, "Clean records")->required()->delimiter(',');
  e->add_option("--noisy", ev.noisy, "Noisy records")->required()->delimiter(',');
  e->add_option("--mask", ev.masks, "Noise interval files")->required()->delimiter(',');
  e->add_option("--denoised", ev.denoised, "Denoised records")->delimiter(',');
  e->add_option("--model", ev.model, "Denoise in place with this model instead of --denoised");
  e->add_option("--annotations", ev.annotations, "Reference annotations")->delimiter(',');
  e->add_option("--channel", ev.channel, "Channel to score (default: model target or first)");
  e->add_option("--window-ms", ev.window_ms, "Beat match window")->capture_default_str();
  e->add_option("--span-start", ev.span_start_s, "Scoring start (s), default 300");
  e->add_option("--span-end", ev.span_end_s, "Scoring end (s), default one second before the end");
  e->add_option("--report", ev.report, "Report file stem")->capture_default_str();
  add_detector_options(e, ev.det);

  RmseCmd rm;
  auto* r = app.add_subcommand("rmse", "RMSE(denoised)/RMSE(noisy) over the noise intervals");
  r->add_option("--clean", rm.clean)->required();
  r->add_option("--noisy", rm.noisy)->required();
  r->add_option("--denoised", rm.denoised)->required();
  r->add_option("--mask", rm.mask)->required();
  r->add_option("--channel", rm.channel);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*s) synth.run(g);
    else if (*a) add_noise.run(g);
    else if (*t) train.run(g, app);
    else if (*d) dn.run(g);
    else if (*q) det.run(g);
    else if (*e) ev.run(g);
    else if (*r) rm.run(g);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_code_for(err.code());
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  }
  return 0;
}
