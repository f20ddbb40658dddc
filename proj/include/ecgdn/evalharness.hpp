#pragma once

// Beat-by-beat comparison of a test annotation stream against a reference,
// QRS detection and VEB classification statistics, and the RMSE ratio of a
// denoised signal relative to its noisy input.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ecgdn/errors.hpp"
#include "ecgdn/noisegen.hpp"
#include "ecgdn/records.hpp"

namespace ecgdn {

constexpr double kDefaultMatchWindowMs = 150.0;

inline std::size_t match_window_samples(double window_ms, int fs) {
  require(window_ms > 0, Errc::InvalidConfig, "match window must be positive");
  return static_cast<std::size_t>(std::llround(window_ms * fs / 1000.0));
}

/// Scoring span: from five minutes in to one second before the end.
inline Interval default_eval_span(std::size_t duration, int fs) {
  const auto start = static_cast<std::size_t>(300) * static_cast<std::size_t>(fs);
  const auto stop = duration > static_cast<std::size_t>(fs) ? duration - static_cast<std::size_t>(fs) : 0;
  return {std::min(start, stop), stop};
}

struct MatchResult {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (reference index, test index)
};

/// One-to-one matching of beats within `window` samples of each other,
/// restricted to annotations inside `span`.
///
/// References are visited in time order. Each takes its nearest free test
/// beat (ties go to the earlier one), except when that beat is also within
/// reach of the next reference and an earlier free candidate exists; then the
/// earliest candidate is taken instead. This keeps the nearest-neighbour
/// pairing in the usual case and never loses a match, so the counts equal
/// those of a maximum-cardinality matching.
inline MatchResult match_beats(const AnnotationList& reference, const AnnotationList& test,
                               std::size_t window, Interval span) {
  auto inside = [&](std::size_t s) { return s >= span.start && s < span.end; };
  std::vector<std::size_t> refs, tests;
  for (std::size_t i = 0; i < reference.size(); ++i)
    if (inside(reference[i].sample_index)) refs.push_back(i);
  for (std::size_t j = 0; j < test.size(); ++j)
    if (inside(test[j].sample_index)) tests.push_back(j);

  auto dist = [](std::size_t a, std::size_t b) { return a > b ? a - b : b - a; };
  std::vector<bool> used(tests.size(), false);
  MatchResult m;
  std::size_t lo = 0;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const auto r = reference[refs[k]].sample_index;
    while (lo < tests.size() && test[tests[lo]].sample_index + window < r) ++lo;

    std::optional<std::size_t> earliest, nearest;
    for (std::size_t q = lo; q < tests.size() && test[tests[q]].sample_index <= r + window; ++q) {
      if (used[q]) continue;
      if (!earliest) earliest = q;
      if (!nearest || dist(test[tests[q]].sample_index, r) < dist(test[tests[nearest.value()]].sample_index, r))
        nearest = q;
    }
    if (!nearest) continue;

    auto chosen = *nearest;
    if (chosen != *earliest && k + 1 < refs.size()) {
      const auto next_r = reference[refs[k + 1]].sample_index;
      if (dist(test[tests[chosen]].sample_index, next_r) <= window) chosen = *earliest;
    }
    used[chosen] = true;
    m.pairs.emplace_back(refs[k], tests[chosen]);
  }
  m.tp = m.pairs.size();
  m.fn = refs.size() - m.tp;
  m.fp = tests.size() - m.tp;
  return m;
}

inline MatchResult match_beats(const AnnotationList& reference, const AnnotationList& test,
                               double window_ms, int fs, Interval span) {
  return match_beats(reference, test, match_window_samples(window_ms, fs), span);
}

inline std::optional<double> ratio(double num, double den) {
  if (den == 0) return std::nullopt;
  return num / den;
}

struct QrsStats {
  std::optional<double> sensitivity;            // TP / (TP + FN)
  std::optional<double> positive_predictivity;  // TP / (TP + FP)
  std::optional<double> error_rate;             // (FP + FN) / (TP + FN)
};

inline QrsStats qrs_stats(std::size_t tp, std::size_t fp, std::size_t fn) {
  const auto TP = static_cast<double>(tp), FP = static_cast<double>(fp), FN = static_cast<double>(fn);
  return {ratio(TP, TP + FN), ratio(TP, TP + FP), ratio(FP + FN, TP + FN)};
}

inline QrsStats qrs_stats(const MatchResult& m) { return qrs_stats(m.tp, m.fp, m.fn); }

struct VebCounts {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  VebCounts& operator+=(const VebCounts& o) {
    tp += o.tp; tn += o.tn; fp += o.fp; fn += o.fn;
    return *this;
  }
  bool operator==(const VebCounts&) const = default;
};

struct VebStats {
  VebCounts counts;
  std::optional<double> sensitivity;            // TP / (TP + FN)
  std::optional<double> positive_predictivity;  // TP / (TP + FP)
  std::optional<double> false_positive_rate;    // FP / (TN + FP)
  std::optional<double> classification_rate;    // (TN + TP) / (TN + TP + FN + FP)
};

inline VebStats veb_stats(const VebCounts& c) {
  const auto TP = static_cast<double>(c.tp), TN = static_cast<double>(c.tn);
  const auto FP = static_cast<double>(c.fp), FN = static_cast<double>(c.fn);
  return {c, ratio(TP, TP + FN), ratio(TP, TP + FP), ratio(FP, TN + FP),
          ratio(TN + TP, TN + TP + FN + FP)};
}

/// Counts from matched (reference label, test label) pairs. A reference
/// fusion or unclassifiable beat labelled VEB is neither a false positive nor
/// a true negative.
inline VebCounts veb_counts(std::span<const std::pair<BeatLabel, BeatLabel>> pairs,
                            std::size_t unmatched_ref_vebs) {
  VebCounts c;
  c.fn = unmatched_ref_vebs;
  for (const auto& [ref, got] : pairs) {
    const bool ref_veb = ref == BeatLabel::Veb;
    const bool got_veb = got == BeatLabel::Veb;
    if (ref_veb && got_veb) ++c.tp;
    else if (ref_veb) ++c.fn;
    else if (got_veb) {
      if (ref != BeatLabel::Fusion && ref != BeatLabel::Unclassifiable) ++c.fp;
    } else {
      ++c.tn;
    }
  }
  return c;
}

inline VebStats veb_stats(std::span<const std::pair<BeatLabel, BeatLabel>> pairs,
                          std::size_t unmatched_ref_vebs) {
  return veb_stats(veb_counts(pairs, unmatched_ref_vebs));
}

/// Label pairs and unmatched reference VEBs (inside `span`) for a match.
inline VebCounts veb_counts(const AnnotationList& reference, const AnnotationList& test,
                            const MatchResult& m, Interval span) {
  std::vector<std::pair<BeatLabel, BeatLabel>> labels;
  std::vector<bool> matched(reference.size(), false);
  for (const auto& [ri, ti] : m.pairs) {
    labels.emplace_back(reference[ri].label, test[ti].label);
    matched[ri] = true;
  }
  std::size_t missed_vebs = 0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const auto s = reference[i].sample_index;
    if (!matched[i] && s >= span.start && s < span.end && reference[i].label == BeatLabel::Veb)
      ++missed_vebs;
  }
  return veb_counts(labels, missed_vebs);
}

/// RMSE(denoised - clean) / RMSE(noisy - clean) over samples where `mask` is true.
inline double rmse_ratio(std::span<const double> clean, std::span<const double> noisy,
                         std::span<const double> denoised, const std::vector<bool>& mask) {
  require(clean.size() == noisy.size() && clean.size() == denoised.size() && clean.size() == mask.size(),
          Errc::LengthMismatch, "signals and mask must have equal length");
  long double num = 0, den = 0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < clean.size(); ++t) {
    if (!mask[t]) continue;
    const long double a = denoised[t] - clean[t];
    const long double b = noisy[t] - clean[t];
    num += a * a;
    den += b * b;
    ++n;
  }
  require(n > 0, Errc::EmptyMask, "evaluation mask selects no samples");
  require(den > 0, Errc::ZeroDenominator, "noisy signal equals the clean signal on the mask");
  return static_cast<double>(std::sqrt(num / den));
}

struct DetectionScore {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::optional<VebCounts> veb;

  static DetectionScore from(const MatchResult& m) { return {m.tp, m.fp, m.fn, std::nullopt}; }

  DetectionScore& operator+=(const DetectionScore& o) {
    tp += o.tp; fp += o.fp; fn += o.fn;
    if (o.veb) {
      if (!veb) veb = VebCounts{};
      *veb += *o.veb;
    }
    return *this;
  }
  QrsStats qrs() const { return qrs_stats(tp, fp, fn); }
};

struct RecordEvaluation {
  std::string name;
  std::optional<double> rmse_ratio;
  DetectionScore noisy;
  DetectionScore denoised;
};

struct EvalReport {
  std::vector<RecordEvaluation> records;

  /// Gross totals: raw counts summed over records.
  RecordEvaluation aggregate() const {
    RecordEvaluation a;
    a.name = "aggregate";
    for (const auto& r : records) {
      a.noisy += r.noisy;
      a.denoised += r.denoised;
    }
    return a;
  }

  /// Mean over records of each per-record statistic (records where it is undefined are skipped).
  QrsStats record_average(bool denoised) const {
    double s[3] = {0, 0, 0};
    std::size_t n[3] = {0, 0, 0};
    for (const auto& r : records) {
      const auto q = (denoised ? r.denoised : r.noisy).qrs();
      const std::optional<double> v[3] = {q.sensitivity, q.positive_predictivity, q.error_rate};
      for (int i = 0; i < 3; ++i)
        if (v[i]) { s[i] += *v[i]; ++n[i]; }
    }
    QrsStats out;
    if (n[0]) out.sensitivity = s[0] / static_cast<double>(n[0]);
    if (n[1]) out.positive_predictivity = s[1] / static_cast<double>(n[1]);
    if (n[2]) out.error_rate = s[2] / static_cast<double>(n[2]);
    return out;
  }
};

namespace detail {

inline std::string fmt_stat(const std::optional<double>& v) {
  if (!v) return "undefined";
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << *v;
  return os.str();
}

inline void write_score_kv(std::ostream& out, const std::string& prefix, const DetectionScore& s) {
  const auto q = s.qrs();
  out << prefix << ".tp=" << s.tp << '\n'
      << prefix << ".fp=" << s.fp << '\n'
      << prefix << ".fn=" << s.fn << '\n'
      << prefix << ".sensitivity=" << fmt_stat(q.sensitivity) << '\n'
      << prefix << ".positive_predictivity=" << fmt_stat(q.positive_predictivity) << '\n'
      << prefix << ".error_rate=" << fmt_stat(q.error_rate) << '\n';
  if (s.veb) {
    const auto v = veb_stats(*s.veb);
    out << prefix << ".veb.tp=" << s.veb->tp << '\n'
        << prefix << ".veb.tn=" << s.veb->tn << '\n'
        << prefix << ".veb.fp=" << s.veb->fp << '\n'
        << prefix << ".veb.fn=" << s.veb->fn << '\n'
        << prefix << ".veb.sensitivity=" << fmt_stat(v.sensitivity) << '\n'
        << prefix << ".veb.positive_predictivity=" << fmt_stat(v.positive_predictivity) << '\n'
        << prefix << ".veb.false_positive_rate=" << fmt_stat(v.false_positive_rate) << '\n'
        << prefix << ".veb.classification_rate=" << fmt_stat(v.classification_rate) << '\n';
  }
}

inline void write_score_row(std::ostream& out, const std::string& label, const DetectionScore& s) {
  const auto q = s.qrs();
  out << "  " << std::left << std::setw(9) << label << std::right << std::setw(7) << s.tp
      << std::setw(7) << s.fp << std::setw(7) << s.fn << std::setw(12) << fmt_stat(q.sensitivity)
      << std::setw(12) << fmt_stat(q.positive_predictivity) << std::setw(12) << fmt_stat(q.error_rate)
      << '\n';
}

}  // namespace detail

/// Machine-readable key=value form.
inline void write_report_kv(std::ostream& out, const EvalReport& report) {
  auto one = [&](const RecordEvaluation& r) {
    const std::string p = "record." + r.name;
    if (r.rmse_ratio) out << p << ".rmse_ratio=" << std::setprecision(10) << *r.rmse_ratio << '\n';
    detail::write_score_kv(out, p + ".noisy", r.noisy);
    detail::write_score_kv(out, p + ".denoised", r.denoised);
  };
  for (const auto& r : report.records) one(r);
  one(report.aggregate());
}

/// Human-readable report with noisy / denoised rows side by side.
inline void write_report_text(std::ostream& out, const EvalReport& report) {
  auto block = [&](const RecordEvaluation& r) {
    out << "record " << r.name << '\n';
    if (r.rmse_ratio) out << "  RMSE(denoised)/RMSE(noisy) = " << detail::fmt_stat(r.rmse_ratio) << '\n';
    out << "  QRS detection\n  signal        TP     FP     FN sensitivity    pos.pred  error rate\n";
    detail::write_score_row(out, "noisy", r.noisy);
    detail::write_score_row(out, "denoised", r.denoised);
    if (r.noisy.veb || r.denoised.veb) {
      out << "  VEB classification\n  signal     sensitivity    pos.pred   false pos.  class.rate\n";
      for (auto [label, s] : {std::pair{"noisy", &r.noisy}, std::pair{"denoised", &r.denoised}}) {
        if (!s->veb) continue;
        const auto v = veb_stats(*s->veb);
        out << "  " << std::left << std::setw(9) << label << std::right << std::setw(14)
            << detail::fmt_stat(v.sensitivity) << std::setw(12) << detail::fmt_stat(v.positive_predictivity)
            << std::setw(13) << detail::fmt_stat(v.false_positive_rate) << std::setw(12)
            << detail::fmt_stat(v.classification_rate) << '\n';
      }
    }
    out << '\n';
  };
  for (const auto& r : report.records) block(r);
  block(report.aggregate());
}

}  // namespace ecgdn
