#pragma once

// Multi-channel waveform records and beat annotation streams, with the
// plain-text formats used on disk:
//
//   record CSV        # fs=<int>
//                     # gain=<g1>,<g2>,...
//                     # names=<n1>,<n2>,...
//                     <raw1>,<raw2>,...        (one row per sample)
//
//   annotation file   <sample_index> <label-char>   (one beat per line)
//
// Stored amplitudes are raw * gain.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ecgdn/errors.hpp"

namespace ecgdn {

struct Channel {
  std::string name;
  std::vector<double> samples;
};

class Record {
 public:
  Record() = default;

  Record(int sampling_rate_hz, std::vector<Channel> channels)
      : fs_(sampling_rate_hz), channels_(std::move(channels)) {
    require(fs_ >= 1, Errc::MalformedHeader, "sampling rate must be >= 1");
    duration_ = channels_.empty() ? 0 : channels_.front().samples.size();
    std::unordered_set<std::string> seen;
    for (const auto& c : channels_) {
      require(c.samples.size() == duration_, Errc::RaggedRows,
              "channel '" + c.name + "' length differs from the record duration");
      require(seen.insert(c.name).second, Errc::MalformedHeader,
              "duplicate channel name '" + c.name + "'");
      for (double v : c.samples)
        require(std::isfinite(v), Errc::NonFiniteSample, "channel '" + c.name + "'");
    }
  }

  int sampling_rate() const noexcept { return fs_; }
  std::size_t duration() const noexcept { return duration_; }
  std::size_t channel_count() const noexcept { return channels_.size(); }
  const std::vector<Channel>& channels() const noexcept { return channels_; }
  const Channel& channel(std::size_t i) const { return channels_.at(i); }

  const Channel& channel(std::string_view name) const {
    return channels_[index_of(name)];
  }

  std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < channels_.size(); ++i)
      if (channels_[i].name == name) return i;
    throw Error(Errc::OutOfRange, "no channel named '" + std::string(name) + "'");
  }

  bool has_channel(std::string_view name) const {
    return std::any_of(channels_.begin(), channels_.end(),
                       [&](const Channel& c) { return c.name == name; });
  }

  bool operator==(const Record& other) const {
    if (fs_ != other.fs_ || channels_.size() != other.channels_.size()) return false;
    for (std::size_t i = 0; i < channels_.size(); ++i) {
      if (channels_[i].name != other.channels_[i].name) return false;
      if (channels_[i].samples != other.channels_[i].samples) return false;
    }
    return true;
  }

 private:
  int fs_ = 1;
  std::vector<Channel> channels_;
  std::size_t duration_ = 0;
};

enum class BeatLabel { Normal, Veb, Fusion, Unclassifiable, Other };

constexpr BeatLabel label_from_char(char c) {
  switch (c) {
    case 'N': return BeatLabel::Normal;
    case 'V': return BeatLabel::Veb;
    case 'F': return BeatLabel::Fusion;
    case 'Q': return BeatLabel::Unclassifiable;
    default: return BeatLabel::Other;
  }
}

constexpr char label_to_char(BeatLabel l) {
  switch (l) {
    case BeatLabel::Normal: return 'N';
    case BeatLabel::Veb: return 'V';
    case BeatLabel::Fusion: return 'F';
    case BeatLabel::Unclassifiable: return 'Q';
    case BeatLabel::Other: return 'O';
  }
  return 'O';
}

struct Annotation {
  std::size_t sample_index = 0;
  BeatLabel label = BeatLabel::Normal;

  bool operator==(const Annotation&) const = default;
};

/// Beat annotations, strictly increasing in sample index.
class AnnotationList {
 public:
  AnnotationList() = default;

  explicit AnnotationList(std::vector<Annotation> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 1; i < entries_.size(); ++i)
      require(entries_[i].sample_index > entries_[i - 1].sample_index,
              Errc::UnsortedAnnotations,
              "annotation " + std::to_string(i) + " at sample " +
                  std::to_string(entries_[i].sample_index) + " is not after sample " +
                  std::to_string(entries_[i - 1].sample_index));
  }

  const std::vector<Annotation>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const Annotation& operator[](std::size_t i) const { return entries_[i]; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Checks every annotation lies inside a record of `duration` samples.
  void validate_against(std::size_t duration) const {
    if (!entries_.empty())
      require(entries_.back().sample_index < duration, Errc::OutOfRange,
              "annotation at sample " + std::to_string(entries_.back().sample_index) +
                  " is past the record end (" + std::to_string(duration) + ")");
  }

  bool operator==(const AnnotationList&) const = default;

 private:
  std::vector<Annotation> entries_;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

// Parses "# key=value" and returns value; throws MalformedHeader otherwise.
inline std::string_view header_value(std::string_view line, std::string_view key) {
  line = trim(line);
  if (line.empty() || line.front() != '#')
    throw Error(Errc::MalformedHeader, "expected '# " + std::string(key) + "=...'");
  line = trim(line.substr(1));
  if (line.substr(0, key.size()) != key || line.size() <= key.size() ||
      line[key.size()] != '=')
    throw Error(Errc::MalformedHeader, "expected '# " + std::string(key) + "=...'");
  return trim(line.substr(key.size() + 1));
}

inline std::string format_number(double v, int significant_digits) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general,
                           significant_digits);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline Record parse_record(std::istream& in) {
  std::string line;
  int fs = 0;
  std::vector<double> gains;
  std::vector<std::string> names;

  if (!std::getline(in, line)) throw Error(Errc::MalformedHeader, "missing fs line");
  if (!detail::parse_number(detail::header_value(line, "fs"), fs) || fs < 1)
    throw Error(Errc::MalformedHeader, "fs must be a positive integer");

  if (!std::getline(in, line)) throw Error(Errc::MalformedHeader, "missing gain line");
  for (auto tok : detail::split(detail::header_value(line, "gain"), ',')) {
    double g = 0;
    if (!detail::parse_number(tok, g) || !std::isfinite(g))
      throw Error(Errc::MalformedHeader, "bad gain '" + std::string(tok) + "'");
    gains.push_back(g);
  }

  if (!std::getline(in, line)) throw Error(Errc::MalformedHeader, "missing names line");
  for (auto tok : detail::split(detail::header_value(line, "names"), ','))
    names.emplace_back(detail::trim(tok));
  if (names.size() != gains.size())
    throw Error(Errc::MalformedHeader, "gain and names lists differ in length");

  std::vector<Channel> channels(names.size());
  for (std::size_t c = 0; c < names.size(); ++c) channels[c].name = names[c];

  std::size_t row = 0;
  while (std::getline(in, line)) {
    auto body = detail::trim(line);
    if (body.empty()) continue;
    auto toks = detail::split(body, ',');
    if (toks.size() != channels.size())
      throw Error(Errc::RaggedRows, "row " + std::to_string(row) + " has " +
                                        std::to_string(toks.size()) + " values, expected " +
                                        std::to_string(channels.size()));
    for (std::size_t c = 0; c < toks.size(); ++c) {
      double v = 0;
      if (!detail::parse_number(toks[c], v) || !std::isfinite(v))
        throw Error(Errc::NonFiniteSample,
                    "row " + std::to_string(row) + " column " + std::to_string(c));
      channels[c].samples.push_back(v * gains[c]);
    }
    ++row;
  }
  return Record(fs, std::move(channels));
}

inline Record load_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return parse_record(in);
}

/// Writes with unit gains. Values are rounded to `significant_digits`.
inline void write_record(std::ostream& out, const Record& r, int significant_digits = 6) {
  out << "# fs=" << r.sampling_rate() << '\n' << "# gain=";
  for (std::size_t c = 0; c < r.channel_count(); ++c) out << (c ? "," : "") << '1';
  out << "\n# names=";
  for (std::size_t c = 0; c < r.channel_count(); ++c)
    out << (c ? "," : "") << r.channel(c).name;
  out << '\n';
  std::string row;
  for (std::size_t t = 0; t < r.duration(); ++t) {
    row.clear();
    for (std::size_t c = 0; c < r.channel_count(); ++c) {
      if (c) row += ',';
      row += detail::format_number(r.channel(c).samples[t], significant_digits);
    }
    row += '\n';
    out << row;
  }
}

inline void save_record(const std::filesystem::path& path, const Record& r,
                        int significant_digits = 6) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  write_record(out, r, significant_digits);
}

inline AnnotationList parse_annotations(std::istream& in) {
  std::vector<Annotation> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto sp = body.find_first_of(" \t");
    std::size_t idx = 0;
    if (!detail::parse_number(body.substr(0, sp), idx))
      throw Error(Errc::OutOfRange, "line " + std::to_string(lineno) + ": bad sample index");
    auto label = sp == std::string_view::npos ? std::string_view{}
                                              : detail::trim(body.substr(sp));
    if (label.size() != 1)
      throw Error(Errc::UnknownLabel, "line " + std::to_string(lineno) + ": label '" +
                                          std::string(label) + "' is not a single character");
    entries.push_back({idx, label_from_char(label.front())});
  }
  return AnnotationList(std::move(entries));
}

inline AnnotationList load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return parse_annotations(in);
}

inline void write_annotations(std::ostream& out, const AnnotationList& a) {
  for (const auto& e : a) out << e.sample_index << ' ' << label_to_char(e.label) << '\n';
}

inline void save_annotations(const std::filesystem::path& path, const AnnotationList& a) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  write_annotations(out, a);
}

/// Samples [start, end) of every channel.
inline Record slice_record(const Record& r, std::size_t start, std::size_t end) {
  require(start < end && end <= r.duration(), Errc::OutOfRange,
          "slice [" + std::to_string(start) + ", " + std::to_string(end) +
              ") outside record of " + std::to_string(r.duration()) + " samples");
  std::vector<Channel> channels;
  channels.reserve(r.channel_count());
  for (const auto& c : r.channels())
    channels.push_back({c.name, std::vector<double>(c.samples.begin() + start,
                                                    c.samples.begin() + end)});
  return Record(r.sampling_rate(), std::move(channels));
}

/// Annotations inside [start, end), re-indexed relative to start.
inline AnnotationList slice_annotations(const AnnotationList& a, std::size_t start,
                                        std::size_t end) {
  std::vector<Annotation> out;
  for (const auto& e : a)
    if (e.sample_index >= start && e.sample_index < end)
      out.push_back({e.sample_index - start, e.label});
  return AnnotationList(std::move(out));
}

}  // namespace ecgdn
