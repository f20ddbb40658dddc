#pragma once

// Trained model container.
//
// File layout (all integers and floats little-endian):
//   "ECGDNMDL"                 8-byte magic
//   u32 version                currently 1
//   u64 header length, header  JSON: layer sizes, activations, normalization,
//                              window configuration, hyperparameters, provenance
//   per layer                  f32 weights (n_in x n_out, row-major), f32 bias
//   u64 checksum               FNV-1a over every preceding byte

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecgdn/errors.hpp"
#include "ecgdn/network.hpp"
#include "ecgdn/preprocess.hpp"
#include "ecgdn/windowing.hpp"

namespace ecgdn {

static_assert(std::endian::native == std::endian::little, "model I/O assumes a little-endian host");

constexpr std::uint32_t kModelVersion = 1;
inline constexpr char kModelMagic[8] = {'E', 'C', 'G', 'D', 'N', 'M', 'D', 'L'};

class Fnv1a {
 public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) { update(s.data(), s.size()); }
  std::uint64_t digest() const { return h_; }
  std::string hex() const {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h_;
    return os.str();
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

struct Provenance {
  std::string config_hash;
  std::string dataset_fingerprint;
  std::size_t training_windows = 0;
  std::size_t scale_fit_samples = 0;
  std::vector<double> finetune_mse;

  bool operator==(const Provenance&) const = default;
};

/// A trained network with everything inference needs to reproduce the
/// training-time preprocessing.
struct Model {
  FeedForward<float> net;
  NormalizationSpec normalization;
  WindowConfig window;
  int sampling_rate = 0;
  TrainHyper hyper;
  Provenance provenance;

  bool operator==(const Model&) const = default;
};

inline nlohmann::json hyper_to_json(const TrainHyper& h) {
  return {{"pretrain_epochs", h.pretrain_epochs},
          {"finetune_epochs", h.finetune_epochs},
          {"minibatch_size", h.minibatch_size},
          {"learning_rate_pretrain_gaussian", h.learning_rate_pretrain_gaussian},
          {"learning_rate_pretrain", h.learning_rate_pretrain},
          {"learning_rate_finetune", h.learning_rate_finetune},
          {"initial_momentum", h.initial_momentum},
          {"momentum", h.momentum},
          {"momentum_switch_epoch", h.momentum_switch_epoch},
          {"weight_decay", h.weight_decay},
          {"validation_fraction", h.validation_fraction},
          {"rng_seed", h.rng_seed}};
}

inline TrainHyper hyper_from_json(const nlohmann::json& j) {
  TrainHyper h;
  h.pretrain_epochs = j.at("pretrain_epochs");
  h.finetune_epochs = j.at("finetune_epochs");
  h.minibatch_size = j.at("minibatch_size");
  h.learning_rate_pretrain_gaussian = j.at("learning_rate_pretrain_gaussian");
  h.learning_rate_pretrain = j.at("learning_rate_pretrain");
  h.learning_rate_finetune = j.at("learning_rate_finetune");
  h.initial_momentum = j.at("initial_momentum");
  h.momentum = j.at("momentum");
  h.momentum_switch_epoch = j.at("momentum_switch_epoch");
  h.weight_decay = j.at("weight_decay");
  h.validation_fraction = j.at("validation_fraction");
  h.rng_seed = j.at("rng_seed");
  return h;
}

inline nlohmann::json window_to_json(const WindowConfig& w) {
  return {{"input_channels", w.input_channel_names},
          {"target_channel", w.target_channel_name},
          {"segment_seconds", w.segment_seconds},
          {"train_stride_samples", w.train_stride_samples},
          {"recon_stride_samples", w.recon_stride_samples}};
}

inline WindowConfig window_from_json(const nlohmann::json& j) {
  WindowConfig w;
  w.input_channel_names = j.at("input_channels").get<std::vector<std::string>>();
  w.target_channel_name = j.at("target_channel");
  w.segment_seconds = j.at("segment_seconds");
  w.train_stride_samples = j.at("train_stride_samples");
  w.recon_stride_samples = j.at("recon_stride_samples");
  return w;
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw Error(Errc::CorruptFile, "model file is truncated");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint64_t u(int width) {
    auto s = take(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = width - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
    return v;
  }
  float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(u(4))); }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline nlohmann::json model_header(const Model& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& d : m.net.layers())
    layers.push_back({{"in", d.n_in()},
                      {"out", d.n_out()},
                      {"activation", d.activation == Activation::Logistic ? "logistic" : "linear"}});
  return {{"format", "ecgdn-model"},
          {"scalar", "float32"},
          {"layers", layers},
          {"sampling_rate", m.sampling_rate},
          {"normalization",
           {{"scale_factor", m.normalization.scale_factor},
            {"window_samples", m.normalization.window_samples}}},
          {"window", window_to_json(m.window)},
          {"hyper", hyper_to_json(m.hyper)},
          {"provenance",
           {{"config_hash", m.provenance.config_hash},
            {"dataset_fingerprint", m.provenance.dataset_fingerprint},
            {"training_windows", m.provenance.training_windows},
            {"scale_fit_samples", m.provenance.scale_fit_samples},
            {"finetune_mse", m.provenance.finetune_mse}}}};
}

inline std::string serialize_model(const Model& m) {
  std::string out(kModelMagic, sizeof kModelMagic);
  detail::put_u32(out, kModelVersion);
  const std::string header = model_header(m).dump();
  detail::put_u64(out, header.size());
  out += header;
  for (const auto& d : m.net.layers()) {
    for (Eigen::Index i = 0; i < d.weights.size(); ++i) detail::put_f32(out, d.weights.data()[i]);
    for (Eigen::Index i = 0; i < d.bias.size(); ++i) detail::put_f32(out, d.bias.data()[i]);
  }
  Fnv1a sum;
  sum.update(out);
  detail::put_u64(out, sum.digest());
  return out;
}

inline Model deserialize_model(std::string_view bytes) {
  detail::ByteReader in(bytes);
  if (in.take(sizeof kModelMagic) != std::string_view(kModelMagic, sizeof kModelMagic))
    throw Error(Errc::CorruptFile, "not a model file (bad magic)");
  const auto version = in.u(4);
  if (version != kModelVersion)
    throw Error(Errc::VersionMismatch, "model version " + std::to_string(version) +
                                           " is not supported (expected " +
                                           std::to_string(kModelVersion) + ")");
  const auto header_len = in.u(8);
  const auto header_text = in.take(header_len);

  Model m;
  std::vector<DenseLayer<float>> layers;
  try {
    const auto h = nlohmann::json::parse(header_text);
    m.sampling_rate = h.at("sampling_rate");
    m.normalization.scale_factor = h.at("normalization").at("scale_factor");
    m.normalization.window_samples = h.at("normalization").at("window_samples");
    m.window = window_from_json(h.at("window"));
    m.hyper = hyper_from_json(h.at("hyper"));
    const auto& p = h.at("provenance");
    m.provenance.config_hash = p.at("config_hash");
    m.provenance.dataset_fingerprint = p.at("dataset_fingerprint");
    m.provenance.training_windows = p.at("training_windows");
    m.provenance.scale_fit_samples = p.at("scale_fit_samples");
    m.provenance.finetune_mse = p.at("finetune_mse").get<std::vector<double>>();
    for (const auto& l : h.at("layers")) {
      DenseLayer<float> d;
      d.weights.resize(l.at("in").get<Eigen::Index>(), l.at("out").get<Eigen::Index>());
      d.bias.resize(l.at("out").get<Eigen::Index>());
      d.activation = l.at("activation") == "logistic" ? Activation::Logistic : Activation::Linear;
      layers.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptFile, std::string("bad model header: ") + e.what());
  }

  for (auto& d : layers) {
    if (in.remaining() < 4 * static_cast<std::size_t>(d.weights.size() + d.bias.size()))
      throw Error(Errc::CorruptFile, "model file is truncated");
    for (Eigen::Index i = 0; i < d.weights.size(); ++i) d.weights.data()[i] = in.f32();
    for (Eigen::Index i = 0; i < d.bias.size(); ++i) d.bias.data()[i] = in.f32();
  }
  const auto body_end = in.position();
  const auto stored = in.u(8);
  if (in.remaining() != 0) throw Error(Errc::CorruptFile, "trailing bytes after the checksum");
  Fnv1a sum;
  sum.update(bytes.substr(0, body_end));
  if (sum.digest() != stored) throw Error(Errc::CorruptFile, "checksum mismatch");

  try {
    m.net = FeedForward<float>(std::move(layers));
  } catch (const Error& e) {
    throw Error(Errc::CorruptFile, e.what());
  }
  return m;
}

inline void save_model(const std::filesystem::path& path, const Model& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  const auto bytes = serialize_model(m);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace ecgdn
