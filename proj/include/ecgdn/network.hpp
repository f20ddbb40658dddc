#pragma once

// Fully connected regression network: logistic hidden layers, linear output,
// squared-error loss. Parameters are stored per layer as a row-major
// (n_in x n_out) weight block plus a bias row.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ecgdn/errors.hpp"
#include "ecgdn/linalg.hpp"

namespace ecgdn {

enum class Activation { Logistic, Linear };

/// Layer widths [n_in, h1, h2, h3, n_out].
struct LayerSpec {
  static constexpr std::size_t kDefaultHidden = 1000;

  std::vector<std::size_t> sizes;

  static LayerSpec make(std::size_t n_in, std::size_t n_out,
                        std::size_t hidden = kDefaultHidden) {
    return {{n_in, hidden, hidden, hidden, n_out}};
  }

  void validate() const {
    require(sizes.size() == 5, Errc::InvalidConfig, "exactly three hidden layers are required");
    for (auto s : sizes) require(s >= 1, Errc::InvalidConfig, "layer sizes must be positive");
  }

  bool operator==(const LayerSpec&) const = default;
};

struct TrainHyper {
  std::size_t pretrain_epochs = 10;
  std::size_t finetune_epochs = 30;
  std::size_t minibatch_size = 100;
  double learning_rate_pretrain_gaussian = 0.001;  // first RBM (real-valued visibles)
  double learning_rate_pretrain = 0.01;            // binary-visible RBMs
  double learning_rate_finetune = 0.01;
  double initial_momentum = 0.5;
  double momentum = 0.9;
  std::size_t momentum_switch_epoch = 5;
  double weight_decay = 2e-4;
  double validation_fraction = 0.0;  // trailing rows held out and reported only
  std::uint64_t rng_seed = 1;

  double momentum_at(std::size_t epoch) const {
    return epoch < momentum_switch_epoch ? initial_momentum : momentum;
  }

  void validate() const {
    auto ok_rate = [](double v) { return std::isfinite(v) && v >= 0; };
    require(minibatch_size >= 1, Errc::InvalidConfig, "minibatch size must be >= 1");
    require(ok_rate(learning_rate_pretrain_gaussian) && ok_rate(learning_rate_pretrain) &&
                ok_rate(learning_rate_finetune),
            Errc::InvalidConfig, "learning rates must be finite and non-negative");
    require(initial_momentum >= 0 && initial_momentum < 1 && momentum >= 0 && momentum < 1,
            Errc::InvalidConfig, "momentum must lie in [0, 1)");
    require(weight_decay >= 0 && std::isfinite(weight_decay), Errc::InvalidConfig,
            "weight decay must be non-negative");
    require(validation_fraction >= 0 && validation_fraction < 1, Errc::InvalidConfig,
            "validation fraction must lie in [0, 1)");
  }

  bool operator==(const TrainHyper&) const = default;
};

template <typename T>
struct DenseLayer {
  RowMatrix<T> weights;  // n_in x n_out
  RowVector<T> bias;     // n_out
  Activation activation = Activation::Logistic;

  std::size_t n_in() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t n_out() const { return static_cast<std::size_t>(weights.cols()); }

  bool operator==(const DenseLayer& o) const {
    return activation == o.activation && weights.rows() == o.weights.rows() &&
           weights.cols() == o.weights.cols() && weights == o.weights && bias == o.bias;
  }
};

template <typename Derived>
auto logistic(const Eigen::MatrixBase<Derived>& z) {
  using T = typename Derived::Scalar;
  return (T(1) + (-z.array()).exp()).inverse().matrix();
}

template <typename T>
class FeedForward {
 public:
  FeedForward() = default;

  explicit FeedForward(std::vector<DenseLayer<T>> layers) : layers_(std::move(layers)) {
    validate();
  }

  /// Zero parameters with the given widths: logistic hiddens, linear output.
  static FeedForward zeros(const std::vector<std::size_t>& sizes) {
    require(sizes.size() >= 2, Errc::DimensionMismatch, "need at least an input and output width");
    std::vector<DenseLayer<T>> layers;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      DenseLayer<T> d;
      d.weights = RowMatrix<T>::Zero(static_cast<Eigen::Index>(sizes[l]),
                                     static_cast<Eigen::Index>(sizes[l + 1]));
      d.bias = RowVector<T>::Zero(static_cast<Eigen::Index>(sizes[l + 1]));
      d.activation = l + 2 == sizes.size() ? Activation::Linear : Activation::Logistic;
      layers.push_back(std::move(d));
    }
    return FeedForward(std::move(layers));
  }

  /// Independent N(0, stddev^2) weights and biases, for tests and baselines.
  template <typename Rng>
  static FeedForward random(const std::vector<std::size_t>& sizes, double stddev, Rng& rng) {
    auto net = zeros(sizes);
    std::normal_distribution<double> normal(0.0, stddev);
    for (auto& layer : net.layers_) {
      for (Eigen::Index i = 0; i < layer.weights.size(); ++i)
        layer.weights.data()[i] = static_cast<T>(normal(rng));
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = static_cast<T>(normal(rng));
    }
    return net;
  }

  void validate() const {
    require(!layers_.empty(), Errc::DimensionMismatch, "network has no layers");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& d = layers_[l];
      require(d.bias.size() == d.weights.cols(), Errc::DimensionMismatch,
              "bias width differs from layer " + std::to_string(l) + " output width");
      if (l > 0)
        require(d.n_in() == layers_[l - 1].n_out(), Errc::DimensionMismatch,
                "layer " + std::to_string(l) + " input width does not chain");
      const bool last = l + 1 == layers_.size();
      require(d.activation == (last ? Activation::Linear : Activation::Logistic),
              Errc::DimensionMismatch, "hidden layers must be logistic and the output linear");
    }
  }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s{layers_.front().n_in()};
    for (const auto& d : layers_) s.push_back(d.n_out());
    return s;
  }

  std::size_t n_in() const { return layers_.front().n_in(); }
  std::size_t n_out() const { return layers_.back().n_out(); }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& d : layers_) n += static_cast<std::size_t>(d.weights.size() + d.bias.size());
    return n;
  }

  std::vector<DenseLayer<T>>& layers() { return layers_; }
  const std::vector<DenseLayer<T>>& layers() const { return layers_; }

  /// One row per sample.
  template <typename Derived>
  RowMatrix<T> forward_batch(const Eigen::MatrixBase<Derived>& inputs) const {
    require(static_cast<std::size_t>(inputs.cols()) == n_in(), Errc::DimensionMismatch,
            "input width " + std::to_string(inputs.cols()) + " != " + std::to_string(n_in()));
    RowMatrix<T> a = inputs.template cast<T>();
    for (const auto& d : layers_) {
      RowMatrix<T> z = a * d.weights;
      z.rowwise() += d.bias;
      a = d.activation == Activation::Logistic ? RowMatrix<T>(logistic(z)) : std::move(z);
    }
    return a;
  }

  RowVector<T> forward(const RowVector<T>& input) const { return forward_batch(input); }

  /// Activations of every layer (index 0 is the input), kept for backprop.
  template <typename Derived>
  std::vector<RowMatrix<T>> activations(const Eigen::MatrixBase<Derived>& inputs) const {
    require(static_cast<std::size_t>(inputs.cols()) == n_in(), Errc::DimensionMismatch,
            "input width mismatch");
    std::vector<RowMatrix<T>> acts;
    acts.reserve(layers_.size() + 1);
    acts.emplace_back(inputs.template cast<T>());
    for (const auto& d : layers_) {
      RowMatrix<T> z = acts.back() * d.weights;
      z.rowwise() += d.bias;
      if (d.activation == Activation::Logistic) z = logistic(z);
      acts.push_back(std::move(z));
    }
    return acts;
  }

  bool operator==(const FeedForward&) const = default;

 private:
  std::vector<DenseLayer<T>> layers_;
};

template <typename T>
struct LayerGradient {
  RowMatrix<T> weights;
  RowVector<T> bias;
};

template <typename T>
using Gradients = std::vector<LayerGradient<T>>;

/// Gradient of mean over rows of 0.5 * ||f(x) - y||^2. Returns that loss.
template <typename T, typename DX, typename DY>
double backprop(const FeedForward<T>& net, const Eigen::MatrixBase<DX>& inputs,
                const Eigen::MatrixBase<DY>& targets, Gradients<T>& grads) {
  require(targets.rows() == inputs.rows() &&
              static_cast<std::size_t>(targets.cols()) == net.n_out(),
          Errc::DimensionMismatch, "target shape does not match the network output");
  const auto& layers = net.layers();
  const auto acts = net.activations(inputs);
  const T inv_batch = T(1) / static_cast<T>(inputs.rows());

  RowMatrix<T> delta = acts.back() - targets.template cast<T>();
  const double loss = 0.5 * static_cast<double>(delta.squaredNorm()) * static_cast<double>(inv_batch);
  delta *= inv_batch;

  grads.resize(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    grads[l].weights.noalias() = acts[l].transpose() * delta;
    grads[l].bias = delta.colwise().sum();
    if (l == 0) break;
    RowMatrix<T> back = delta * layers[l].weights.transpose();
    const auto& a = acts[l];
    delta = (back.array() * a.array() * (T(1) - a.array())).matrix();
  }
  return loss;
}

/// Flat views used by the finite-difference checker.
template <typename T>
T& parameter_at(FeedForward<T>& net, std::size_t flat) {
  for (auto& d : net.layers()) {
    const auto nw = static_cast<std::size_t>(d.weights.size());
    if (flat < nw) return d.weights.data()[flat];
    flat -= nw;
    const auto nb = static_cast<std::size_t>(d.bias.size());
    if (flat < nb) return d.bias.data()[flat];
    flat -= nb;
  }
  throw Error(Errc::OutOfRange, "parameter index past the end");
}

template <typename T>
T gradient_at(const Gradients<T>& g, std::size_t flat) {
  for (const auto& d : g) {
    const auto nw = static_cast<std::size_t>(d.weights.size());
    if (flat < nw) return d.weights.data()[flat];
    flat -= nw;
    const auto nb = static_cast<std::size_t>(d.bias.size());
    if (flat < nb) return d.bias.data()[flat];
    flat -= nb;
  }
  throw Error(Errc::OutOfRange, "gradient index past the end");
}

template <typename T>
using GradientFn = std::function<void(const FeedForward<T>&, const RowMatrix<T>&,
                                      const RowMatrix<T>&, Gradients<T>&)>;

template <typename T>
GradientFn<T> analytic_gradient() {
  return [](const FeedForward<T>& n, const RowMatrix<T>& x, const RowMatrix<T>& y, Gradients<T>& g) {
    backprop(n, x, y, g);
  };
}

/// Compares the analytic gradient of 0.5 * ||f(x) - y||^2 against central
/// differences and returns max |ga - gn| / max(|ga|, |gn|, 1e-12). Networks
/// with more than `max_checked` parameters are checked on a random subset.
template <typename T>
double gradient_check(const FeedForward<T>& net, const RowVector<T>& input,
                      const RowVector<T>& target, double epsilon,
                      const GradientFn<T>& gradient = analytic_gradient<T>(),
                      std::size_t max_checked = 5000, std::uint64_t seed = 0) {
  require(epsilon >= 1e-7 && epsilon <= 1e-3, Errc::InvalidConfig, "epsilon must lie in [1e-7, 1e-3]");
  const RowMatrix<T> x = input;
  const RowMatrix<T> y = target;
  Gradients<T> g;
  gradient(net, x, y, g);

  // The perturbed losses are evaluated in extended precision so the
  // difference quotient is not dominated by rounding of the loss itself.
  using E = long double;
  auto loss = [&](const FeedForward<T>& n) {
    RowMatrix<E> a = x.template cast<E>();
    for (const auto& d : n.layers()) {
      RowMatrix<E> z = a * d.weights.template cast<E>();
      z.rowwise() += d.bias.template cast<E>();
      if (d.activation == Activation::Logistic) z = (E(1) / (E(1) + (-z.array()).exp())).matrix();
      a = std::move(z);
    }
    return E(0.5) * (a - y.template cast<E>()).squaredNorm();
  };

  const std::size_t total = net.parameter_count();
  std::vector<std::size_t> indices(total);
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  if (total > max_checked) {
    std::mt19937_64 rng(seed);
    std::shuffle(indices.begin(), indices.end(), rng);
    indices.resize(max_checked);
  }

  FeedForward<T> probe = net;
  double worst = 0.0;
  for (auto idx : indices) {
    T& p = parameter_at(probe, idx);
    const T saved = p;
    const T hi = static_cast<T>(static_cast<double>(saved) + epsilon);
    const T lo = static_cast<T>(static_cast<double>(saved) - epsilon);
    p = hi;
    const E up = loss(probe);
    p = lo;
    const E down = loss(probe);
    p = saved;
    const double numeric = static_cast<double>((up - down) / (static_cast<E>(hi) - static_cast<E>(lo)));
    const double analytic = static_cast<double>(gradient_at(g, idx));
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

struct FinetuneReport {
  std::vector<double> train_mse;       // per epoch, mean over all output elements
  std::vector<double> validation_mse;  // empty when no rows are held out
};

namespace detail {

template <typename T, typename Rng>
std::vector<Eigen::Index> shuffled_indices(Eigen::Index n, Rng& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

template <typename T>
double mse(const FeedForward<T>& net, const RowMatrix<T>& inputs, const RowMatrix<T>& targets,
           Eigen::Index begin, Eigen::Index end, Eigen::Index chunk = 2048) {
  double ss = 0;
  for (Eigen::Index r = begin; r < end; r += chunk) {
    const auto n = std::min(chunk, end - r);
    auto out = net.forward_batch(inputs.middleRows(r, n));
    ss += static_cast<double>((out - targets.middleRows(r, n)).squaredNorm());
  }
  return ss / static_cast<double>((end - begin) * targets.cols());
}

}  // namespace detail

/// Momentum minibatch SGD on the squared error. `on_epoch` (optional) sees the
/// epoch index and the running report.
template <typename T>
FinetuneReport finetune(FeedForward<T>& net, const RowMatrix<T>& inputs, const RowMatrix<T>& targets,
                        const TrainHyper& hyper,
                        const std::function<void(std::size_t, const FinetuneReport&)>& on_epoch = {}) {
  hyper.validate();
  require(inputs.rows() == targets.rows() && inputs.rows() > 0, Errc::DimensionMismatch,
          "inputs and targets must have the same, non-zero row count");
  require(static_cast<std::size_t>(inputs.cols()) == net.n_in() &&
              static_cast<std::size_t>(targets.cols()) == net.n_out(),
          Errc::DimensionMismatch, "dataset shape does not match the network");

  const auto n_rows = inputs.rows();
  auto n_val = static_cast<Eigen::Index>(hyper.validation_fraction * static_cast<double>(n_rows));
  if (n_val >= n_rows) n_val = n_rows - 1;
  const auto n_train = n_rows - n_val;
  const auto batch = static_cast<Eigen::Index>(hyper.minibatch_size);

  // Separate stream from pretraining so fine-tuning alone is reproducible.
  std::mt19937_64 rng(hyper.rng_seed ^ 0x9e3779b97f4a7c15ULL);
  auto& layers = net.layers();
  Gradients<T> velocity(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    velocity[l].weights = RowMatrix<T>::Zero(layers[l].weights.rows(), layers[l].weights.cols());
    velocity[l].bias = RowVector<T>::Zero(layers[l].bias.size());
  }

  FinetuneReport report;
  Gradients<T> grads;
  RowMatrix<T> xb, yb;
  for (std::size_t epoch = 0; epoch < hyper.finetune_epochs; ++epoch) {
    const T lr = static_cast<T>(hyper.learning_rate_finetune);
    const T mom = static_cast<T>(hyper.momentum_at(epoch));
    const T decay = static_cast<T>(hyper.weight_decay);
    const auto order = detail::shuffled_indices<T>(n_train, rng);
    double loss_sum = 0;
    for (Eigen::Index start = 0; start < n_train; start += batch) {
      const auto n = std::min(batch, n_train - start);
      std::vector<Eigen::Index> rows(order.begin() + start, order.begin() + start + n);
      xb = inputs(rows, Eigen::all);
      yb = targets(rows, Eigen::all);
      const double loss = backprop(net, xb, yb, grads);
      if (!std::isfinite(loss))
        throw Error(Errc::NonFiniteLoss, "loss diverged in epoch " + std::to_string(epoch) +
                                             "; lower the fine-tuning learning rate");
      loss_sum += 2.0 * loss * static_cast<double>(n);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        velocity[l].weights = mom * velocity[l].weights - lr * (grads[l].weights + decay * layers[l].weights);
        velocity[l].bias = mom * velocity[l].bias - lr * grads[l].bias;
        layers[l].weights += velocity[l].weights;
        layers[l].bias += velocity[l].bias;
      }
    }
    const double epoch_mse = loss_sum / static_cast<double>(n_train * targets.cols());
    if (!std::isfinite(epoch_mse))
      throw Error(Errc::NonFiniteLoss, "training error is not finite");
    report.train_mse.push_back(epoch_mse);
    if (n_val > 0) report.validation_mse.push_back(detail::mse(net, inputs, targets, n_train, n_rows));
    if (on_epoch) on_epoch(epoch, report);
  }
  return report;
}

}  // namespace ecgdn
