#pragma once

// Restricted Boltzmann machines trained with one-step contrastive divergence,
// stacked greedily to initialise the hidden layers of a FeedForward network.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "ecgdn/errors.hpp"
#include "ecgdn/linalg.hpp"
#include "ecgdn/network.hpp"

namespace ecgdn {

enum class VisibleKind { Gaussian, Bernoulli };

template <typename T>
struct Rbm {
  RowMatrix<T> weights;  // visible x hidden
  RowVector<T> visible_bias;
  RowVector<T> hidden_bias;
  VisibleKind visible_kind = VisibleKind::Gaussian;

  std::size_t n_visible() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t n_hidden() const { return static_cast<std::size_t>(weights.cols()); }

  template <typename Derived>
  RowMatrix<T> hidden_probabilities(const Eigen::MatrixBase<Derived>& visible) const {
    RowMatrix<T> z = visible * weights;
    z.rowwise() += hidden_bias;
    return logistic(z);
  }

  /// Mean of the visible units given hidden states (identity for Gaussian units).
  template <typename Derived>
  RowMatrix<T> visible_means(const Eigen::MatrixBase<Derived>& hidden) const {
    RowMatrix<T> z = hidden * weights.transpose();
    z.rowwise() += visible_bias;
    if (visible_kind == VisibleKind::Bernoulli) return logistic(z);
    return z;
  }

  bool finite() const {
    return weights.allFinite() && visible_bias.allFinite() && hidden_bias.allFinite();
  }

  bool operator==(const Rbm& o) const {
    return visible_kind == o.visible_kind && weights.rows() == o.weights.rows() &&
           weights.cols() == o.weights.cols() && weights == o.weights &&
           visible_bias == o.visible_bias && hidden_bias == o.hidden_bias;
  }
};

/// Weights ~ N(0, 0.01^2), zero biases.
template <typename T, typename Rng>
Rbm<T> init_rbm(std::size_t n_visible, std::size_t n_hidden, VisibleKind kind, Rng& rng) {
  require(n_visible >= 1 && n_hidden >= 1, Errc::InvalidConfig, "RBM sizes must be >= 1");
  Rbm<T> r;
  r.visible_kind = kind;
  r.weights.resize(static_cast<Eigen::Index>(n_visible), static_cast<Eigen::Index>(n_hidden));
  std::normal_distribution<double> normal(0.0, 0.01);
  for (Eigen::Index i = 0; i < r.weights.size(); ++i) r.weights.data()[i] = static_cast<T>(normal(rng));
  r.visible_bias = RowVector<T>::Zero(static_cast<Eigen::Index>(n_visible));
  r.hidden_bias = RowVector<T>::Zero(static_cast<Eigen::Index>(n_hidden));
  return r;
}

template <typename T>
struct RbmVelocity {
  RowMatrix<T> weights;
  RowVector<T> visible_bias;
  RowVector<T> hidden_bias;

  static RbmVelocity zeros_like(const Rbm<T>& r) {
    return {RowMatrix<T>::Zero(r.weights.rows(), r.weights.cols()),
            RowVector<T>::Zero(r.visible_bias.size()), RowVector<T>::Zero(r.hidden_bias.size())};
  }
};

struct CdStep {
  double learning_rate = 0.01;
  double momentum = 0.5;
  double weight_decay = 2e-4;
};

/// One CD-1 step on a minibatch. Hidden states are sampled on the data pass;
/// the reconstruction pass uses means/probabilities. Updates `rbm` and the
/// persistent `velocity` in place and returns the mean squared reconstruction
/// error of the batch.
template <typename T, typename Derived, typename Rng>
double cd1_update(Rbm<T>& rbm, RbmVelocity<T>& velocity, const Eigen::MatrixBase<Derived>& batch,
                  const CdStep& step, Rng& rng) {
  require(static_cast<std::size_t>(batch.cols()) == rbm.n_visible(), Errc::DimensionMismatch,
          "minibatch width " + std::to_string(batch.cols()) + " != visible units " +
              std::to_string(rbm.n_visible()));
  require(batch.rows() > 0, Errc::DimensionMismatch, "empty minibatch");

  const RowMatrix<T> v0 = batch.template cast<T>();
  const RowMatrix<T> h0 = rbm.hidden_probabilities(v0);
  RowMatrix<T> h0_states(h0.rows(), h0.cols());
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (Eigen::Index i = 0; i < h0.size(); ++i)
    h0_states.data()[i] = uniform(rng) < static_cast<double>(h0.data()[i]) ? T(1) : T(0);

  const RowMatrix<T> v1 = rbm.visible_means(h0_states);
  const RowMatrix<T> h1 = rbm.hidden_probabilities(v1);

  const T inv_batch = T(1) / static_cast<T>(v0.rows());
  const T lr = static_cast<T>(step.learning_rate);
  const T mom = static_cast<T>(step.momentum);
  const T decay = static_cast<T>(step.weight_decay);

  RowMatrix<T> grad = v0.transpose() * h0;
  grad.noalias() -= v1.transpose() * h1;
  grad *= inv_batch;

  velocity.weights = mom * velocity.weights + lr * (grad - decay * rbm.weights);
  velocity.visible_bias = mom * velocity.visible_bias + lr * inv_batch * (v0 - v1).colwise().sum();
  velocity.hidden_bias = mom * velocity.hidden_bias + lr * inv_batch * (h0 - h1).colwise().sum();
  rbm.weights += velocity.weights;
  rbm.visible_bias += velocity.visible_bias;
  rbm.hidden_bias += velocity.hidden_bias;

  if (!rbm.finite())
    throw Error(Errc::NonFiniteUpdate, "RBM parameters became non-finite; lower the learning rate");
  return static_cast<double>((v0 - v1).squaredNorm()) / static_cast<double>(v0.size());
}

struct PretrainProgress {
  std::size_t layer;
  std::size_t epoch;
  double reconstruction_error;
};

/// Greedy layer-wise training of three RBMs: Gaussian visibles on the input
/// rows, then Bernoulli visibles on the hidden probabilities of the layer below.
template <typename T, typename Rng>
std::vector<Rbm<T>> pretrain_stack(const RowMatrix<T>& data, const LayerSpec& spec,
                                   const TrainHyper& hyper, Rng& rng,
                                   const std::function<void(const PretrainProgress&)>& on_epoch = {}) {
  spec.validate();
  hyper.validate();
  require(data.rows() > 0, Errc::DimensionMismatch, "empty pretraining set");
  require(static_cast<std::size_t>(data.cols()) == spec.sizes[0], Errc::DimensionMismatch,
          "data width does not match the input layer");

  std::vector<Rbm<T>> stack;
  const auto batch = static_cast<Eigen::Index>(hyper.minibatch_size);
  RowMatrix<T> layer_input;  // hidden probabilities feeding the next RBM
  for (std::size_t layer = 0; layer < 3; ++layer) {
    const RowMatrix<T>& visible = layer == 0 ? data : layer_input;
    const auto kind = layer == 0 ? VisibleKind::Gaussian : VisibleKind::Bernoulli;
    auto rbm = init_rbm<T>(spec.sizes[layer], spec.sizes[layer + 1], kind, rng);
    auto velocity = RbmVelocity<T>::zeros_like(rbm);
    const double lr = layer == 0 ? hyper.learning_rate_pretrain_gaussian : hyper.learning_rate_pretrain;

    RowMatrix<T> xb;
    for (std::size_t epoch = 0; epoch < hyper.pretrain_epochs; ++epoch) {
      const CdStep step{lr, hyper.momentum_at(epoch), hyper.weight_decay};
      const auto order = detail::shuffled_indices<T>(visible.rows(), rng);
      double err = 0;
      for (Eigen::Index start = 0; start < visible.rows(); start += batch) {
        const auto n = std::min(batch, visible.rows() - start);
        std::vector<Eigen::Index> rows(order.begin() + start, order.begin() + start + n);
        xb = visible(rows, Eigen::all);
        err += cd1_update(rbm, velocity, xb, step, rng) * static_cast<double>(n);
      }
      if (on_epoch) on_epoch({layer, epoch, err / static_cast<double>(visible.rows())});
    }

    if (layer < 2) {
      RowMatrix<T> next(visible.rows(), static_cast<Eigen::Index>(spec.sizes[layer + 1]));
      constexpr Eigen::Index chunk = 4096;
      for (Eigen::Index r = 0; r < visible.rows(); r += chunk) {
        const auto n = std::min(chunk, visible.rows() - r);
        next.middleRows(r, n) = rbm.hidden_probabilities(visible.middleRows(r, n));
      }
      layer_input = std::move(next);
    }
    stack.push_back(std::move(rbm));
  }
  return stack;
}

/// Hidden layers copy the RBM weights and hidden biases; the linear output
/// layer starts from N(0, 0.01^2) weights and zero bias.
template <typename T, typename Rng>
FeedForward<T> unroll(const std::vector<Rbm<T>>& rbms, std::size_t n_out, Rng& rng) {
  require(rbms.size() == 3, Errc::DimensionMismatch, "expected three RBMs");
  require(n_out >= 1, Errc::DimensionMismatch, "output width must be >= 1");
  std::vector<DenseLayer<T>> layers;
  for (std::size_t l = 0; l < rbms.size(); ++l) {
    if (l > 0)
      require(rbms[l].n_visible() == rbms[l - 1].n_hidden(), Errc::DimensionMismatch,
              "RBM " + std::to_string(l) + " does not chain onto the previous one");
    layers.push_back({rbms[l].weights, rbms[l].hidden_bias, Activation::Logistic});
  }
  DenseLayer<T> out;
  out.activation = Activation::Linear;
  out.weights.resize(static_cast<Eigen::Index>(rbms.back().n_hidden()), static_cast<Eigen::Index>(n_out));
  std::normal_distribution<double> normal(0.0, 0.01);
  for (Eigen::Index i = 0; i < out.weights.size(); ++i) out.weights.data()[i] = static_cast<T>(normal(rng));
  out.bias = RowVector<T>::Zero(static_cast<Eigen::Index>(n_out));
  layers.push_back(std::move(out));
  return FeedForward<T>(std::move(layers));
}

}  // namespace ecgdn
