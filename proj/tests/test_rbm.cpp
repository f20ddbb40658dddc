#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "ecgdn/rbm.hpp"
#include "ecgdn/synth.hpp"
#include "ecgdn/preprocess.hpp"
#include "oracles.hpp"

using namespace ecgdn;

namespace {

RowMatrix<double> gaussian_rows(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  RowMatrix<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

}  // namespace

TEST(InitRbm, ShapesAndDeterminism) {
  std::mt19937_64 a(5), b(5);
  const auto r1 = init_rbm<double>(4, 3, VisibleKind::Gaussian, a);
  const auto r2 = init_rbm<double>(4, 3, VisibleKind::Gaussian, b);
  EXPECT_EQ(r1, r2);
  EXPECT_EQ(r1.weights.rows(), 4);
  EXPECT_EQ(r1.weights.cols(), 3);
  EXPECT_EQ(r1.visible_bias.size(), 4);
  EXPECT_EQ(r1.hidden_bias.size(), 3);
}

TEST(InitRbm, WeightSpread) {
  std::mt19937_64 rng(6);
  const auto r = init_rbm<double>(1000, 1000, VisibleKind::Gaussian, rng);
  const double mean = r.weights.mean();
  const double sd = std::sqrt((r.weights.array() - mean).square().mean());
  EXPECT_NEAR(sd, 0.01, 0.001);
}

TEST(Cd1, ZeroLearningRateIsIdentity) {
  std::mt19937_64 rng(7);
  auto r = init_rbm<double>(6, 4, VisibleKind::Gaussian, rng);
  auto v = RbmVelocity<double>::zeros_like(r);
  const auto before = r;
  const auto batch = gaussian_rows(10, 6, 1);
  cd1_update(r, v, batch, CdStep{0.0, 0.9, 2e-4}, rng);
  EXPECT_EQ(r, before);
}

TEST(Cd1, WrongWidthRejected) {
  std::mt19937_64 rng(8);
  auto r = init_rbm<double>(6, 4, VisibleKind::Gaussian, rng);
  auto v = RbmVelocity<double>::zeros_like(r);
  EXPECT_ERRC(cd1_update(r, v, gaussian_rows(3, 5, 1), CdStep{}, rng), Errc::DimensionMismatch);
}

TEST(Cd1, ReconstructionErrorFallsOnRepeatedVector) {
  std::mt19937_64 rng(9);
  auto r = init_rbm<double>(12, 8, VisibleKind::Gaussian, rng);
  auto v = RbmVelocity<double>::zeros_like(r);
  RowMatrix<double> batch = gaussian_rows(1, 12, 2).replicate(10, 1);
  std::vector<double> err;
  // A small step keeps the descent resolvable over all 200 steps; with larger
  // ones the error reaches the sampling-noise floor within a few blocks.
  for (int step = 0; step < 200; ++step) err.push_back(cd1_update(r, v, batch, CdStep{0.0005, 0.5, 0.0}, rng));
  std::vector<double> blocks;
  for (std::size_t b = 0; b < 20; ++b)
    blocks.push_back(std::accumulate(err.begin() + 10 * b, err.begin() + 10 * (b + 1), 0.0) / 10);
  EXPECT_LT(blocks.back(), 0.5 * blocks.front());
  for (std::size_t b = 1; b < blocks.size(); ++b) EXPECT_LE(blocks[b], blocks[b - 1]) << "block " << b;
}

TEST(Cd1, BernoulliVisiblesTrain) {
  std::mt19937_64 rng(10);
  auto r = init_rbm<double>(8, 5, VisibleKind::Bernoulli, rng);
  auto v = RbmVelocity<double>::zeros_like(r);
  RowMatrix<double> batch(4, 8);
  batch << 1, 1, 1, 1, 0, 0, 0, 0,  //
      0, 0, 0, 0, 1, 1, 1, 1,       //
      1, 1, 1, 1, 0, 0, 0, 0,       //
      0, 0, 0, 0, 1, 1, 1, 1;
  const double first = cd1_update(r, v, batch, CdStep{0.1, 0.5, 0.0}, rng);
  double last = first;
  for (int i = 0; i < 500; ++i) last = cd1_update(r, v, batch, CdStep{0.1, 0.9, 0.0}, rng);
  EXPECT_LT(last, first);
  const auto p = r.visible_means(r.hidden_probabilities(batch));
  EXPECT_TRUE((p.array() > 0).all() && (p.array() < 1).all());
}

TEST(Cd1, DivergenceRaises) {
  std::mt19937_64 rng(11);
  auto r = init_rbm<double>(6, 4, VisibleKind::Gaussian, rng);
  auto v = RbmVelocity<double>::zeros_like(r);
  const RowMatrix<double> batch = gaussian_rows(10, 6, 3) * 1e3;
  EXPECT_ERRC(
      for (int i = 0; i < 200; ++i) cd1_update(r, v, batch, CdStep{1e6, 0.9, 0.0}, rng), Errc::NonFiniteUpdate);
}

TEST(Pretrain, ShapeChain) {
  std::mt19937_64 rng(12);
  TrainHyper h;
  h.pretrain_epochs = 3;
  h.minibatch_size = 10;
  const auto data = gaussian_rows(100, 8, 4);
  const auto stack = pretrain_stack<double>(data, LayerSpec{{8, 4, 4, 4, 8}}, h, rng);
  ASSERT_EQ(stack.size(), 3u);
  EXPECT_EQ(stack[0].weights.rows(), 8);
  EXPECT_EQ(stack[0].weights.cols(), 4);
  EXPECT_EQ(stack[1].weights.rows(), 4);
  EXPECT_EQ(stack[2].weights.cols(), 4);
  EXPECT_EQ(stack[0].visible_kind, VisibleKind::Gaussian);
  EXPECT_EQ(stack[1].visible_kind, VisibleKind::Bernoulli);
  const auto p = stack[0].hidden_probabilities(data);
  EXPECT_TRUE((p.array() > 0).all() && (p.array() < 1).all());
}

TEST(Pretrain, ZeroEpochsGivesInitialisation) {
  TrainHyper h;
  h.pretrain_epochs = 0;
  std::mt19937_64 a(13), b(13);
  const auto stack = pretrain_stack<double>(gaussian_rows(50, 8, 5), LayerSpec{{8, 4, 4, 4, 8}}, h, a);
  EXPECT_EQ(stack[0], init_rbm<double>(8, 4, VisibleKind::Gaussian, b));
  EXPECT_EQ(stack[1], init_rbm<double>(4, 4, VisibleKind::Bernoulli, b));
  EXPECT_EQ(stack[2], init_rbm<double>(4, 4, VisibleKind::Bernoulli, b));
}

TEST(Unroll, CopiesRbmWeights) {
  std::mt19937_64 rng(14);
  TrainHyper h;
  h.pretrain_epochs = 2;
  h.minibatch_size = 20;
  const auto data = gaussian_rows(100, 8, 6);
  const auto stack = pretrain_stack<double>(data, LayerSpec{{8, 4, 4, 4, 8}}, h, rng);
  const auto net = unroll(stack, 8, rng);
  EXPECT_EQ(net.sizes(), (std::vector<std::size_t>{8, 4, 4, 4, 8}));
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_EQ(net.layers()[l].weights, stack[l].weights);
    EXPECT_EQ(net.layers()[l].bias, stack[l].hidden_bias);
  }
  EXPECT_TRUE(net.forward_batch(data.topRows(1)).allFinite());
}

// Windows of a normalized synthetic lead, corrupted by white noise, with the
// clean window as the target.
struct DenoiseToy {
  RowMatrix<float> x, y;
};

DenoiseToy denoise_toy(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.sampling_rate = 100;
  cfg.duration_seconds = 120;
  cfg.seed = seed;
  const auto rec = synth_ecg(cfg);
  const auto norm = normalize_for_training({rec.record.channel("MLII").samples}, rec.record.channel("MLII").samples, 100);
  const auto& s = norm.target;
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> g(0.0, 0.5);
  const Eigen::Index len = 50, rows = static_cast<Eigen::Index>((s.size() - len) / 10);
  DenoiseToy t{RowMatrix<float>(rows, len), RowMatrix<float>(rows, len)};
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index j = 0; j < len; ++j) {
      const double v = s[static_cast<std::size_t>(r * 10 + j)];
      t.y(r, j) = static_cast<float>(v);
      t.x(r, j) = static_cast<float>(v + g(rng));
    }
  return t;
}

TEST(Pretrain, BeatsRandomInitialisationOnMostSeeds) {
  TrainHyper h;  // default epochs and rates; a short run leaves both networks at the mean predictor
  h.minibatch_size = 20;
  int wins = 0;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    const auto toy = denoise_toy(100 + trial);
    const LayerSpec spec{{50, 64, 64, 64, 50}};
    h.rng_seed = trial;

    std::mt19937_64 rng(trial);
    auto pre = unroll(pretrain_stack<float>(toy.x, spec, h, rng), 50, rng);
    const double with = finetune(pre, toy.x, toy.y, h).train_mse.back();

    // Same initial distribution as an untrained stack.
    std::mt19937_64 rng2(trial);
    std::vector<Rbm<float>> fresh;
    for (std::size_t l = 0; l < 3; ++l)
      fresh.push_back(init_rbm<float>(spec.sizes[l], spec.sizes[l + 1],
                                      l == 0 ? VisibleKind::Gaussian : VisibleKind::Bernoulli, rng2));
    auto rnd = unroll(fresh, 50, rng2);
    const double without = finetune(rnd, toy.x, toy.y, h).train_mse.back();
    wins += with <= without;
  }
  EXPECT_GE(wins, 7);
}
