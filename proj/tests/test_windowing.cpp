#include <random>

#include <gtest/gtest.h>

#include "ecgdn/windowing.hpp"
#include "oracles.hpp"

using namespace ecgdn;

namespace {

std::vector<double> ramp(std::size_t n, double scale = 1.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = scale * static_cast<double>(i);
  return x;
}

WindowConfig one_channel_config(std::size_t seconds) {
  WindowConfig c;
  c.target_channel_name = "t";
  c.input_channel_names = {"a"};
  c.segment_seconds = seconds;
  return c;
}

}  // namespace

TEST(SegmentLength, TableDriven) {
  struct Case {
    bool uses_target;
    std::size_t others;
    std::size_t samples;
  } cases[] = {{true, 1, 360}, {true, 2, 360}, {false, 1, 720}, {false, 2, 720}, {true, 0, 1080}};
  for (const auto& c : cases) EXPECT_EQ(segment_length_for(c.uses_target, c.others, 360), c.samples);
  EXPECT_ERRC(segment_length_for(false, 0, 360), Errc::NoInputChannels);
}

TEST(WindowConfig, MakePutsTargetFirst) {
  const auto c = WindowConfig::make("V5", {"MLII", "V5", "V1"});
  EXPECT_EQ(c.input_channel_names, (std::vector<std::string>{"V5", "MLII", "V1"}));
  EXPECT_EQ(c.segment_seconds, 1u);
  EXPECT_EQ(WindowConfig::make("V5", {"MLII"}).segment_seconds, 2u);
  EXPECT_EQ(WindowConfig::make("V5", {"V5"}).segment_seconds, 3u);
}

TEST(WindowConfig, RejectsInconsistentSegmentLength) {
  auto c = WindowConfig::make("V5", {"V5"});
  c.segment_seconds = 1;
  EXPECT_ERRC(c.validate(360), Errc::InvalidConfig);
  c.segment_seconds = 3;
  EXPECT_NO_THROW(c.validate(360));
  c.train_stride_samples = 0;
  EXPECT_ERRC(c.validate(360), Errc::InvalidConfig);
}

TEST(TrainingPairs, CountWithFullMask) {
  // 1000 samples, 360-sample windows, stride 5: floor(640 / 5) + 1.
  auto c = one_channel_config(1);
  const auto x = ramp(1000);
  const auto ds = make_training_pairs<double>({x}, x, c, 360, std::vector<bool>(1000, true));
  EXPECT_EQ(ds.size(), 129u);
  EXPECT_EQ(ds.inputs.rows(), 129);
  EXPECT_EQ(ds.targets.rows(), 129);
  EXPECT_EQ(ds.inputs.cols(), 360);
  for (std::size_t k = 1; k < ds.positions.size(); ++k) EXPECT_EQ(ds.positions[k] - ds.positions[k - 1], 5u);
  EXPECT_EQ(ds.inputs(3, 7), x[ds.positions[3] + 7]);
}

TEST(TrainingPairs, EmptyMaskRejected) {
  auto c = one_channel_config(1);
  const auto x = ramp(1000);
  EXPECT_ERRC(make_training_pairs<double>({x}, x, c, 360, std::vector<bool>(1000, false)),
              Errc::NoEligibleSegments);
}

TEST(TrainingPairs, NoWindowTouchesMaskedSamples) {
  auto c = one_channel_config(1);
  const auto x = ramp(1000);
  std::vector<bool> allowed(1000, true);
  std::fill(allowed.begin() + 500, allowed.begin() + 600, false);
  const auto ds = make_training_pairs<double>({x}, x, c, 100, allowed);
  // Brute force: every stride position either appears (clean) or touches the block.
  std::size_t expected = 0;
  for (std::size_t p = 0; p + 100 <= 1000; p += 5) {
    bool clean = true;
    for (std::size_t t = p; t < p + 100; ++t) clean = clean && allowed[t];
    const bool emitted = std::find(ds.positions.begin(), ds.positions.end(), p) != ds.positions.end();
    EXPECT_EQ(clean, emitted) << p;
    expected += clean;
  }
  EXPECT_EQ(ds.size(), expected);
}

TEST(TrainingPairs, CountMonotoneAsMaskShrinks) {
  std::mt19937 rng(4);
  std::vector<bool> allowed(2000, true);
  std::size_t previous = eligible_positions(allowed, 50, 5).size();
  for (int step = 0; step < 60; ++step) {
    std::uniform_int_distribution<std::size_t> at(0, 1999);
    allowed[at(rng)] = false;
    const auto n = eligible_positions(allowed, 50, 5).size();
    EXPECT_LE(n, previous);
    previous = n;
  }
}

TEST(TrainingPairs, ChannelBlocksInConfigOrder) {
  WindowConfig c = WindowConfig::make("t", {"t", "o"});
  const auto t = ramp(40), o = ramp(40, -1.0);
  const auto ds = make_training_pairs<double>({t, o}, t, c, 10, std::vector<bool>(40, true));
  ASSERT_EQ(ds.inputs.cols(), 20);
  EXPECT_EQ(ds.inputs(1, 0), t[5]);
  EXPECT_EQ(ds.inputs(1, 10), o[5]);
  EXPECT_EQ(ds.targets(1, 9), t[14]);
}

TEST(Reconstruction, SingleSegmentSpan) {
  EXPECT_EQ(reconstruction_positions(40, 400, 360, 16), (std::vector<std::size_t>{40}));
}

TEST(Reconstruction, LastWindowClamped) {
  const auto p = reconstruction_positions(0, 1000, 360, 16);
  ASSERT_EQ(p.size(), 41u);
  EXPECT_EQ(p[39], 624u);
  EXPECT_EQ(p.back(), 640u);
  // Coverage by enumeration.
  std::vector<int> cover(1000, 0);
  for (auto s : p)
    for (std::size_t t = s; t < s + 360; ++t) ++cover[t];
  for (int c : cover) EXPECT_GT(c, 0);
}

TEST(Reconstruction, SpanTooShort) {
  EXPECT_ERRC(reconstruction_positions(0, 359, 360, 16), Errc::SpanTooShort);
}

TEST(Reconstruction, SegmentsUseAbsolutePositions) {
  auto c = one_channel_config(1);
  const auto x = ramp(300);
  const auto segs = make_reconstruction_segments<double>({x}, c, 50, 100, 200);
  EXPECT_EQ(segs.positions.front(), 100u);
  EXPECT_EQ(segs.positions.back(), 150u);
  EXPECT_EQ(segs.inputs(0, 0), 100.0);
}

TEST(OverlapAverage, TwoConstantWindows) {
  RowMatrix<double> out(2, 4);
  out.row(0).setConstant(1.0);
  out.row(1).setConstant(3.0);
  const std::vector<std::size_t> pos{0, 0};
  const auto r = overlap_average(out, pos, 4);
  for (double v : r.samples) EXPECT_EQ(v, 2.0);
}

TEST(OverlapAverage, SingleWindowVerbatimAndUncoveredNaN) {
  RowMatrix<double> out(1, 3);
  out << 1, 2, 3;
  const std::vector<std::size_t> pos{2};
  const auto r = overlap_average(out, pos, 6);
  EXPECT_TRUE(std::isnan(r.samples[0]) && std::isnan(r.samples[5]));
  EXPECT_FALSE(r.covered[1]);
  EXPECT_EQ(r.samples[2], 1.0);
  EXPECT_EQ(r.samples[4], 3.0);
  EXPECT_TRUE(r.covered[4]);
}

TEST(OverlapAverage, InteriorGapRejected) {
  RowMatrix<double> out(2, 3);
  out.setOnes();
  const std::vector<std::size_t> pos{0, 5};
  EXPECT_ERRC(overlap_average(out, pos, 10), Errc::CoverageGap);
}

TEST(OverlapAverage, ExactSlicesReproduceSignal) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  std::vector<double> master(5000);
  for (auto& v : master) v = g(rng);
  for (std::size_t stride : {1u, 5u, 16u, 99u, 360u}) {
    const auto pos = reconstruction_positions(0, master.size(), 360, stride);
    RowMatrix<double> out(static_cast<Eigen::Index>(pos.size()), 360);
    for (std::size_t k = 0; k < pos.size(); ++k)
      for (std::size_t j = 0; j < 360; ++j) out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = master[pos[k] + j];
    const auto r = overlap_average(out, pos, master.size());
    for (std::size_t t = 0; t < master.size(); ++t) ASSERT_NEAR(r.samples[t], master[t], 1e-12);
  }
}
