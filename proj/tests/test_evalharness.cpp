#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "ecgdn/evalharness.hpp"
#include "oracles.hpp"

using namespace ecgdn;

namespace {

constexpr Interval kAll{0, SIZE_MAX};

AnnotationList beats(std::initializer_list<std::size_t> idx) { return oracle::beats_at(idx); }

std::vector<std::size_t> indices(const AnnotationList& a) {
  std::vector<std::size_t> v;
  for (const auto& b : a) v.push_back(b.sample_index);
  return v;
}

// Random sorted beat train with gaps drawn from [min_gap, max_gap].
AnnotationList random_beats(std::mt19937_64& rng, std::size_t count, std::size_t min_gap, std::size_t max_gap,
                            std::size_t first = 0) {
  std::uniform_int_distribution<std::size_t> gap(min_gap, max_gap);
  std::vector<std::size_t> v;
  std::size_t t = first;
  for (std::size_t k = 0; k < count; ++k) {
    t += gap(rng);
    v.push_back(t);
  }
  return oracle::beats_at(v);
}

}  // namespace

TEST(MatchBeats, WindowFromMilliseconds) {
  EXPECT_EQ(match_window_samples(150, 360), 54u);
  EXPECT_EQ(match_window_samples(150, 250), 38u);
  EXPECT_ERRC(match_window_samples(0, 360), Errc::InvalidConfig);
}

TEST(MatchBeats, IdenticalLists) {
  const auto a = beats({10, 400, 800, 1200});
  const auto m = match_beats(a, a, 54, kAll);
  EXPECT_EQ(m.tp, 4u);
  EXPECT_EQ(m.fp, 0u);
  EXPECT_EQ(m.fn, 0u);
}

TEST(MatchBeats, EmptyTest) {
  const auto m = match_beats(beats({100}), AnnotationList{}, 54, kAll);
  EXPECT_EQ(m.fn, 1u);
  EXPECT_EQ(m.tp, 0u);
}

TEST(MatchBeats, SmallExample) {
  const auto m = match_beats(beats({100, 200}), beats({148, 210}), 150.0, 360, kAll);
  EXPECT_EQ(m.tp, 2u);
  using P = std::pair<std::size_t, std::size_t>;
  EXPECT_EQ(m.pairs, (std::vector<P>{{0, 0}, {1, 1}}));
}

TEST(MatchBeats, NearestNeighbourWouldLoseAMatch) {
  // Pure nearest-first pairs 60 with 10 and leaves 0 with -50 out of reach.
  const auto m = match_beats(beats({50, 110}), beats({0, 60}), 54, kAll);
  EXPECT_EQ(m.tp, 2u);
  EXPECT_EQ(m.tp, oracle::max_matching({50, 110}, {0, 60}, 54, 0, SIZE_MAX));
}

TEST(MatchBeats, TiesGoToEarlierTest) {
  const auto m = match_beats(beats({100}), beats({90, 110}), 54, kAll);
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_EQ(m.pairs[0].second, 0u);
}

TEST(MatchBeats, SpanExcludesOutsideAnnotations) {
  const auto m = match_beats(beats({10, 500, 900}), beats({12, 905, 1500}), 54, Interval{100, 1000});
  EXPECT_EQ(m.tp, 1u);
  EXPECT_EQ(m.fn, 1u);
  EXPECT_EQ(m.fp, 0u);
}

TEST(MatchBeats, SwappingListsSwapsFpAndFn) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_beats(rng, 30, 20, 200), b = random_beats(rng, 25, 20, 240);
    const auto ab = match_beats(a, b, 54, kAll), ba = match_beats(b, a, 54, kAll);
    EXPECT_EQ(ab.tp, ba.tp);
    EXPECT_EQ(ab.fp, ba.fn);
    EXPECT_EQ(ab.fn, ba.fp);
  }
}

TEST(MatchBeats, SmallShiftsKeepAllMatches) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> shift(-26, 26);
  for (int trial = 0; trial < 100; ++trial) {
    const auto ref = random_beats(rng, 40, 60, 400, 100);
    std::vector<Annotation> moved;
    for (const auto& b : ref)
      moved.push_back({static_cast<std::size_t>(static_cast<long>(b.sample_index) + shift(rng)), b.label});
    const auto m = match_beats(ref, AnnotationList(moved), 54, kAll);
    EXPECT_EQ(m.tp, ref.size());
  }
}

TEST(MatchBeats, AgreesWithMaximumMatchingOracle) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> count(0, 25), lo(1, 30), span(30, 150);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto min_gap = lo(rng);
    const auto ref = random_beats(rng, count(rng), min_gap, min_gap + span(rng));
    const auto test = random_beats(rng, count(rng), min_gap, min_gap + span(rng));
    const std::size_t w = 54;
    const Interval sp{100, 1500};
    const auto m = match_beats(ref, test, w, sp);
    ASSERT_EQ(m.tp, oracle::max_matching(indices(ref), indices(test), w, sp.start, sp.end)) << trial;
    for (const auto& [ri, ti] : m.pairs) {
      const auto r = ref[ri].sample_index, t = test[ti].sample_index;
      ASSERT_LE(r > t ? r - t : t - r, w);
    }
  }
}

TEST(QrsStats, Formulas) {
  const auto a = qrs_stats(9, 1, 1);
  EXPECT_DOUBLE_EQ(*a.sensitivity, 0.9);
  EXPECT_DOUBLE_EQ(*a.positive_predictivity, 0.9);
  EXPECT_DOUBLE_EQ(*a.error_rate, 0.2);
  const auto b = qrs_stats(0, 0, 5);
  EXPECT_EQ(*b.sensitivity, 0.0);
  EXPECT_FALSE(b.positive_predictivity.has_value());
  EXPECT_EQ(*b.error_rate, 1.0);
  const auto c = qrs_stats(12, 0, 0);
  EXPECT_EQ(*c.sensitivity, 1.0);
  EXPECT_EQ(*c.positive_predictivity, 1.0);
  EXPECT_EQ(*c.error_rate, 0.0);
}

TEST(VebStats, WorkedExample) {
  using L = BeatLabel;
  std::vector<std::pair<L, L>> p{{L::Veb, L::Veb}, {L::Normal, L::Veb}};
  for (int i = 0; i < 8; ++i) p.emplace_back(L::Normal, L::Normal);
  const auto s = veb_stats(p, 0);
  EXPECT_EQ(s.counts, (VebCounts{1, 8, 1, 0}));
  EXPECT_DOUBLE_EQ(*s.sensitivity, 1.0);
  EXPECT_DOUBLE_EQ(*s.positive_predictivity, 0.5);
  EXPECT_DOUBLE_EQ(*s.false_positive_rate, 1.0 / 9.0);
  EXPECT_DOUBLE_EQ(*s.classification_rate, 0.9);
}

TEST(VebStats, FusionAndUnclassifiableNotFalsePositives) {
  using L = BeatLabel;
  const std::vector<std::pair<L, L>> p{{L::Fusion, L::Veb}, {L::Unclassifiable, L::Veb}, {L::Other, L::Veb}};
  EXPECT_EQ(veb_counts(p, 2), (VebCounts{0, 0, 1, 2}));
}

TEST(VebStats, AllNormal) {
  using L = BeatLabel;
  const std::vector<std::pair<L, L>> p(20, {L::Normal, L::Normal});
  const auto s = veb_stats(p, 0);
  EXPECT_FALSE(s.sensitivity.has_value());
  EXPECT_FALSE(s.positive_predictivity.has_value());
  EXPECT_EQ(*s.false_positive_rate, 0.0);
  EXPECT_EQ(*s.classification_rate, 1.0);
}

TEST(VebStats, BruteForceRecomputation) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> lab(0, 4), n(0, 40);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<BeatLabel, BeatLabel>> p;
    const int len = n(rng);
    for (int i = 0; i < len; ++i) p.emplace_back(static_cast<BeatLabel>(lab(rng)), static_cast<BeatLabel>(lab(rng)));
    const std::size_t missed = static_cast<std::size_t>(n(rng) % 4);
    std::size_t tp = 0, tn = 0, fp = 0, fn = missed;
    for (const auto& [r, t] : p) {
      const bool rv = r == BeatLabel::Veb, tv = t == BeatLabel::Veb;
      const bool excluded = r == BeatLabel::Fusion || r == BeatLabel::Unclassifiable;
      tp += rv && tv;
      fn += rv && !tv;
      fp += !rv && tv && !excluded;
      tn += !rv && !tv;
    }
    const auto s = veb_stats(p, missed);
    ASSERT_EQ(s.counts, (VebCounts{tp, tn, fp, fn}));
    if (tp + fn) { ASSERT_EQ(*s.sensitivity, static_cast<double>(tp) / static_cast<double>(tp + fn)); }
    if (tn + fp) { ASSERT_EQ(*s.false_positive_rate, static_cast<double>(fp) / static_cast<double>(tn + fp)); }
  }
}

TEST(VebStats, FromMatchCountsMissedVebs) {
  const AnnotationList ref({{100, BeatLabel::Veb}, {400, BeatLabel::Normal}, {700, BeatLabel::Veb}});
  const AnnotationList test({{102, BeatLabel::Veb}, {398, BeatLabel::Veb}});
  const auto m = match_beats(ref, test, 54, kAll);
  EXPECT_EQ(veb_counts(ref, test, m, kAll), (VebCounts{1, 0, 1, 1}));
}

TEST(RmseRatio, Endpoints) {
  const std::vector<double> clean{0, 1, 2, 3}, noisy{1, 0, 2, 5};
  const std::vector<bool> mask(4, true);
  EXPECT_EQ(rmse_ratio(clean, noisy, clean, mask), 0.0);
  EXPECT_EQ(rmse_ratio(clean, noisy, noisy, mask), 1.0);
}

TEST(RmseRatio, OnlyMaskedSamplesCount) {
  const std::vector<double> clean{0, 0, 0, 0}, noisy{2, 2, 100, 2}, den{1, 1, -50, 1};
  const std::vector<bool> mask{true, true, false, true};
  EXPECT_DOUBLE_EQ(rmse_ratio(clean, noisy, den, mask), 0.5);
}

TEST(RmseRatio, AffineInvariant) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<double> c(500), n(500), d(500);
  std::vector<bool> mask(500);
  for (std::size_t i = 0; i < 500; ++i) {
    c[i] = g(rng);
    n[i] = c[i] + g(rng);
    d[i] = c[i] + 0.3 * g(rng);
    mask[i] = i % 3 != 0;
  }
  const double base = rmse_ratio(c, n, d, mask);
  for (auto* v : {&c, &n, &d})
    for (auto& x : *v) x = 3.7 * x - 12.0;
  EXPECT_NEAR(rmse_ratio(c, n, d, mask), base, 1e-12);
}

TEST(RmseRatio, Errors) {
  const std::vector<double> a{1, 2, 3}, b{1, 2, 4};
  EXPECT_ERRC(rmse_ratio(a, b, a, std::vector<bool>(3, false)), Errc::EmptyMask);
  EXPECT_ERRC(rmse_ratio(a, a, b, std::vector<bool>(3, true)), Errc::ZeroDenominator);
  EXPECT_ERRC(rmse_ratio(a, b, a, std::vector<bool>(2, true)), Errc::LengthMismatch);
}

TEST(Report, AggregateSumsCounts) {
  EvalReport rep;
  rep.records.push_back({"a", 0.5, {90, 5, 10, std::nullopt}, {98, 1, 2, std::nullopt}});
  rep.records.push_back({"b", 0.3, {10, 5, 0, std::nullopt}, {10, 0, 0, std::nullopt}});
  const auto agg = rep.aggregate();
  EXPECT_EQ(agg.noisy.tp, 100u);
  EXPECT_EQ(agg.noisy.fp, 10u);
  EXPECT_EQ(agg.noisy.fn, 10u);
  EXPECT_DOUBLE_EQ(*agg.noisy.qrs().error_rate, 20.0 / 110.0);
  // Record-averaged error rate differs from the gross one.
  EXPECT_DOUBLE_EQ(*rep.record_average(false).error_rate, (15.0 / 100 + 5.0 / 10) / 2);
}

TEST(Report, KeyValueSchema) {
  EvalReport rep;
  rep.records.push_back({"r1", 0.25, {8, 0, 2, VebCounts{1, 5, 0, 1}}, {0, 0, 0, std::nullopt}});
  std::ostringstream kv, text;
  write_report_kv(kv, rep);
  write_report_text(text, rep);
  const auto s = kv.str();
  for (const char* key : {"record.r1.rmse_ratio=0.25\n", "record.r1.noisy.tp=8\n", "record.r1.noisy.error_rate=0.2000\n",
                          "record.r1.noisy.veb.sensitivity=0.5000\n", "record.r1.denoised.sensitivity=undefined\n",
                          "record.aggregate.noisy.fn=2\n"})
    EXPECT_NE(s.find(key), std::string::npos) << key;
  EXPECT_NE(text.str().find("denoised"), std::string::npos);
  EXPECT_NE(text.str().find("undefined"), std::string::npos);
}

TEST(EvalSpan, DefaultSkipsFirstFiveMinutes) {
  EXPECT_EQ(default_eval_span(1800 * 360, 360), (Interval{108000, 647640}));
  const auto tiny = default_eval_span(1000, 360);
  EXPECT_EQ(tiny.start, tiny.end);
}
