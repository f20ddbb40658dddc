#pragma once

// Independent reference implementations used to check the library. They are
// written for clarity, not speed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "ecgdn/errors.hpp"
#include "ecgdn/records.hpp"

namespace oracle {

// Mean over the truncated centered window [i - w/2, i + (w - 1 - w/2)].
inline std::vector<double> moving_average(const std::vector<double>& x, std::size_t w) {
  const long long n = static_cast<long long>(x.size());
  const long long left = static_cast<long long>(w / 2);
  const long long right = static_cast<long long>(w) - 1 - left;
  std::vector<double> out(x.size());
  for (long long i = 0; i < n; ++i) {
    double s = 0;
    int c = 0;
    for (long long j = std::max(0LL, i - left); j <= std::min(n - 1, i + right); ++j) {
      s += x[static_cast<std::size_t>(j)];
      ++c;
    }
    out[static_cast<std::size_t>(i)] = s / c;
  }
  return out;
}

// Median of the truncated centered window of odd width (w rounded up to odd).
inline std::vector<double> running_median(const std::vector<double>& x, std::size_t w) {
  if (w % 2 == 0) ++w;
  const long long n = static_cast<long long>(x.size());
  const long long half = static_cast<long long>(w / 2);
  std::vector<double> out(x.size());
  for (long long i = 0; i < n; ++i) {
    std::vector<double> win(x.begin() + std::max(0LL, i - half), x.begin() + std::min(n, i + half + 1));
    std::sort(win.begin(), win.end());
    const auto m = win.size();
    out[static_cast<std::size_t>(i)] = m % 2 ? win[m / 2] : 0.5 * (win[m / 2 - 1] + win[m / 2]);
  }
  return out;
}

// Maximum bipartite matching (Kuhn's augmenting paths) between reference and
// test beats closer than `window` samples, restricted to [start, end).
inline std::size_t max_matching(const std::vector<std::size_t>& ref, const std::vector<std::size_t>& test,
                                std::size_t window, std::size_t start, std::size_t end) {
  std::vector<std::size_t> r, t;
  for (auto v : ref)
    if (v >= start && v < end) r.push_back(v);
  for (auto v : test)
    if (v >= start && v < end) t.push_back(v);
  std::vector<int> owner(t.size(), -1);
  std::function<bool(std::size_t, std::vector<bool>&)> augment = [&](std::size_t i, std::vector<bool>& seen) {
    for (std::size_t j = 0; j < t.size(); ++j) {
      const auto d = r[i] > t[j] ? r[i] - t[j] : t[j] - r[i];
      if (d > window || seen[j]) continue;
      seen[j] = true;
      if (owner[j] < 0 || augment(static_cast<std::size_t>(owner[j]), seen)) {
        owner[j] = static_cast<int>(i);
        return true;
      }
    }
    return false;
  };
  std::size_t count = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    std::vector<bool> seen(t.size(), false);
    if (augment(i, seen)) ++count;
  }
  return count;
}

// Membership of sample t in the on/off schedule, by modular arithmetic.
inline bool scheduled_on(std::size_t t, std::size_t lead, std::size_t on, std::size_t off) {
  return t >= lead && (t - lead) % (on + off) < on;
}

inline ecgdn::AnnotationList beats_at(const std::vector<std::size_t>& idx,
                                      ecgdn::BeatLabel label = ecgdn::BeatLabel::Normal) {
  std::vector<ecgdn::Annotation> a;
  for (auto i : idx) a.push_back({i, label});
  return ecgdn::AnnotationList(std::move(a));
}

}  // namespace oracle

#define EXPECT_ERRC(stmt, expected)                                      \
  do {                                                               \
    try {                                                            \
      stmt;                                                          \
      ADD_FAILURE() << "expected " << ecgdn::to_string(expected);        \
    } catch (const ecgdn::Error& e) {                                \
      EXPECT_EQ(e.code(), expected) << e.what();                         \
    }                                                                \
  } while (0)
