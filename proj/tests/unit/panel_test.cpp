#include "support.hpp"

#include "bubblescope/panel.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace bubblescope;
using namespace bubblescope::panel;
using bstest::at_hour;
using bstest::LogBuilder;

TEST(Panel, MeanPriceVolumeAndSalesPerHour) {
  LogBuilder b;
  b.mint("c", "1", "a", at_hour(0)).mint("c", "2", "a", at_hour(0, 1));
  b.trade("c", "1", "a", "x", 1.0, at_hour(1, 5)).trade("c", "2", "a", "y", 3.0, at_hour(1, 9));
  const auto p = build_panel(b.build()).panel;
  const auto* row = p.at("c", bstest::kStart / 3600 + 1);
  ASSERT_NE(row, nullptr);
  EXPECT_DOUBLE_EQ(*row->price, 2.0);
  EXPECT_DOUBLE_EQ(row->volume, 4.0);
  EXPECT_DOUBLE_EQ(row->sales, 2.0);
}

TEST(Panel, IdleHourCarriesPriceWithZeroReturn) {
  LogBuilder b;
  b.mint("c", "1", "a", at_hour(0));
  b.trade("c", "1", "a", "x", 2.0, at_hour(1)).trade("c", "1", "x", "y", 2.5, at_hour(3));
  const auto p = build_panel(b.build()).panel;
  const auto s = p.series("c");
  ASSERT_EQ(s.size(), 4u);
  EXPECT_DOUBLE_EQ(*s[2].price, 2.0);
  EXPECT_DOUBLE_EQ(*s[2].ret, 0.0);
  EXPECT_DOUBLE_EQ(s[2].sales, 0.0);
  EXPECT_DOUBLE_EQ(s[2].volume, 0.0);
  EXPECT_DOUBLE_EQ(*s[3].ret, 0.25);
  EXPECT_FALSE(s[0].price.has_value());
}

TEST(Panel, TurnoverIsSalesOverSupplyInPercent) {
  LogBuilder b;
  for (int i = 0; i < 10; ++i) b.mint("c", std::to_string(i), "m", at_hour(0, i));
  for (int i = 0; i < 5; ++i) b.trade("c", std::to_string(i), "m", "w" + std::to_string(i), 1.0, at_hour(1, i));
  const auto s = build_panel(b.build()).panel.series("c");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s[0].supply, 10.0);
  EXPECT_DOUBLE_EQ(s[0].minted, 10.0);
  EXPECT_DOUBLE_EQ(*s[1].turnover, 5.0 / 10.0 * 100.0);
}

TEST(Panel, TradesWithoutMintsLeaveTurnoverAbsentAndWarn) {
  LogBuilder b;
  b.trade("c", "1", "a", "b", 1.0, at_hour(0));
  const auto built = build_panel(b.build());
  EXPECT_FALSE(built.panel.series("c")[0].turnover.has_value());
  EXPECT_FALSE(built.diagnostics.empty());
}

TEST(Panel, RowInvariantsOnRandomLogs) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    LogBuilder b;
    for (int c = 0; c < 3; ++c) {
      const std::string coll = "c" + std::to_string(c);
      for (int i = 0; i < 5; ++i) b.mint(coll, std::to_string(i), "m", at_hour(static_cast<HourIndex>(rng() % 30), i));
      for (int i = 0; i < 40; ++i)
        b.trade(coll, std::to_string(rng() % 5), "m", "w", 0.1 + static_cast<double>(rng() % 100) / 10.0,
                at_hour(static_cast<HourIndex>(rng() % 60), i));
    }
    const auto p = build_panel(b.build()).panel;
    for (const auto& coll : p.collections()) {
      const auto s = p.series(coll);
      for (std::size_t k = 0; k < s.size(); ++k) {
        EXPECT_GE(s[k].volume, 0.0);
        EXPECT_GE(s[k].sales, 0.0);
        if (s[k].turnover) EXPECT_GE(*s[k].turnover, 0.0);
        if (s[k].sales > 0) EXPECT_GT(s[k].price.value_or(0.0), 0.0);
        if (k > 0) {
          EXPECT_GE(s[k].supply, s[k - 1].supply);
          EXPECT_DOUBLE_EQ(s[k].age_hours - s[k - 1].age_hours, 1.0);
          EXPECT_EQ(s[k].hour, s[k - 1].hour + 1);
        }
      }
    }
  }
}

TEST(Panel, ThreadCountDoesNotChangeThePanel) {
  LogBuilder b;
  std::mt19937_64 rng(5);
  for (int c = 0; c < 12; ++c)
    for (int i = 0; i < 50; ++i)
      b.trade("c" + std::to_string(c), std::to_string(i % 7), "a", "b", 1.0 + static_cast<double>(rng() % 9),
              at_hour(static_cast<HourIndex>(rng() % 100), i));
  const auto log = b.build();
  EXPECT_TRUE(build_panel(log, 1).panel == build_panel(log, 8).panel);
}

namespace {

Panel single_variable_panel(const std::vector<double>& volumes) {
  std::vector<PanelRow> rows;
  for (std::size_t i = 0; i < volumes.size(); ++i) {
    PanelRow r;
    r.collection = "c";
    r.hour = static_cast<HourIndex>(i);
    r.volume = volumes[i];
    r.age_hours = static_cast<double>(i);
    rows.push_back(r);
  }
  return Panel(std::move(rows));
}

// Nearest-rank order statistic at p of the sorted sample.
double order_statistic(std::vector<double> xs, double p) {
  std::sort(xs.begin(), xs.end());
  const double h = (static_cast<double>(xs.size()) - 1.0) * p;
  return xs[static_cast<std::size_t>(std::llround(std::floor(h + 0.5)))];
}

}  // namespace

TEST(Winsorize, OneToHundredClipsNearOnePercentTails) {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  std::vector<double> shuffled = v;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(1));
  const auto w = winsorize(single_variable_panel(shuffled), 0.01);
  double lo = 1e9, hi = -1e9;
  for (const auto& r : w.panel.rows()) {
    lo = std::min(lo, r.volume);
    hi = std::max(hi, r.volume);
  }
  EXPECT_DOUBLE_EQ(lo, order_statistic(v, 0.01));
  EXPECT_DOUBLE_EQ(hi, order_statistic(v, 0.99));
  EXPECT_NEAR(lo, 1.99, 0.02);
  EXPECT_NEAR(hi, 99.01, 0.02);
}

TEST(Winsorize, ConstantColumnUnchanged) {
  const auto p = single_variable_panel(std::vector<double>(200, 3.5));
  const auto w = winsorize(p, 0.01);
  for (const auto& r : w.panel.rows()) EXPECT_DOUBLE_EQ(r.volume, 3.5);
}

TEST(Winsorize, LevelZeroIsIdentity) {
  std::vector<double> v;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 300; ++i) v.push_back(std::ldexp(static_cast<double>(rng() % 1000), static_cast<int>(rng() % 20)));
  const auto p = single_variable_panel(v);
  EXPECT_TRUE(winsorize(p, 0.0).panel == p);
}

TEST(Winsorize, IsIdempotentAndBounded) {
  std::vector<double> v;
  std::mt19937_64 rng(9);
  std::lognormal_distribution<double> d(0.0, 2.0);
  for (int i = 0; i < 1000; ++i) v.push_back(d(rng));
  const auto once = winsorize(single_variable_panel(v), 0.05).panel;
  const auto twice = winsorize(once, 0.05).panel;
  EXPECT_TRUE(once == twice);
  const double lo = order_statistic(v, 0.05), hi = order_statistic(v, 0.95);
  for (const auto& r : once.rows()) {
    EXPECT_GE(r.volume, lo);
    EXPECT_LE(r.volume, hi);
  }
}

TEST(Winsorize, TooFewObservationsWarnsAndSkips) {
  const auto p = single_variable_panel({1, 2, 3, 1000});
  const auto w = winsorize(p, 0.01);
  EXPECT_FALSE(w.applied);
  EXPECT_FALSE(w.diagnostics.empty());
  EXPECT_TRUE(w.panel == p);
}

TEST(Stats, SingleRowHasZeroSpread) {
  const auto s = summary_stats(single_variable_panel({4.25}));
  const auto it = std::find_if(s.rows.begin(), s.rows.end(), [](const auto& r) { return r.variable == Variable::volume; });
  ASSERT_NE(it, s.rows.end());
  EXPECT_DOUBLE_EQ(it->mean, 4.25);
  EXPECT_DOUBLE_EQ(it->min, 4.25);
  EXPECT_DOUBLE_EQ(it->max, 4.25);
  EXPECT_DOUBLE_EQ(it->sd, 0.0);
  EXPECT_EQ(it->n, 1u);
}

TEST(Stats, MatchesDirectComputation) {
  std::vector<double> v;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> d(0.92, 0.3);
  for (int i = 0; i < 5000; ++i) v.push_back(d(rng));
  const auto s = summary_stats(single_variable_panel(v));
  const auto it = std::find_if(s.rows.begin(), s.rows.end(), [](const auto& r) { return r.variable == Variable::volume; });
  double sum = 0, sq = 0;
  for (double x : v) sum += x;
  const double m = sum / static_cast<double>(v.size());
  for (double x : v) sq += (x - m) * (x - m);
  EXPECT_NEAR(it->mean, m, 1e-12);
  EXPECT_NEAR(it->sd, std::sqrt(sq / static_cast<double>(v.size() - 1)), 1e-12);
  EXPECT_NEAR(it->mean, 0.92, 0.02);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_DOUBLE_EQ(it->min, sorted.front());
  EXPECT_DOUBLE_EQ(it->max, sorted.back());
}

TEST(Stats, EmptyPanelThrows) { EXPECT_THROW(summary_stats(Panel{}), Error); }
