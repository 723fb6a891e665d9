#include "bubblescope/backtest.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace bubblescope;
using namespace bubblescope::backtest;

namespace {

events::EventRow make_row(std::mt19937_64& rng, HourIndex t0, int i) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  events::EventRow r;
  r.collection = "c" + std::to_string(i % 7);
  r.t0 = t0;
  r.id = events::event_id(r.collection, t0);
  r.predictors.volatility = 0.1 + 0.05 * std::abs(z(rng));
  r.predictors.turnover = 1.0 + std::abs(z(rng));
  r.predictors.age_hours = 100.0 + 500.0 * u(rng);
  r.predictors.acceleration = z(rng);
  r.predictors.sophisticated_frac = 0.05 * u(rng);
  r.predictors.unique_owner_change = 0.1 * z(rng);
  r.predictors.wash_log_volume = 2.0 * u(rng);
  const double latent = 30.0 * (*r.predictors.volatility - 0.14) + 0.3 * z(rng);
  r.crash = latent > 0.0;
  r.price_t1 = 1.0;
  r.price_t24 = r.crash ? 0.5 : 1.1;
  r.ex_post_ret = r.price_t24 - 1.0;
  return r;
}

std::vector<events::EventRow> sample(std::uint64_t seed, int n, HourIndex split) {
  std::mt19937_64 rng(seed);
  std::vector<events::EventRow> rows;
  for (int i = 0; i < n; ++i) rows.push_back(make_row(rng, split - n + 2 * i, i));
  return rows;
}

const StrategyRun& run_of(const BacktestResult& r, econ::ModelSpec m, Portfolio p) {
  for (const auto& run : r.runs)
    if (run.model == m && run.portfolio == p) return run;
  throw std::runtime_error("missing run");
}

}  // namespace

TEST(Backtest, IdenticalEventsScoreIdentically) {
  auto rows = sample(1, 200, 10000);
  const auto fit = econ::crash_regression(rows, econ::ModelSpec::market_plus_agent);
  auto twin = rows[3];
  twin.id = "other";
  twin.collection = "zz";
  EXPECT_EQ(*score(fit, econ::ModelSpec::market_plus_agent, rows[3]),
            *score(fit, econ::ModelSpec::market_plus_agent, twin));
  twin.predictors.turnover.reset();
  EXPECT_FALSE(score(fit, econ::ModelSpec::market_plus_agent, twin).has_value());
}

TEST(Backtest, ThresholdIsThePerModelTrainingMedian) {
  const auto rows = sample(2, 300, 10000);
  const auto p = split_fit_predict(rows, 10000);
  ASSERT_EQ(p.models.size(), 2u);
  for (const auto& m : p.models) {
    std::vector<double> fitted;
    for (const auto& r : rows)
      if (r.t0 <= 10000) fitted.push_back(*score(m.fit, m.spec, r));
    std::sort(fitted.begin(), fitted.end());
    const auto n = fitted.size();
    const double median = n % 2 ? fitted[n / 2] : 0.5 * (fitted[n / 2 - 1] + fitted[n / 2]);
    EXPECT_NEAR(m.train_median, median, 1e-12);
  }
  EXPECT_EQ(p.n_train + p.test.size(), rows.size());
}

TEST(Backtest, SeparableSampleIsClassifiedAccurately) {
  const auto rows = sample(3, 600, 10000);
  const auto p = split_fit_predict(rows, 10000);
  const auto r = run_strategy(p, rows);
  std::size_t right = 0, total = 0;
  for (const auto& run : r.runs) {
    if (run.model != econ::ModelSpec::market_only) continue;
    for (const auto& t : run.trades) {
      const bool crash = std::find_if(rows.begin(), rows.end(), [&](const auto& e) { return e.id == t.event_id; })->crash;
      right += crash == (run.portfolio == Portfolio::predicted_crash);
      ++total;
    }
  }
  EXPECT_EQ(total, p.test.size());
  EXPECT_GT(static_cast<double>(right) / static_cast<double>(total), 0.9);
  EXPECT_LT(run_of(r, econ::ModelSpec::market_only, Portfolio::predicted_crash).total(),
            run_of(r, econ::ModelSpec::market_only, Portfolio::predicted_noncrash).total());
}

TEST(Backtest, FlatPricesGiveZeroPnl) {
  auto rows = sample(4, 200, 10000);
  for (auto& r : rows) r.price_t24 = r.price_t1 = 2.5;
  const auto r = run_strategy(split_fit_predict(rows, 10000), rows);
  for (const auto& run : r.runs)
    for (double c : run.cum_pnl) EXPECT_DOUBLE_EQ(c, 0.0);
}

TEST(Backtest, GainThenLossReturnsToZero) {
  auto rows = sample(5, 200, 10000);
  const auto p = split_fit_predict(rows, 10000);
  // Route the two test events of one portfolio to a +50% and a -50% hold.
  const auto r0 = run_strategy(p, rows);
  const auto& calm = run_of(r0, econ::ModelSpec::market_only, Portfolio::predicted_noncrash);
  ASSERT_GE(calm.trades.size(), 2u);
  std::vector<events::EventRow> edited = rows;
  for (std::size_t k = 0; k < calm.trades.size(); ++k)
    for (auto& e : edited)
      if (e.id == calm.trades[k].event_id) {
        e.price_t1 = 1.0;
        e.price_t24 = k == 0 ? 1.5 : (k == 1 ? 0.5 : 1.0);
      }
  const auto r1 = run_strategy(p, edited);
  const auto& run = run_of(r1, econ::ModelSpec::market_only, Portfolio::predicted_noncrash);
  EXPECT_DOUBLE_EQ(run.cum_pnl[0], 0.5);
  EXPECT_DOUBLE_EQ(run.cum_pnl[1], 0.0);
  EXPECT_DOUBLE_EQ(run.total(), 0.0);
}

TEST(Backtest, EmptySideOfTheSplitThrows) {
  const auto rows = sample(6, 100, 10000);
  EXPECT_THROW(split_fit_predict(rows, 100), Error);
  EXPECT_THROW(split_fit_predict(rows, 1000000), Error);
}

TEST(Backtest, EventsWithoutEntryPriceAreSkippedWithWarning) {
  auto rows = sample(7, 200, 10000);
  for (auto& r : rows)
    if (r.t0 > 10000) r.price_t1 = 0.0;
  const auto r = run_strategy(split_fit_predict(rows, 10000), rows);
  for (const auto& run : r.runs) EXPECT_TRUE(run.trades.empty());
  EXPECT_FALSE(r.diagnostics.empty());
}
