#pragma once

// Out-of-sample crash-prediction backtest: fit on events up to a split hour,
// score later events, and hold 1 ETH from t = 1 to the end of the ex-post
// window in the predicted-crash or predicted-noncrash portfolio.

#include "bubblescope/common.hpp"
#include "bubblescope/econometrics.hpp"
#include "bubblescope/events.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bubblescope::backtest {

enum class Portfolio { predicted_crash, predicted_noncrash };
std::string_view to_string(Portfolio p);

struct ModelFit {
  econ::ModelSpec spec = econ::ModelSpec::market_only;
  econ::RegressionResult fit;
  double train_median = 0.0;  // median in-sample fitted value
};

struct Predictions {
  std::vector<ModelFit> models;                             // market_only, market_plus_agent
  std::vector<std::size_t> test;                            // row indices with t0 > split
  std::vector<std::vector<std::optional<double>>> scores;   // [model][test position]
  std::size_t n_train = 0;
};

// Linear score x'beta of one event under a fitted specification; absent
// when a regressor is missing.
std::optional<double> score(const econ::RegressionResult& fit, econ::ModelSpec spec, const events::EventRow& row);

Predictions split_fit_predict(const std::vector<events::EventRow>& rows, HourIndex split_hour);

struct Trade {
  std::string event_id;
  HourIndex t0 = 0;
  double prediction = 0.0;
  double entry = 0.0;  // carried price at t = 1
  double exit = 0.0;   // carried price at the end of the ex-post window
  double pnl_eth = 0.0;
};

struct StrategyRun {
  econ::ModelSpec model = econ::ModelSpec::market_only;
  Portfolio portfolio = Portfolio::predicted_crash;
  std::vector<Trade> trades;    // calendar order of t0
  std::vector<double> cum_pnl;  // running sum of pnl_eth
  [[nodiscard]] double total() const { return cum_pnl.empty() ? 0.0 : cum_pnl.back(); }
};

struct BacktestResult {
  std::vector<StrategyRun> runs;  // per model: predicted_crash, predicted_noncrash
  Diagnostics diagnostics;
};

// Below the training median -> predicted_noncrash; at or above -> predicted_crash.
BacktestResult run_strategy(const Predictions& predictions, const std::vector<events::EventRow>& rows);

}  // namespace bubblescope::backtest
