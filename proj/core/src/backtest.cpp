#include "bubblescope/backtest.hpp"

#include <algorithm>
#include <numeric>

namespace bubblescope::backtest {

std::string_view to_string(Portfolio p) {
  return p == Portfolio::predicted_crash ? "predicted_crash" : "predicted_noncrash";
}

std::optional<double> score(const econ::RegressionResult& fit, econ::ModelSpec spec, const events::EventRow& row) {
  const auto regs = econ::regressors_of(spec);
  double s = fit.beta.at(0);
  for (std::size_t j = 0; j < regs.size(); ++j) {
    const auto col = econ::event_column({row}, regs[j]);
    if (!col.values[0]) return std::nullopt;
    s += fit.beta.at(j + 1) * *col.values[0];
  }
  return s;
}

Predictions split_fit_predict(const std::vector<events::EventRow>& rows, HourIndex split_hour) {
  std::vector<events::EventRow> train;
  Predictions p;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].t0 <= split_hour)
      train.push_back(rows[i]);
    else
      p.test.push_back(i);
  }
  if (train.empty() || p.test.empty())
    throw Error("backtest split at " + format_utc_hour(split_hour) + " leaves an empty training or test sample");
  p.n_train = train.size();

  for (auto spec : {econ::ModelSpec::market_only, econ::ModelSpec::market_plus_agent}) {
    ModelFit m;
    m.spec = spec;
    m.fit = econ::crash_regression(train, spec);
    std::vector<double> fitted;
    for (const auto& r : train)
      if (auto s = score(m.fit, spec, r)) fitted.push_back(*s);
    std::sort(fitted.begin(), fitted.end());
    m.train_median = quantile_sorted(fitted, 0.5);
    std::vector<std::optional<double>> sc;
    for (auto i : p.test) sc.push_back(score(m.fit, spec, rows[i]));
    p.scores.push_back(std::move(sc));
    p.models.push_back(std::move(m));
  }
  return p;
}

BacktestResult run_strategy(const Predictions& predictions, const std::vector<events::EventRow>& rows) {
  BacktestResult out;
  std::vector<std::size_t> order(predictions.test.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = rows[predictions.test[a]];
    const auto& rb = rows[predictions.test[b]];
    return std::tie(ra.t0, ra.collection) < std::tie(rb.t0, rb.collection);
  });

  for (std::size_t m = 0; m < predictions.models.size(); ++m) {
    StrategyRun crash{predictions.models[m].spec, Portfolio::predicted_crash, {}, {}};
    StrategyRun calm{predictions.models[m].spec, Portfolio::predicted_noncrash, {}, {}};
    for (auto k : order) {
      const auto& row = rows[predictions.test[k]];
      const auto& s = predictions.scores[m][k];
      if (!s) {
        out.diagnostics.warn("backtest", "event " + row.id + " lacks regressors for " +
                                             std::string(econ::to_string(predictions.models[m].spec)));
        continue;
      }
      if (!(row.price_t1 > 0.0)) {
        out.diagnostics.warn("backtest", "event " + row.id + " has no carried price at t=1; skipped");
        continue;
      }
      Trade t{row.id, row.t0, *s, row.price_t1, row.price_t24, row.price_t24 / row.price_t1 - 1.0};
      auto& run = *s < predictions.models[m].train_median ? calm : crash;
      run.cum_pnl.push_back((run.cum_pnl.empty() ? 0.0 : run.cum_pnl.back()) + t.pnl_eth);
      run.trades.push_back(std::move(t));
    }
    out.runs.push_back(std::move(crash));
    out.runs.push_back(std::move(calm));
  }
  return out;
}

}  // namespace bubblescope::backtest
