#pragma once

// Run-up detection, crash labelling and event-level predictors.

#include "bubblescope/common.hpp"
#include "bubblescope/ingest.hpp"
#include "bubblescope/panel.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bubblescope::events {

// Which definition of price acceleration to compute.
//   trailing_minus_early: R[-24,0] - R[-24,-12]   (default)
//   late_minus_full:      R[-12,0] - R[-24,0]
enum class AccelerationVariant { trailing_minus_early, late_minus_full };

std::string_view to_string(AccelerationVariant v);
AccelerationVariant parse_acceleration_variant(std::string_view s);

struct DetectParams {
  double runup_threshold = 1.00;  // cumulative return over the lookback
  int lookback = 24;              // hours
  double min_volume_eth = 10.0;   // over the whole event window
  int half_window = 24;           // event window is [-half_window, +half_window]
  double crash_threshold = -0.40;
};

struct RunUpEvent {
  std::string collection;
  HourIndex t0 = 0;
  int half_window = 24;
  std::vector<panel::PanelRow> window;  // event time -half_window .. +half_window
  std::vector<double> cumret;           // compounded from rets, cumret(-half_window) = 0
  double volume_eth = 0.0;
  std::size_t active_wallets = 0;
  double ex_post_ret = 0.0;
  bool crash = false;

  [[nodiscard]] std::string id() const;
  [[nodiscard]] const panel::PanelRow& at(int t) const { return window.at(static_cast<std::size_t>(t + half_window)); }
  [[nodiscard]] double price_at(int t) const { return at(t).price.value(); }
  [[nodiscard]] double cumret_at(int t) const { return cumret.at(static_cast<std::size_t>(t + half_window)); }
  // Compounded return over (from, to]: prod_{t=from+1..to} (1 + ret(t)) - 1.
  [[nodiscard]] double compounded(int from, int to) const;
};

std::string event_id(const std::string& collection, HourIndex t0);

// Greedy earliest-first scan per collection. An hour qualifies when its
// trailing cumulative return reaches the threshold, its full window lies in
// the sample and the window volume reaches the floor; qualifying hours whose
// window would overlap an already selected event are skipped.
// Output sorted by (collection, t0).
std::vector<RunUpEvent> detect_runups(const panel::Panel& panel, const DetectParams& params = {}, int threads = 1);

bool classify_crash(const RunUpEvent& event, double threshold = -0.40);

// Counts distinct trading wallets inside each event window.
void attach_activity(std::vector<RunUpEvent>& events, const ingest::TransferLog& log);

struct PredictorRow {
  std::optional<double> volatility;
  std::optional<double> turnover;
  std::optional<double> age_hours;
  std::optional<double> acceleration;
  // Filled by the agent and wash-trading stages.
  std::optional<double> sophisticated_frac;
  std::optional<double> unique_owner_change;
  std::optional<double> wash_log_volume;
};

PredictorRow aggregate_predictors(const RunUpEvent& event,
                                  AccelerationVariant variant = AccelerationVariant::trailing_minus_early);

struct ExPostLiquidity {
  std::optional<double> turnover_post;
  std::optional<double> amihud;  // absent when ex-post volume is zero
  double volatility_post = 0.0;
};

ExPostLiquidity expost_liquidity(const RunUpEvent& event);

// Flat per-event record: what events.csv carries and what the regression and
// backtest stages consume.
struct EventRow {
  std::string id;
  std::string collection;
  HourIndex t0 = 0;
  double volume_eth = 0.0;
  std::size_t active_wallets = 0;
  double runup_ret = 0.0;  // cumret at t = 0
  double ex_post_ret = 0.0;
  bool crash = false;
  double price_t0 = 0.0;
  double price_t1 = 0.0;
  double price_t24 = 0.0;  // end of the ex-post window
  PredictorRow predictors;
  ExPostLiquidity liquidity;
};

EventRow summarize(const RunUpEvent& event, AccelerationVariant variant = AccelerationVariant::trailing_minus_early);
std::vector<EventRow> summarize(const std::vector<RunUpEvent>& events,
                                AccelerationVariant variant = AccelerationVariant::trailing_minus_early);

// Rebuilds the event windows for already-detected (collection, t0) pairs,
// e.g. after reading events.csv back.
std::vector<RunUpEvent> rebuild_events(const panel::Panel& panel, const std::vector<EventRow>& rows,
                                       const DetectParams& params = {});

// Events sorted by (t0, collection).
std::vector<std::size_t> chronological_order(const std::vector<EventRow>& rows);

}  // namespace bubblescope::events
