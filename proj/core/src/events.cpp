#include "bubblescope/events.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace bubblescope::events {

std::string_view to_string(AccelerationVariant v) {
  return v == AccelerationVariant::trailing_minus_early ? "trailing_minus_early" : "late_minus_full";
}

AccelerationVariant parse_acceleration_variant(std::string_view s) {
  if (s == "trailing_minus_early") return AccelerationVariant::trailing_minus_early;
  if (s == "late_minus_full") return AccelerationVariant::late_minus_full;
  throw Error("unknown acceleration variant '" + std::string(s) + "'");
}

std::string event_id(const std::string& collection, HourIndex t0) { return collection + "@" + std::to_string(t0); }

std::string RunUpEvent::id() const { return event_id(collection, t0); }

double RunUpEvent::compounded(int from, int to) const {
  double g = 1.0;
  for (int t = from + 1; t <= to; ++t) g *= 1.0 + at(t).ret.value_or(0.0);
  return g - 1.0;
}

namespace {

RunUpEvent make_event(std::span<const panel::PanelRow> series, std::size_t i, const DetectParams& p) {
  RunUpEvent ev;
  ev.collection = series[i].collection;
  ev.t0 = series[i].hour;
  ev.half_window = p.half_window;
  const std::size_t begin = i - static_cast<std::size_t>(p.half_window);
  const std::size_t end = i + static_cast<std::size_t>(p.half_window) + 1;
  ev.window.assign(series.begin() + static_cast<std::ptrdiff_t>(begin), series.begin() + static_cast<std::ptrdiff_t>(end));
  ev.cumret.resize(ev.window.size());
  double g = 1.0;
  ev.cumret[0] = 0.0;
  for (std::size_t k = 1; k < ev.window.size(); ++k) {
    g *= 1.0 + ev.window[k].ret.value_or(0.0);
    ev.cumret[k] = g - 1.0;
  }
  for (const auto& r : ev.window) ev.volume_eth += r.volume;
  ev.ex_post_ret = ev.compounded(0, p.half_window);
  ev.crash = classify_crash(ev, p.crash_threshold);
  return ev;
}

std::vector<RunUpEvent> detect_collection(std::span<const panel::PanelRow> series, const DetectParams& p) {
  std::vector<RunUpEvent> out;
  const auto n = series.size();
  const auto w = static_cast<std::size_t>(p.half_window);
  const auto lb = static_cast<std::size_t>(p.lookback);
  const std::size_t first = std::max(w, lb);
  if (n < 2 * w + 1) return out;

  // Prefix sums of volume for the window-volume condition.
  std::vector<double> cum(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) cum[k + 1] = cum[k] + series[k].volume;

  std::size_t i = first;
  while (i + w < n) {
    const auto& now = series[i];
    const auto& then = series[i - lb];
    if (now.price && then.price && *now.price / *then.price - 1.0 >= p.runup_threshold &&
        cum[i + w + 1] - cum[i - w] >= p.min_volume_eth) {
      out.push_back(make_event(series, i, p));
      i += 2 * w + 1;  // next window must start after this one ends
    } else {
      ++i;
    }
  }
  return out;
}

}  // namespace

std::vector<RunUpEvent> detect_runups(const panel::Panel& panel, const DetectParams& params, int threads) {
  if (params.lookback <= 0 || params.half_window <= 0) throw Error("lookback and half_window must be positive");
  const auto collections = panel.collections();
  std::vector<std::vector<RunUpEvent>> parts(collections.size());
  parallel_for(collections.size(), threads,
               [&](std::size_t k) { parts[k] = detect_collection(panel.series(collections[k]), params); });
  std::vector<RunUpEvent> out;
  for (auto& part : parts) std::move(part.begin(), part.end(), std::back_inserter(out));
  return out;
}

bool classify_crash(const RunUpEvent& event, double threshold) {
  return event.compounded(0, event.half_window) < threshold;
}

void attach_activity(std::vector<RunUpEvent>& events, const ingest::TransferLog& log) {
  for (auto& ev : events) {
    std::unordered_set<std::string> wallets;
    const HourIndex lo = ev.t0 - ev.half_window;
    const HourIndex hi = ev.t0 + ev.half_window;
    for (auto i : log.indices_of(ev.collection)) {
      const auto& t = log[i];
      if (!t.is_trade()) continue;
      const auto h = t.hour();
      if (h < lo) continue;
      if (h > hi) break;
      wallets.insert(t.from);
      wallets.insert(t.to);
    }
    ev.active_wallets = wallets.size();
  }
}

namespace {

std::vector<double> rets_between(const RunUpEvent& ev, int from, int to) {
  std::vector<double> xs;
  for (int t = from; t <= to; ++t) xs.push_back(ev.at(t).ret.value_or(0.0));
  return xs;
}

std::optional<double> mean_turnover(const RunUpEvent& ev, int from, int to) {
  double s = 0.0;
  int n = 0;
  for (int t = from; t <= to; ++t) {
    const auto& tv = ev.at(t).turnover;
    if (!tv) return std::nullopt;
    s += *tv;
    ++n;
  }
  return n ? std::optional<double>(s / n) : std::nullopt;
}

}  // namespace

PredictorRow aggregate_predictors(const RunUpEvent& ev, AccelerationVariant variant) {
  const int w = ev.half_window;
  const int mid = -w / 2;
  PredictorRow p;
  // Returns t = -w+1 .. 0 make up the cumulative run-up over [-w, 0].
  p.volatility = sample_sd(rets_between(ev, -w + 1, 0));
  p.turnover = mean_turnover(ev, -w, 0);
  p.age_hours = ev.at(0).age_hours;
  const double full = ev.compounded(-w, 0);
  if (variant == AccelerationVariant::trailing_minus_early)
    p.acceleration = full - ev.compounded(-w, mid);
  else
    p.acceleration = ev.compounded(mid, 0) - full;
  return p;
}

ExPostLiquidity expost_liquidity(const RunUpEvent& ev) {
  const int w = ev.half_window;
  ExPostLiquidity out;
  out.turnover_post = mean_turnover(ev, 1, w);
  double vol = 0.0;
  for (int t = 1; t <= w; ++t) vol += ev.at(t).volume;
  if (vol > 0.0) out.amihud = std::abs(ev.ex_post_ret) / vol;
  out.volatility_post = sample_sd(rets_between(ev, 1, w));
  return out;
}

EventRow summarize(const RunUpEvent& ev, AccelerationVariant variant) {
  EventRow r;
  r.id = ev.id();
  r.collection = ev.collection;
  r.t0 = ev.t0;
  r.volume_eth = ev.volume_eth;
  r.active_wallets = ev.active_wallets;
  r.runup_ret = ev.cumret_at(0);
  r.ex_post_ret = ev.ex_post_ret;
  r.crash = ev.crash;
  r.price_t0 = ev.price_at(0);
  r.price_t1 = ev.price_at(1);
  r.price_t24 = ev.price_at(ev.half_window);
  r.predictors = aggregate_predictors(ev, variant);
  r.liquidity = expost_liquidity(ev);
  return r;
}

std::vector<EventRow> summarize(const std::vector<RunUpEvent>& events, AccelerationVariant variant) {
  std::vector<EventRow> out;
  out.reserve(events.size());
  for (const auto& ev : events) out.push_back(summarize(ev, variant));
  return out;
}

std::vector<RunUpEvent> rebuild_events(const panel::Panel& panel, const std::vector<EventRow>& rows,
                                       const DetectParams& params) {
  std::vector<RunUpEvent> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    auto series = panel.series(r.collection);
    if (series.empty()) throw Error("event " + r.id + " refers to a collection absent from the panel");
    const HourIndex off = r.t0 - series.front().hour;
    if (off < params.half_window || off + params.half_window >= static_cast<HourIndex>(series.size()))
      throw Error("event " + r.id + " window is outside the panel");
    auto ev = make_event(series, static_cast<std::size_t>(off), params);
    ev.active_wallets = r.active_wallets;
    out.push_back(std::move(ev));
  }
  return out;
}

std::vector<std::size_t> chronological_order(const std::vector<EventRow>& rows) {
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(rows[a].t0, rows[a].collection) < std::tie(rows[b].t0, rows[b].collection);
  });
  return order;
}

}  // namespace bubblescope::events
