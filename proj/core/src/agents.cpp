#include "bubblescope/agents.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <unordered_set>

namespace bubblescope::agents {

namespace {

template <typename F>
void for_trades_between(const ingest::TransferLog& log, const std::string& collection, HourIndex lo, HourIndex hi,
                        F&& f) {
  const auto& idx = log.indices_of(collection);
  auto it = std::lower_bound(idx.begin(), idx.end(), hour_start(lo),
                             [&](std::size_t i, Timestamp ts) { return log[i].ts < ts; });
  for (; it != idx.end(); ++it) {
    const auto& t = log[*it];
    if (t.hour() > hi) break;
    if (t.is_trade()) f(t);
  }
}

}  // namespace

std::map<std::string, WalletProfit> event_agent_profits(const events::RunUpEvent& event,
                                                        const ingest::TransferLog& log) {
  const int w = event.half_window;
  const double basis = event.at(-w).price.value_or(0.0);
  const auto& end_row = event.at(w);
  const double mark = end_row.price.value_or(0.0);

  std::map<std::string, WalletProfit> out;
  std::map<std::string, std::map<std::string, int>> held;  // wallet -> token -> in-window buys not yet sold
  for_trades_between(log, event.collection, event.t0 - w, event.t0 + w, [&](const ingest::Transfer& t) {
    auto& buyer = out[t.to];
    buyer.cost += t.price_eth;
    ++buyer.n_buys;
    auto& seller = out[t.from];
    seller.proceeds += t.price_eth;
    ++seller.n_sells;
    auto& seller_held = held[t.from];
    if (auto it = seller_held.find(t.token); it != seller_held.end() && it->second > 0) {
      --it->second;
    } else {
      seller.cost += basis;
    }
    ++held[t.to][t.token];
  });
  for (const auto& [wallet, tokens] : held) {
    int n = 0;
    for (const auto& [token, count] : tokens) n += count;
    if (n == 0) continue;
    auto& p = out[wallet];
    p.proceeds += n * mark;
    if (!end_row.traded) p.marked_at_carried = true;
  }
  for (auto it = out.begin(); it != out.end();) {
    if (it->second.cost <= 0.0) {
      it = out.erase(it);
    } else {
      it->second.profit_pct = (it->second.proceeds - it->second.cost) / it->second.cost;
      ++it;
    }
  }
  return out;
}

std::vector<std::set<std::string>> sophistication_flags(const std::vector<EventParticipation>& participations,
                                                        const SophisticationParams& params) {
  std::vector<std::size_t> order(participations.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(participations[a].t0, participations[a].collection) <
           std::tie(participations[b].t0, participations[b].collection);
  });

  std::vector<std::set<std::string>> flags(participations.size());
  std::unordered_map<std::string, std::vector<double>> history;
  std::size_t g = 0;
  while (g < order.size()) {
    std::size_t end = g;
    const HourIndex t0 = participations[order[g]].t0;
    while (end < order.size() && participations[order[end]].t0 == t0) ++end;
    // Events sharing a t0 see only strictly earlier history.
    for (std::size_t k = g; k < end; ++k) {
      const auto& ep = participations[order[k]];
      for (const auto& [wallet, profit] : ep.profits) {
        auto it = history.find(wallet);
        if (it == history.end() || static_cast<int>(it->second.size()) < params.min_events) continue;
        const auto& h = it->second;
        const auto take = std::min<std::size_t>(h.size(), static_cast<std::size_t>(params.lookback));
        const double avg = std::accumulate(h.end() - static_cast<std::ptrdiff_t>(take), h.end(), 0.0) /
                           static_cast<double>(take);
        if (avg > params.min_avg_profit) flags[order[k]].insert(wallet);
      }
    }
    for (std::size_t k = g; k < end; ++k)
      for (const auto& [wallet, profit] : participations[order[k]].profits)
        history[wallet].push_back(profit.profit_pct);
    g = end;
  }
  return flags;
}

PersistenceResult profit_persistence(const std::vector<EventParticipation>& participations) {
  std::vector<std::size_t> order(participations.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(participations[a].t0, participations[a].collection) <
           std::tie(participations[b].t0, participations[b].collection);
  });
  std::map<std::string, double> last;
  std::vector<double> xs, ys;
  for (auto i : order)
    for (const auto& [wallet, p] : participations[i].profits) {
      auto [it, inserted] = last.try_emplace(wallet, p.profit_pct);
      if (!inserted) {
        xs.push_back(it->second);
        ys.push_back(p.profit_pct);
        it->second = p.profit_pct;
      }
    }
  PersistenceResult r;
  r.pairs = xs.size();
  r.low_power = r.pairs < 30;
  if (r.pairs < 3) return r;
  const double mx = mean(xs), my = mean(ys);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx <= 0.0) return r;
  r.coefficient = sxy / sxx;
  r.intercept = my - r.coefficient * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - r.intercept - r.coefficient * xs[i];
    rss += e * e;
  }
  const double se = std::sqrt(rss / static_cast<double>(xs.size() - 2) / sxx);
  r.t_stat = se > 0.0 ? r.coefficient / se : std::nan("");
  return r;
}

int peak_hour(const events::RunUpEvent& event) {
  int best = 0;
  double best_price = event.at(0).price.value_or(0.0);
  for (int t = 1; t <= event.half_window; ++t) {
    const double p = event.at(t).price.value_or(0.0);
    if (p > best_price) {
      best_price = p;
      best = t;
    }
  }
  return best;
}

std::vector<double> percentile_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<double> out(n, 0.5);
  if (n < 2) return out;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + j) / 2.0);  // zero-based average rank
    for (std::size_t k = i; k <= j; ++k) out[order[k]] = avg_rank / static_cast<double>(n - 1);
    i = j + 1;
  }
  return out;
}

std::vector<AgentEventRecord> timing_scores(const events::RunUpEvent& event, const ingest::TransferLog& log) {
  if (!event.crash) throw Error("timing scores are defined on crash events only (" + event.id() + ")");
  constexpr int kDWindow = 24;
  const HourIndex peak = event.t0 + peak_hour(event);
  const auto profits = event_agent_profits(event, log);

  std::map<std::string, AgentEventRecord> acc;
  auto record = [&](const std::string& wallet) -> AgentEventRecord& {
    auto [it, inserted] = acc.try_emplace(wallet);
    if (inserted) {
      it->second.wallet = wallet;
      it->second.event_id = event.id();
    }
    return it->second;
  };
  for_trades_between(log, event.collection, peak - kDWindow, peak + kDWindow, [&](const ingest::Transfer& t) {
    const int d = static_cast<int>(t.hour() - peak);
    auto& b = record(t.to);
    b.ts_buy += timing_score_buy(d);
    ++b.n_buys;
    auto& s = record(t.from);
    s.ts_sell += timing_score_sell(d);
    ++s.n_sells;
  });

  std::vector<AgentEventRecord> out;
  out.reserve(acc.size());
  for (auto& [wallet, r] : acc) {
    r.ts = r.ts_buy + r.ts_sell;
    if (auto it = profits.find(wallet); it != profits.end()) r.profit_pct = it->second.profit_pct;
    out.push_back(std::move(r));
  }
  std::vector<double> ts, tb, tsell;
  for (const auto& r : out) {
    ts.push_back(r.ts);
    tb.push_back(r.ts_buy);
    tsell.push_back(r.ts_sell);
  }
  const auto r1 = percentile_ranks(ts), r2 = percentile_ranks(tb), r3 = percentile_ranks(tsell);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].ts_rank = r1[i];
    out[i].ts_buy_rank = r2[i];
    out[i].ts_sell_rank = r3[i];
  }
  return out;
}

std::optional<double> OwnershipSeries::fraction_at(const std::string& collection, HourIndex hour) const {
  auto it = ranges_.find(collection);
  if (it == ranges_.end()) return std::nullopt;
  const auto [begin, end] = it->second;
  if (begin == end) return std::nullopt;
  const HourIndex first = points[begin].hour;
  if (hour < first) return std::nullopt;
  const auto off = static_cast<std::size_t>(hour - first);
  if (begin + off >= end) return points[end - 1].fraction;  // no transfers since: holdings unchanged
  return points[begin + off].fraction;
}

OwnershipSeries unique_owner_series(const ingest::TransferLog& log) {
  OwnershipSeries s;
  for (const auto& c : log.collections()) {
    const auto& idx = log.indices_of(c);
    const std::size_t begin = s.points.size();
    std::unordered_map<std::string, std::string> owner_of;
    std::unordered_map<std::string, std::size_t> balance;
    auto give = [&](const std::string& wallet) { ++balance[wallet]; };
    auto take = [&](const std::string& wallet) {
      auto it = balance.find(wallet);
      if (--it->second == 0) balance.erase(it);
    };

    std::size_t k = 0;
    HourIndex h = log[idx.front()].hour();
    const HourIndex last = log[idx.back()].hour();
    for (; h <= last; ++h) {
      for (; k < idx.size() && log[idx[k]].hour() == h; ++k) {
        const auto& t = log[idx[k]];
        auto it = owner_of.find(t.token);
        if (it == owner_of.end()) {
          if (!t.is_mint()) {
            ++s.data_gaps;
            s.diagnostics.warn("ownership", "token " + t.token + " of " + c + " moved before any mint (tx " + t.tx_id + ")");
          }
        } else if (it->second != t.from) {
          ++s.data_gaps;
          s.diagnostics.warn("ownership", "tx " + t.tx_id + " sent by a non-holder of token " + t.token);
          take(it->second);
        } else {
          take(it->second);
        }
        if (t.to == kZeroAddress) {
          owner_of.erase(t.token);
        } else {
          owner_of[t.token] = t.to;
          give(t.to);
        }
      }
      OwnershipPoint p;
      p.collection = c;
      p.hour = h;
      p.unique_owners = balance.size();
      p.supply = owner_of.size();
      p.fraction = p.supply ? static_cast<double>(p.unique_owners) / static_cast<double>(p.supply) : 0.0;
      s.points.push_back(std::move(p));
    }
    s.ranges_[c] = {begin, s.points.size()};
  }
  return s;
}

std::optional<double> unique_owner_change(const OwnershipSeries& series, const std::string& collection, HourIndex t0,
                                          int lookback) {
  const auto now = series.fraction_at(collection, t0);
  const auto then = series.fraction_at(collection, t0 - lookback);
  if (!now || !then) return std::nullopt;
  return *now - *then;
}

std::optional<double> sophisticated_fraction(const events::RunUpEvent& event, const ingest::TransferLog& log,
                                             const std::set<std::string>& sophisticated) {
  std::unordered_set<std::string> active;
  for_trades_between(log, event.collection, event.t0 - event.half_window, event.t0, [&](const ingest::Transfer& t) {
    active.insert(t.from);
    active.insert(t.to);
  });
  if (active.empty()) return std::nullopt;
  std::size_t n = 0;
  for (const auto& w : active) n += sophisticated.count(w);
  return static_cast<double>(n) / static_cast<double>(active.size());
}

double metric_value(const WalletStats& s, std::size_t metric) {
  switch (metric) {
    case 0: return s.n_tx;
    case 1: return s.total_value_eth;
    case 2: return s.wallet_age_days;
    case 3: return s.n_dex_swaps;
    case 4: return s.n_dex_liquidity;
    case 5: return s.n_lending_ops;
    case 6: return s.n_trades;
    case 7: return s.nft_volume;
    case 8: return s.mean_holding_hours;
    case 9: return s.hourly_profit_pct;
    default: throw Error("wallet metric index out of range");
  }
}

std::vector<WalletStats> enrich_wallets(const std::vector<std::string>& wallets,
                                        const std::vector<ingest::WalletTx>& txs,
                                        const ingest::CategoryMap& categories, const ingest::TransferLog& log,
                                        Timestamp as_of) {
  const std::unordered_set<std::string> wanted(wallets.begin(), wallets.end());
  std::unordered_map<std::string, std::vector<std::size_t>> trades;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& t = log[i];
    if (!t.is_trade()) continue;
    if (wanted.count(t.from)) trades[t.from].push_back(i);
    if (t.to != t.from && wanted.count(t.to)) trades[t.to].push_back(i);
  }

  std::vector<WalletStats> out;
  out.reserve(wallets.size());
  for (const auto& w : wallets) {
    WalletStats s;
    s.wallet = w;
    auto [lo, hi] = std::equal_range(txs.begin(), txs.end(), w, [](const auto& a, const auto& b) {
      if constexpr (std::is_same_v<std::decay_t<decltype(a)>, std::string>)
        return a < b.wallet;
      else
        return a.wallet < b;
    });
    Timestamp first = 0;
    for (auto it = lo; it != hi; ++it) {
      if (it == lo || it->ts < first) first = it->ts;
      s.n_tx += 1;
      s.total_value_eth += it->value_eth;
      if (auto c = categories.lookup(it->counterparty)) {
        if (*c == ingest::Category::dex_swap) s.n_dex_swaps += 1;
        if (*c == ingest::Category::dex_liquidity) s.n_dex_liquidity += 1;
        if (*c == ingest::Category::lending) s.n_lending_ops += 1;
      }
    }
    if (lo != hi) s.wallet_age_days = std::max(0.0, static_cast<double>(as_of - first) / 86400.0);

    if (auto it = trades.find(w); it != trades.end()) {
      std::map<std::string, std::deque<std::pair<Timestamp, double>>> open;  // token -> FIFO buys
      std::vector<double> hold_hours, hourly;
      for (auto i : it->second) {
        const auto& t = log[i];
        s.n_trades += 1;
        s.nft_volume += t.price_eth;
        if (t.is_self_trade()) continue;
        if (t.to == w) {
          open[t.token].emplace_back(t.ts, t.price_eth);
        } else if (auto o = open.find(t.token); o != open.end() && !o->second.empty()) {
          const auto [bts, bprice] = o->second.front();
          o->second.pop_front();
          const double hours = static_cast<double>(t.ts - bts) / static_cast<double>(kSecondsPerHour);
          hold_hours.push_back(hours);
          hourly.push_back((t.price_eth / bprice - 1.0) / std::max(hours, 1.0));
        }
      }
      if (!hold_hours.empty()) {
        s.mean_holding_hours = mean(hold_hours);
        s.hourly_profit_pct = mean(hourly) * 100.0;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<GroupComparison> compare_sophisticated(const std::vector<WalletStats>& stats,
                                                   const std::set<std::string>& sophisticated_ever) {
  std::vector<const WalletStats*> soph, other;
  for (const auto& s : stats) (sophisticated_ever.count(s.wallet) ? soph : other).push_back(&s);
  if (soph.empty() || other.empty()) throw Error("comparison needs both sophisticated and other wallets");

  std::vector<GroupComparison> out;
  for (std::size_t m = 0; m < kWalletMetrics.size(); ++m) {
    std::vector<double> a, b;
    for (const auto* s : soph) a.push_back(metric_value(*s, m));
    for (const auto* s : other) b.push_back(metric_value(*s, m));
    GroupComparison g;
    g.metric = std::string(kWalletMetrics[m]);
    g.mean_sophisticated = mean(a);
    g.mean_other = mean(b);
    g.difference = g.mean_sophisticated - g.mean_other;
    g.n_sophisticated = a.size();
    g.n_other = b.size();
    g.t_stat = std::nan("");
    if (a.size() >= 2 && b.size() >= 2) {
      const double sa = sample_sd(a), sb = sample_sd(b);
      const double se = std::sqrt(sa * sa / static_cast<double>(a.size()) + sb * sb / static_cast<double>(b.size()));
      if (se > 0.0) g.t_stat = g.difference / se;
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace bubblescope::agents
