#pragma once

// Wallet-level analysis of run-up events: per-event profits, the causal
// sophistication flag, timing scores on crash events, the unique-owners
// fraction and wallet enrichment from chain transactions.

#include "bubblescope/common.hpp"
#include "bubblescope/events.hpp"
#include "bubblescope/ingest.hpp"

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace bubblescope::agents {

struct WalletProfit {
  double cost = 0.0;
  double proceeds = 0.0;
  double profit_pct = 0.0;  // (proceeds - cost) / cost
  int n_buys = 0;
  int n_sells = 0;
  bool marked_at_carried = false;  // unsold holdings valued at a carried (non-traded) price
};

// Wallets that traded the event collection inside [-w, +w]; those with zero
// cost are left out. Holdings from before the window are valued at the
// carried price at -w when sold; unsold in-window purchases are marked at
// the carried price at +w.
std::map<std::string, WalletProfit> event_agent_profits(const events::RunUpEvent& event,
                                                        const ingest::TransferLog& log);

struct SophisticationParams {
  int min_events = 5;
  int lookback = 5;
  double min_avg_profit = 0.25;
};

struct EventParticipation {
  std::string event_id;
  HourIndex t0 = 0;
  std::string collection;
  std::map<std::string, WalletProfit> profits;
};

// flags[i] holds the sophisticated wallets among the participants of
// participations[i]. Uses only events with an earlier t0, so the result for
// an event never depends on anything after it.
std::vector<std::set<std::string>> sophistication_flags(const std::vector<EventParticipation>& participations,
                                                        const SophisticationParams& params = {});

struct PersistenceResult {
  double coefficient = 0.0;
  double t_stat = 0.0;
  double intercept = 0.0;
  std::size_t pairs = 0;
  bool low_power = false;  // fewer than 30 usable pairs
};

// Pooled OLS of a wallet's event profit on its previous-event profit.
PersistenceResult profit_persistence(const std::vector<EventParticipation>& participations);

// Piecewise-linear timing reward; sell score is the negation.
constexpr int timing_score_buy(int d) noexcept { return d <= 0 ? -d - 12 : d - 12; }
constexpr int timing_score_sell(int d) noexcept { return -timing_score_buy(d); }

struct AgentEventRecord {
  std::string wallet;
  std::string event_id;
  std::optional<double> profit_pct;
  int n_buys = 0;
  int n_sells = 0;
  bool sophisticated = false;       // time-varying flag at this event
  bool sophisticated_ever = false;  // flagged at least once in the sample
  double ts = 0.0;
  double ts_buy = 0.0;
  double ts_sell = 0.0;
  double ts_rank = 0.0;
  double ts_buy_rank = 0.0;
  double ts_sell_rank = 0.0;
};

// Event hour of the ex-post price peak (earliest on ties), within [0, w].
int peak_hour(const events::RunUpEvent& event);

// Timing scores for every wallet trading within 24 hours of the peak of a
// crash event. Throws if the event is not a crash.
std::vector<AgentEventRecord> timing_scores(const events::RunUpEvent& event, const ingest::TransferLog& log);

// Average-rank percentiles scaled to [0, 1]; a single value maps to 0.5.
std::vector<double> percentile_ranks(const std::vector<double>& values);

struct OwnershipPoint {
  std::string collection;
  HourIndex hour = 0;
  std::size_t unique_owners = 0;
  std::size_t supply = 0;
  double fraction = 0.0;  // 0 when supply is 0
};

struct OwnershipSeries {
  std::vector<OwnershipPoint> points;  // grouped by collection, hourly, contiguous
  std::size_t data_gaps = 0;           // transfers whose sender did not hold the token
  Diagnostics diagnostics;

  [[nodiscard]] std::optional<double> fraction_at(const std::string& collection, HourIndex hour) const;

 private:
  friend OwnershipSeries unique_owner_series(const ingest::TransferLog& log);
  std::map<std::string, std::pair<std::size_t, std::size_t>> ranges_;
};

OwnershipSeries unique_owner_series(const ingest::TransferLog& log);

// fraction(t0) - fraction(t0 - 24).
std::optional<double> unique_owner_change(const OwnershipSeries& series, const std::string& collection, HourIndex t0,
                                          int lookback = 24);

// Share of wallets active in [-w, 0] that are flagged sophisticated.
std::optional<double> sophisticated_fraction(const events::RunUpEvent& event, const ingest::TransferLog& log,
                                             const std::set<std::string>& sophisticated);

struct WalletStats {
  std::string wallet;
  double n_tx = 0;
  double total_value_eth = 0;
  double wallet_age_days = 0;
  double n_dex_swaps = 0;
  double n_dex_liquidity = 0;
  double n_lending_ops = 0;
  double n_trades = 0;
  double nft_volume = 0;
  double mean_holding_hours = 0;
  double hourly_profit_pct = 0;
};

inline constexpr std::array<std::string_view, 10> kWalletMetrics = {
    "n_tx",     "total_value_eth", "wallet_age_days", "n_dex_swaps",        "n_dex_liquidity",
    "n_lending_ops", "n_trades",   "nft_volume",      "mean_holding_hours", "hourly_profit_pct"};
double metric_value(const WalletStats& s, std::size_t metric);

// One entry per wallet in `wallets`; chain-side metrics come from `txs`
// (sorted by wallet), NFT-side metrics from the transfer log.
std::vector<WalletStats> enrich_wallets(const std::vector<std::string>& wallets,
                                        const std::vector<ingest::WalletTx>& txs,
                                        const ingest::CategoryMap& categories, const ingest::TransferLog& log,
                                        Timestamp as_of);

struct GroupComparison {
  std::string metric;
  double mean_sophisticated = 0;
  double mean_other = 0;
  double difference = 0;
  double t_stat = 0;  // Welch; NaN when a group has fewer than two wallets
  std::size_t n_sophisticated = 0;
  std::size_t n_other = 0;
};

std::vector<GroupComparison> compare_sophisticated(const std::vector<WalletStats>& stats,
                                                   const std::set<std::string>& sophisticated_ever);

}  // namespace bubblescope::agents
