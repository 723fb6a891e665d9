#include "support.hpp"

#include "bubblescope/agents.hpp"
#include "bubblescope/panel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace bubblescope;
using namespace bubblescope::agents;
using bstest::at_hour;
using bstest::LogBuilder;

namespace {

constexpr HourIndex kEventHour = 40;  // relative to kStart

// Background market: 40 tokens minted at hour 0, one trade per hour between
// fresh wallets at price bg(h) for h = 1..90.
struct Market {
  LogBuilder b;
  int bg_token = 20;
  explicit Market(const std::function<double(HourIndex)>& bg) {
    for (int i = 0; i < 40; ++i) b.mint("c", std::to_string(i), "minter", at_hour(0, i));
    for (HourIndex h = 1; h <= 90; ++h) {
      const std::string tok = std::to_string(20 + h % 20);
      b.trade("c", tok, h <= 20 ? "minter" : "bg" + std::to_string(h - 20), "bg" + std::to_string(h), bg(h),
              at_hour(h, 3000));
    }
  }
  // Event time t is hour kEventHour + t.
  void trade(const std::string& token, const std::string& from, const std::string& to, double price, int t,
             int second = 100) {
    b.trade("c", token, from, to, price, at_hour(kEventHour + t, second));
  }
  std::pair<events::RunUpEvent, ingest::TransferLog> event() const {
    auto log = b.build();
    const auto p = panel::build_panel(log).panel;
    events::EventRow row;
    row.collection = "c";
    row.t0 = bstest::kStart / 3600 + kEventHour;
    row.id = events::event_id("c", row.t0);
    return {events::rebuild_events(p, {row}).at(0), std::move(log)};
  }
};

EventParticipation participation(HourIndex t0, const std::map<std::string, double>& profits) {
  EventParticipation p;
  p.t0 = t0;
  p.collection = "c" + std::to_string(t0);
  p.event_id = events::event_id(p.collection, t0);
  for (const auto& [w, pr] : profits) {
    WalletProfit wp;
    wp.cost = 1.0;
    wp.proceeds = 1.0 + pr;
    wp.profit_pct = pr;
    p.profits[w] = wp;
  }
  return p;
}

}  // namespace

TEST(Profits, BuyThenSellInsideTheWindow) {
  Market m([](HourIndex) { return 1.0; });
  m.trade("0", "minter", "alice", 1.0, -5);
  m.trade("0", "alice", "bob", 2.0, 3);
  auto [ev, log] = m.event();
  const auto prof = event_agent_profits(ev, log);
  EXPECT_DOUBLE_EQ(prof.at("alice").profit_pct, 1.0);
  EXPECT_EQ(prof.at("alice").n_buys, 1);
  EXPECT_EQ(prof.at("alice").n_sells, 1);
}

TEST(Profits, UnsoldHoldingIsMarkedAtTheEndOfTheWindow) {
  Market m([](HourIndex h) { return h == kEventHour + 24 ? 0.5 : 1.0; });
  m.trade("0", "minter", "alice", 1.0, -5);
  auto [ev, log] = m.event();
  EXPECT_DOUBLE_EQ(event_agent_profits(ev, log).at("alice").profit_pct, -0.5);
}

TEST(Profits, HandLedgerWithTwoBuysOneSellOneUnsold) {
  Market m([](HourIndex) { return 1.0; });
  m.trade("0", "minter", "alice", 1.0, -6);
  m.trade("1", "minter", "alice", 3.0, -4);
  m.trade("1", "alice", "bob", 5.0, 2);
  auto [ev, log] = m.event();
  // cost 1 + 3, proceeds 5 + mark 1.0 for token 0
  EXPECT_DOUBLE_EQ(event_agent_profits(ev, log).at("alice").profit_pct, (6.0 - 4.0) / 4.0);
}

TEST(Profits, SellingPreWindowHoldingsUsesTheOpeningPrice) {
  Market m([](HourIndex h) { return h == kEventHour - 24 ? 0.8 : 1.0; });
  m.trade("0", "minter", "carol", 0.1, -30);
  m.trade("0", "carol", "dave", 2.0, 1);
  auto [ev, log] = m.event();
  const auto& c = event_agent_profits(ev, log).at("carol");
  EXPECT_DOUBLE_EQ(c.cost, ev.price_at(-24));
  EXPECT_DOUBLE_EQ(c.proceeds, 2.0);
}

TEST(Sophistication, FourPriorEventsAreNotEnough) {
  std::vector<EventParticipation> ps;
  for (int i = 0; i < 5; ++i) ps.push_back(participation(100 * (i + 1), {{"w", 5.0}}));
  const auto f = sophistication_flags(ps);
  EXPECT_EQ(f[4].count("w"), 0u);
}

TEST(Sophistication, FivePriorEventsAboveTheBarAreFlagged) {
  std::vector<EventParticipation> ps;
  for (int i = 0; i < 6; ++i) ps.push_back(participation(100 * (i + 1), {{"w", 0.3}}));
  const auto f = sophistication_flags(ps);
  EXPECT_EQ(f[5].count("w"), 1u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(f[static_cast<std::size_t>(i)].count("w"), 0u);
}

TEST(Sophistication, RollingMeanUsesOnlyTheLastFive) {
  std::vector<EventParticipation> ps;
  const std::vector<double> profits = {5.0, 0.5, 0.5, 0.5, 0.5, -1.0, 0.0};
  for (std::size_t i = 0; i < profits.size(); ++i)
    ps.push_back(participation(100 * static_cast<HourIndex>(i + 1), {{"w", profits[i]}}));
  const auto f = sophistication_flags(ps);
  // Before the last event the trailing five are {0.5,0.5,0.5,0.5,-1.0}: mean 0.2.
  EXPECT_EQ(f[6].count("w"), 0u);
  // Before the sixth event the trailing five are {5,.5,.5,.5,.5}.
  EXPECT_EQ(f[5].count("w"), 1u);
}

TEST(Sophistication, FlagsIgnoreFutureEvents) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-0.5, 1.5);
  std::vector<EventParticipation> ps;
  for (int i = 0; i < 60; ++i) {
    std::map<std::string, double> pr;
    for (int w = 0; w < 6; ++w)
      if (rng() % 2) pr["w" + std::to_string(w)] = u(rng);
    ps.push_back(participation(10 * i, pr));
  }
  const auto full = sophistication_flags(ps);
  for (std::size_t cut = 1; cut < ps.size(); cut += 7) {
    std::vector<EventParticipation> prefix(ps.begin(), ps.begin() + static_cast<std::ptrdiff_t>(cut));
    // Perturb nothing before the cut; drop everything after.
    const auto part = sophistication_flags(prefix);
    for (std::size_t i = 0; i < cut; ++i) EXPECT_EQ(part[i], full[i]);
  }
}

TEST(Persistence, IdenticalProfitsPerWalletGiveUnitCoefficient) {
  std::vector<EventParticipation> ps;
  for (int i = 0; i < 8; ++i) {
    std::map<std::string, double> pr;
    for (int w = 0; w < 10; ++w) pr["w" + std::to_string(w)] = 0.1 * w - 0.3;
    ps.push_back(participation(10 * i, pr));
  }
  const auto r = profit_persistence(ps);
  EXPECT_NEAR(r.coefficient, 1.0, 1e-10);
  EXPECT_EQ(r.pairs, 70u);
  EXPECT_FALSE(r.low_power);
}

TEST(Persistence, IndependentProfitsGiveNoPersistence) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<EventParticipation> ps;
  for (int i = 0; i < 60; ++i) {
    std::map<std::string, double> pr;
    for (int w = 0; w < 50; ++w) pr["w" + std::to_string(w)] = n(rng);
    ps.push_back(participation(10 * i, pr));
  }
  const auto r = profit_persistence(ps);
  EXPECT_LT(std::abs(r.t_stat), 3.5);
  EXPECT_LT(std::abs(r.coefficient), 0.06);
}

TEST(Persistence, FewPairsAreLowPower) {
  std::vector<EventParticipation> ps{participation(1, {{"a", 0.1}}), participation(2, {{"a", 0.2}}),
                                     participation(3, {{"a", 0.4}})};
  EXPECT_TRUE(profit_persistence(ps).low_power);
}

TEST(Timing, ScoreTableMatchesDefinition) {
  for (int d = -24; d <= 24; ++d) {
    const int expected = d <= 0 ? -d - 12 : d - 12;
    EXPECT_EQ(timing_score_buy(d), expected);
    EXPECT_EQ(timing_score_sell(d), -expected);
  }
  EXPECT_EQ(timing_score_buy(-24), 12);
  EXPECT_EQ(timing_score_buy(0), -12);
}

namespace {

// Crash path: price 1 until t=0 then 3, peak 3.3 at t=2, slide to 1.
double crash_price(HourIndex h) {
  const auto t = h - kEventHour;
  if (t < -12) return 1.0;
  if (t < 0) return 1.4;
  if (t == 0) return 3.0;
  if (t == 1) return 3.1;
  if (t == 2) return 3.3;
  return 1.0;
}

}  // namespace

TEST(Timing, BuyAtWindowStartAndSellAtPeak) {
  Market m(crash_price);
  m.trade("0", "minter", "a", 1.0, 2 - 24);
  m.trade("0", "a", "b", 3.3, 2, 200);
  m.trade("1", "minter", "c", 3.3, 2, 300);
  m.trade("1", "c", "d", 3.3, 2, 400);
  auto [ev, log] = m.event();
  ASSERT_TRUE(ev.crash);
  ASSERT_EQ(peak_hour(ev), 2);
  const auto recs = timing_scores(ev, log);
  std::map<std::string, AgentEventRecord> by;
  for (const auto& r : recs) by[r.wallet] = r;
  EXPECT_DOUBLE_EQ(by.at("a").ts, 24.0);  // buy at d=-24 (12) + sell at d=0 (12)
  EXPECT_DOUBLE_EQ(by.at("c").ts, 0.0);   // buy and sell at the peak
  EXPECT_DOUBLE_EQ(by.at("d").ts_buy, -12.0);
  for (const auto& r : recs) {
    EXPECT_GE(r.ts_rank, 0.0);
    EXPECT_LE(r.ts_rank, 1.0);
  }
}

TEST(Timing, NonCrashEventThrows) {
  Market m([](HourIndex) { return 1.0; });
  auto [ev, log] = m.event();
  EXPECT_THROW(timing_scores(ev, log), Error);
}

TEST(Timing, PercentileRanksAverageTies) {
  const auto r = percentile_ranks({10, 20, 20, 30});
  EXPECT_DOUBLE_EQ(r[0], 0.0);
  EXPECT_DOUBLE_EQ(r[1], 0.5);
  EXPECT_DOUBLE_EQ(r[2], 0.5);
  EXPECT_DOUBLE_EQ(r[3], 1.0);
  EXPECT_DOUBLE_EQ(percentile_ranks({7})[0], 0.5);
}

TEST(Ownership, MintsThenDistinctSales) {
  LogBuilder b;
  for (int i = 0; i < 10; ++i) b.mint("c", std::to_string(i), "m", at_hour(0, i));
  for (int i = 0; i < 5; ++i) b.trade("c", std::to_string(i), "m", "w" + std::to_string(i), 1.0, at_hour(2, i));
  const auto s = unique_owner_series(b.build());
  const HourIndex h0 = bstest::kStart / 3600;
  EXPECT_DOUBLE_EQ(*s.fraction_at("c", h0), 0.1);
  EXPECT_DOUBLE_EQ(*s.fraction_at("c", h0 + 1), 0.1);
  EXPECT_DOUBLE_EQ(*s.fraction_at("c", h0 + 2), 0.6);
  EXPECT_NEAR(*unique_owner_change(s, "c", h0 + 2, 2), 0.5, 1e-12);
}

TEST(Ownership, TransferBetweenExistingHoldersNeverAddsAnOwner) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    LogBuilder b;
    std::vector<std::string> owner;
    for (int i = 0; i < 20; ++i) {
      owner.push_back("h" + std::to_string(rng() % 6));
      b.mint("c", std::to_string(i), owner.back(), at_hour(0, i));
    }
    // Each later hour: one transfer between two wallets that already hold something.
    for (int h = 1; h <= 30; ++h) {
      const auto tok = static_cast<std::size_t>(rng() % 20);
      const std::string to = owner[static_cast<std::size_t>(rng() % 20)];
      b.trade("c", std::to_string(tok), owner[tok], to, 1.0, at_hour(h));
      owner[tok] = to;
    }
    const auto s = unique_owner_series(b.build());
    for (std::size_t k = 1; k < s.points.size(); ++k) EXPECT_LE(s.points[k].unique_owners, s.points[k - 1].unique_owners);
  }
}

TEST(Ownership, SenderWithoutTheTokenIsADataGap) {
  LogBuilder b;
  b.mint("c", "1", "m", at_hour(0));
  b.trade("c", "1", "stranger", "x", 1.0, at_hour(1));
  const auto s = unique_owner_series(b.build());
  EXPECT_EQ(s.data_gaps, 1u);
  EXPECT_FALSE(s.diagnostics.empty());
}

TEST(Enrichment, CategoryCountsAndAge) {
  ingest::CategoryMap cats;
  cats.insert("router", ingest::Category::dex_swap);
  cats.insert("pool", ingest::Category::dex_liquidity);
  cats.insert("aave", ingest::Category::lending);
  const Timestamp first = 1'600'000'000;
  std::vector<ingest::WalletTx> txs = {
      {"w", first, "router", 0.1, ingest::WalletTxKind::contract_call},
      {"w", first + 10, "router", 0.2, ingest::WalletTxKind::contract_call},
      {"w", first + 20, "pool", 0.3, ingest::WalletTxKind::contract_call},
      {"w", first + 30, "router", 0.4, ingest::WalletTxKind::contract_call},
      {"w", first + 40, "aave", 0.5, ingest::WalletTxKind::contract_call},
      {"w", first + 50, "friend", 1.0, ingest::WalletTxKind::transfer},
  };
  const auto s = enrich_wallets({"w"}, txs, cats, ingest::TransferLog{}, first + 30 * 86400).at(0);
  EXPECT_DOUBLE_EQ(s.n_dex_swaps, 3.0);
  EXPECT_DOUBLE_EQ(s.n_dex_liquidity, 1.0);
  EXPECT_DOUBLE_EQ(s.n_lending_ops, 1.0);
  EXPECT_DOUBLE_EQ(s.n_tx, 6.0);
  EXPECT_NEAR(s.total_value_eth, 2.5, 1e-12);
  EXPECT_DOUBLE_EQ(s.wallet_age_days, 30.0);
}

TEST(Enrichment, RandomLogsRecoverPlantedCategoryCounts) {
  std::mt19937_64 rng(4);
  ingest::CategoryMap cats;
  const std::vector<std::pair<std::string, ingest::Category>> addrs = {
      {"s1", ingest::Category::dex_swap}, {"s2", ingest::Category::dex_swap}, {"l1", ingest::Category::dex_liquidity},
      {"n1", ingest::Category::lending},  {"x1", ingest::Category::cex}};
  for (const auto& [a, c] : addrs) cats.insert(a, c);
  std::vector<ingest::WalletTx> txs;
  std::map<std::string, std::array<int, 3>> planted;
  for (int w = 0; w < 20; ++w) {
    const std::string wallet = "w" + std::to_string(w);
    for (int k = 0; k < 30; ++k) {
      const auto& [a, c] = addrs[rng() % addrs.size()];
      txs.push_back({wallet, 1000 + k, a, 0.1, ingest::WalletTxKind::contract_call});
      if (c == ingest::Category::dex_swap) ++planted[wallet][0];
      if (c == ingest::Category::dex_liquidity) ++planted[wallet][1];
      if (c == ingest::Category::lending) ++planted[wallet][2];
    }
  }
  std::stable_sort(txs.begin(), txs.end(), [](const auto& a, const auto& b) { return a.wallet < b.wallet; });
  std::vector<std::string> wallets;
  for (const auto& [w, _] : planted) wallets.push_back(w);
  for (const auto& s : enrich_wallets(wallets, txs, cats, ingest::TransferLog{}, 5000)) {
    EXPECT_DOUBLE_EQ(s.n_dex_swaps, planted[s.wallet][0]);
    EXPECT_DOUBLE_EQ(s.n_dex_liquidity, planted[s.wallet][1]);
    EXPECT_DOUBLE_EQ(s.n_lending_ops, planted[s.wallet][2]);
  }
}

TEST(Comparison, IdenticalGroupsHaveZeroDifferences) {
  std::vector<WalletStats> stats;
  for (int i = 0; i < 20; ++i) {
    WalletStats s;
    s.wallet = "w" + std::to_string(i);
    s.n_tx = i % 10;
    s.nft_volume = (i % 10) * 0.5;
    stats.push_back(s);
  }
  std::set<std::string> soph;
  for (int i = 0; i < 10; ++i) soph.insert("w" + std::to_string(i));
  for (const auto& c : compare_sophisticated(stats, soph)) EXPECT_DOUBLE_EQ(c.difference, 0.0);
}

TEST(Comparison, PlantedShiftIsRecovered) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(50.0, 3.0);
  std::vector<WalletStats> stats;
  std::set<std::string> soph;
  for (int i = 0; i < 200; ++i) {
    WalletStats s;
    s.wallet = "w" + std::to_string(i);
    s.n_tx = n(rng) + (i < 100 ? 10.0 : 0.0);
    if (i < 100) soph.insert(s.wallet);
    stats.push_back(s);
  }
  for (const auto& c : compare_sophisticated(stats, soph))
    if (c.metric == "n_tx") {
      EXPECT_NEAR(c.difference, 10.0, 1.5);
      EXPECT_GT(c.t_stat, 5.0);
    }
}

TEST(Comparison, EmptyGroupThrows) {
  std::vector<WalletStats> stats(3);
  for (int i = 0; i < 3; ++i) stats[static_cast<std::size_t>(i)].wallet = "w" + std::to_string(i);
  EXPECT_THROW(compare_sophisticated(stats, {}), Error);
}
