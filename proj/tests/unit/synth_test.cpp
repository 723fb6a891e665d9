#include "bubblescope/events.hpp"
#include "bubblescope/panel.hpp"
#include "bubblescope/synth.hpp"
#include "bubblescope/washtrade.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace bubblescope;
using namespace bubblescope::synth;

namespace {

SynthConfig small(std::uint64_t seed = 7) {
  SynthConfig c;
  c.seed = seed;
  c.n_collections = 2;
  c.n_wallets = 2000;
  c.horizon_hours = 2000;
  c.runup_rate = 2.5;
  c.wash_loop_count = 20;
  c.sophisticated_share = 0.01;
  return c;
}

std::set<std::pair<std::string, HourIndex>> detected(const SynthMarket& m) {
  const auto panel = panel::build_panel(ingest::TransferLog(m.transfers)).panel;
  std::set<std::pair<std::string, HourIndex>> out;
  for (const auto& e : events::detect_runups(panel)) out.emplace(e.collection, e.t0);
  return out;
}

}  // namespace

TEST(Synth, SameSeedSameMarket) {
  const auto a = generate_market(small(), 1);
  const auto b = generate_market(small(), 4);
  EXPECT_TRUE(ingest::TransferLog(a.transfers) == ingest::TransferLog(b.transfers));
  EXPECT_EQ(ground_truth_json(a.truth), ground_truth_json(b.truth));
  const auto c = generate_market(small(8), 1);
  EXPECT_NE(ground_truth_json(a.truth), ground_truth_json(c.truth));
}

TEST(Synth, ZeroRunupRatePlantsNoEvents) {
  auto cfg = small();
  cfg.runup_rate = 0.0;
  const auto m = generate_market(cfg);
  EXPECT_TRUE(m.truth.events.empty());
  EXPECT_TRUE(detected(m).empty());
}

TEST(Synth, PlantedRunupsAreExactlyTheDetectedEvents) {
  const auto m = generate_market(small());
  ASSERT_EQ(m.truth.events.size(), 10u);
  std::set<std::pair<std::string, HourIndex>> planted;
  for (const auto& e : m.truth.events) planted.emplace(e.collection, e.t0);
  EXPECT_EQ(detected(m), planted);
}

TEST(Synth, PlantedWashTradesCarryTheirFilters) {
  const auto m = generate_market(small());
  ingest::FundingIndex funding;
  for (const auto& f : m.funding) funding.insert(f);
  const auto r = wash::flag_wash_trades(ingest::TransferLog(m.transfers), funding, m.categories.exclusions());
  std::map<std::string, std::uint8_t> flagged;
  for (const auto& f : r.flags) flagged[f.tx_id] = f.filters;
  ASSERT_FALSE(m.truth.wash_trades.empty());
  for (const auto& w : m.truth.wash_trades) {
    ASSERT_TRUE(flagged.count(w.tx_id)) << w.tx_id;
    EXPECT_EQ(flagged[w.tx_id] & w.filters, w.filters) << w.tx_id;
  }
}

TEST(Synth, InvalidConfigsAreRejected) {
  auto bad = [](auto edit) {
    auto c = small();
    edit(c);
    return c;
  };
  EXPECT_THROW(validate(bad([](SynthConfig& c) { c.n_collections = 0; })), Error);
  EXPECT_THROW(validate(bad([](SynthConfig& c) { c.horizon_hours = 10; })), Error);
  EXPECT_THROW(validate(bad([](SynthConfig& c) { c.n_wallets = 10; })), Error);
  EXPECT_THROW(validate(bad([](SynthConfig& c) { c.runup_rate = -1; })), Error);
  EXPECT_THROW(validate(bad([](SynthConfig& c) { c.crash_prob_base = 1.0; })), Error);
  EXPECT_THROW(validate(bad([](SynthConfig& c) { c.planted_effects["nonsense"] = 1.0; })), Error);
  EXPECT_NO_THROW(validate(small()));
}
