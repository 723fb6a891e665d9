#include "support.hpp"

#include "bubblescope/ingest.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <sstream>

using namespace bubblescope;
using namespace bubblescope::ingest;

namespace {

std::string line(const std::string& tx, Timestamp ts, const std::string& token, double price,
                 const std::string& from = "0xa", const std::string& to = "0xb") {
  Transfer t;
  t.tx_id = tx;
  t.ts = ts;
  t.collection = "apes";
  t.token = token;
  t.from = from;
  t.to = to;
  t.price_eth = price;
  t.price_usd = price * 3000;
  return serialize_transfer(t);
}

}  // namespace

TEST(Ingest, ValidLinesAreSortedByTime) {
  std::stringstream in;
  in << line("0x3", 300, "1", 1.0) << '\n' << line("0x1", 100, "2", 2.0) << '\n' << line("0x2", 200, "3", 0.5) << '\n';
  const auto parsed = parse_transfers(in);
  ASSERT_EQ(parsed.log.size(), 3u);
  EXPECT_EQ(parsed.report.accepted, 3u);
  EXPECT_EQ(parsed.log[0].ts, 100);
  EXPECT_EQ(parsed.log[1].ts, 200);
  EXPECT_EQ(parsed.log[2].ts, 300);
}

TEST(Ingest, NegativePriceIsRejectedWithDiagnostic) {
  std::stringstream in;
  in << line("0x1", 100, "1", 1.0) << '\n' << line("0x2", 200, "2", -3.0) << '\n' << line("0x3", 300, "3", 2.0) << '\n';
  const auto parsed = parse_transfers(in);
  EXPECT_EQ(parsed.log.size(), 2u);
  EXPECT_EQ(parsed.report.rejected, 1u);
  ASSERT_FALSE(parsed.report.diagnostics.empty());
  EXPECT_EQ(parsed.report.diagnostics.entries().front().line, 2u);
}

TEST(Ingest, MalformedLinesDoNotAbortParsing) {
  std::stringstream in;
  in << "{not json\n" << line("0x1", 100, "1", 1.0) << "\n\n" << R"({"tx_id":"0x9"})" << '\n';
  const auto parsed = parse_transfers(in);
  EXPECT_EQ(parsed.log.size(), 1u);
  EXPECT_EQ(parsed.report.rejected, 2u);
}

TEST(Ingest, DuplicateTxTokenPairsCollapseToGroupCount) {
  std::mt19937_64 rng(7);
  std::vector<std::pair<std::string, std::string>> keys;
  std::stringstream in;
  for (int i = 0; i < 400; ++i) {
    const std::string tx = "0x" + std::to_string(rng() % 60);
    const std::string token = std::to_string(rng() % 3);
    keys.emplace_back(tx, token);
    in << line(tx, 1000 + static_cast<Timestamp>(rng() % 50), token, 1.0) << '\n';
  }
  std::sort(keys.begin(), keys.end());
  const auto distinct = static_cast<std::size_t>(std::unique(keys.begin(), keys.end()) - keys.begin());
  const auto parsed = parse_transfers(in);
  EXPECT_EQ(parsed.log.size(), distinct);
  EXPECT_EQ(parsed.report.duplicates, 400u - distinct);
}

TEST(Ingest, TwoLinesSharingTxAndTokenKeepOne) {
  std::stringstream in;
  in << line("0x1", 100, "7", 1.0) << '\n' << line("0x1", 100, "7", 1.0) << '\n';
  EXPECT_EQ(parse_transfers(in).log.size(), 1u);
}

TEST(Ingest, LogOrderIsIndependentOfInputOrder) {
  std::vector<std::string> lines;
  for (int i = 0; i < 50; ++i) lines.push_back(line("0x" + std::to_string(i), 100 + i % 7, std::to_string(i % 5), 1.0 + i));
  std::stringstream a, b;
  for (const auto& l : lines) a << l << '\n';
  std::reverse(lines.begin(), lines.end());
  for (const auto& l : lines) b << l << '\n';
  EXPECT_TRUE(parse_transfers(a).log == parse_transfers(b).log);
}

TEST(Ingest, SerializeParseRoundTrip) {
  Transfer t;
  t.tx_id = "0xabc";
  t.ts = 1640995200;
  t.collection = "c";
  t.token = "42";
  t.from = "0x1";
  t.to = "0x2";
  t.price_eth = 0.1234567890123;
  t.price_usd = 456.75;
  t.market = "looksrare";
  EXPECT_EQ(parse_transfer_line(serialize_transfer(t)), t);
}

TEST(Funding, SharedFunderIsVisibleForBothWallets) {
  FundingIndex idx;
  idx.insert({"A", "X", 10});
  idx.insert({"B", "X", 20});
  EXPECT_EQ(idx.first_funder("A"), "X");
  EXPECT_EQ(idx.first_funder("B"), "X");
  EXPECT_FALSE(idx.first_funder("C").has_value());
}

TEST(Funding, EarliestEdgeWinsRegardlessOfOrder) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<FundingEdge> edges;
    std::map<std::string, FundingEdge> oracle;
    for (int i = 0; i < 40; ++i) {
      FundingEdge e{"w" + std::to_string(rng() % 8), "f" + std::to_string(i), static_cast<Timestamp>(rng() % 1000000)};
      edges.push_back(e);
      auto it = oracle.find(e.wallet);
      if (it == oracle.end() || e.funded_at < it->second.funded_at) oracle[e.wallet] = e;
    }
    std::stringstream in;
    for (const auto& e : edges) in << serialize_funding_edge(e) << '\n';
    const auto parsed = load_funding_graph(in);
    for (const auto& [w, e] : oracle) EXPECT_EQ(parsed.index.first_funder(w), e.first_funder);
  }
}

TEST(Funding, LaterEdgeDoesNotReplaceEarlier) {
  FundingIndex idx;
  idx.insert({"A", "X", 200});
  idx.insert({"A", "Y", 100});
  EXPECT_EQ(idx.first_funder("A"), "Y");
}

TEST(Categories, KnownCategoryIsStored) {
  std::stringstream in("address,category\n0xab12,dex_swap\n");
  const auto parsed = load_categories(in);
  EXPECT_EQ(parsed.map.lookup("0xab12"), Category::dex_swap);
}

TEST(Categories, UnknownCategoryIsRejected) {
  std::stringstream in("0xab12,yield_farm\n");
  const auto parsed = load_categories(in);
  EXPECT_EQ(parsed.map.size(), 0u);
  EXPECT_EQ(parsed.report.rejected, 1u);
}

TEST(Categories, DuplicateKeepsFirstAndWarns) {
  std::stringstream in("0xab12,cex\n0xab12,mixer\n0xcd,lending\n");
  const auto parsed = load_categories(in);
  EXPECT_EQ(parsed.map.lookup("0xab12"), Category::cex);
  EXPECT_EQ(parsed.map.size(), 2u);
  EXPECT_EQ(parsed.report.diagnostics.size(), 1u);
}

TEST(Categories, ExclusionsAreCexAndMixer) {
  CategoryMap m;
  m.insert("a", Category::cex);
  m.insert("b", Category::mixer);
  m.insert("c", Category::dex_swap);
  const auto ex = m.exclusions();
  EXPECT_EQ(ex.size(), 2u);
  EXPECT_TRUE(ex.count("a") && ex.count("b"));
}

TEST(WalletTxs, SortedByWalletThenTime) {
  std::stringstream in;
  in << serialize_wallet_tx({"b", 5, "x", 1.0, WalletTxKind::transfer}) << '\n'
     << serialize_wallet_tx({"a", 9, "y", 2.0, WalletTxKind::contract_call}) << '\n'
     << serialize_wallet_tx({"a", 3, "z", 0.5, WalletTxKind::transfer}) << '\n';
  const auto parsed = load_wallet_txs(in);
  ASSERT_EQ(parsed.txs.size(), 3u);
  EXPECT_EQ(parsed.txs[0].wallet, "a");
  EXPECT_EQ(parsed.txs[0].ts, 3);
  EXPECT_EQ(parsed.txs[2].wallet, "b");
}

TEST(Time, ParsesAndFormatsUtcHours) {
  EXPECT_EQ(parse_utc("2021-12-31T23"), 1640991600);
  EXPECT_EQ(parse_utc("2022-01-01T00:00:00"), 1640995200);
  EXPECT_EQ(format_utc_hour(hour_of(1640991600)), "2021-12-31T23");
  EXPECT_THROW(parse_utc("2021-13-01T00"), Error);
}
