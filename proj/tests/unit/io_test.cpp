#include "bubblescope/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

using namespace bubblescope;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("bubblescope_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

double noisy(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return u(rng) * std::pow(10.0, u(rng) * 8.0);
}

}  // namespace

TEST(Io, FormatNumberIsShortestRoundTrip) {
  EXPECT_EQ(io::format_number(0.1), "0.1");
  EXPECT_EQ(io::format_number(-0.0), "0");
  EXPECT_EQ(io::format_number(std::nan("")), "nan");
  EXPECT_EQ(io::format_number(std::optional<double>{}), "");
  EXPECT_EQ(io::format_number(-std::numeric_limits<double>::infinity()), "-inf");
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = noisy(rng);
    EXPECT_EQ(std::stod(io::format_number(x)), x);
  }
}

TEST(Io, CsvColumnLookup) {
  std::istringstream in("a,b,c\n1,2,3\n4,,6\n");
  const auto t = io::read_csv(in);
  EXPECT_EQ(t.column("c"), 2u);
  EXPECT_THROW(t.column("d"), Error);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1][1], "");
}

TEST(Io, EventsRoundTrip) {
  std::mt19937_64 rng(2);
  std::vector<events::EventRow> rows;
  for (int i = 0; i < 50; ++i) {
    events::EventRow r;
    r.collection = "col" + std::to_string(i % 4);
    r.t0 = 450000 + i * 7;
    r.id = events::event_id(r.collection, r.t0);
    r.volume_eth = std::abs(noisy(rng));
    r.active_wallets = static_cast<std::size_t>(rng() % 500);
    r.runup_ret = noisy(rng);
    r.ex_post_ret = noisy(rng);
    r.crash = i % 3 == 0;
    r.price_t0 = std::abs(noisy(rng));
    r.price_t1 = std::abs(noisy(rng));
    r.price_t24 = std::abs(noisy(rng));
    r.predictors.volatility = noisy(rng);
    r.predictors.turnover = noisy(rng);
    r.predictors.age_hours = noisy(rng);
    if (i % 2) r.predictors.acceleration = noisy(rng);
    if (i % 5) r.predictors.sophisticated_frac = noisy(rng);
    r.predictors.unique_owner_change = noisy(rng);
    if (i % 7) r.predictors.wash_log_volume = noisy(rng);
    r.liquidity.turnover_post = noisy(rng);
    if (i % 4) r.liquidity.amihud = noisy(rng);
    r.liquidity.volatility_post = noisy(rng);
    rows.push_back(r);
  }
  std::stringstream ss;
  io::write_events(ss, rows);
  const auto back = io::read_events(ss);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto &a = rows[i], &b = back[i];
    EXPECT_EQ(a.id, b.id);
    EXPECT_EQ(a.collection, b.collection);
    EXPECT_EQ(a.t0, b.t0);
    EXPECT_EQ(a.volume_eth, b.volume_eth);
    EXPECT_EQ(a.active_wallets, b.active_wallets);
    EXPECT_EQ(a.runup_ret, b.runup_ret);
    EXPECT_EQ(a.ex_post_ret, b.ex_post_ret);
    EXPECT_EQ(a.crash, b.crash);
    EXPECT_EQ(a.price_t0, b.price_t0);
    EXPECT_EQ(a.price_t1, b.price_t1);
    EXPECT_EQ(a.price_t24, b.price_t24);
    EXPECT_EQ(a.predictors.volatility, b.predictors.volatility);
    EXPECT_EQ(a.predictors.turnover, b.predictors.turnover);
    EXPECT_EQ(a.predictors.age_hours, b.predictors.age_hours);
    EXPECT_EQ(a.predictors.acceleration, b.predictors.acceleration);
    EXPECT_EQ(a.predictors.sophisticated_frac, b.predictors.sophisticated_frac);
    EXPECT_EQ(a.predictors.unique_owner_change, b.predictors.unique_owner_change);
    EXPECT_EQ(a.predictors.wash_log_volume, b.predictors.wash_log_volume);
    EXPECT_EQ(a.liquidity.turnover_post, b.liquidity.turnover_post);
    EXPECT_EQ(a.liquidity.amihud, b.liquidity.amihud);
    EXPECT_EQ(a.liquidity.volatility_post, b.liquidity.volatility_post);
  }
}

TEST(Io, PanelRoundTrip) {
  std::mt19937_64 rng(3);
  std::vector<panel::PanelRow> rows;
  for (int c = 0; c < 3; ++c)
    for (int h = 0; h < 40; ++h) {
      panel::PanelRow r;
      r.collection = "c" + std::to_string(c);
      r.hour = 400000 + h;
      if (h > 2) r.price = std::abs(noisy(rng));
      if (h > 3) r.ret = noisy(rng);
      if (h % 3) r.floor = std::abs(noisy(rng));
      r.volume = std::abs(noisy(rng));
      r.sales = static_cast<double>(rng() % 9);
      r.minted = static_cast<double>(rng() % 4);
      r.supply = static_cast<double>(100 + h);
      if (h % 2) r.turnover = std::abs(noisy(rng));
      if (h % 5) r.mcap = std::abs(noisy(rng));
      r.age_hours = h;
      r.traded = r.sales > 0;
      rows.push_back(r);
    }
  const panel::Panel p(rows);
  std::stringstream ss;
  io::write_panel(ss, p);
  EXPECT_TRUE(io::read_panel(ss) == p);
}

TEST(Io, FlagsRoundTripThroughAFile) {
  const auto dir = scratch("flags");
  std::vector<wash::WashFlag> flags{{"0x1", "7", "c", 1650000000, wash::self_trade | wash::repeat_buyer, 1.25},
                                    {"0x2", "8", "d", 1650003600, wash::common_funder, 0.1}};
  const auto path = (dir / "flags.csv").string();
  io::write_file(path, [&](std::ostream& o) { io::write_flags(o, flags); });
  EXPECT_EQ(io::read_flags_file(path), flags);
  fs::remove_all(dir);
}

TEST(Io, WriteFileLeavesNoTemporaries) {
  const auto dir = scratch("atomic");
  io::write_file((dir / "a.txt").string(), [](std::ostream& o) { o << "x\n"; });
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++n;
  EXPECT_EQ(n, 1u);
  EXPECT_THROW(io::read_csv_file((dir / "missing.csv").string()), Error);
  fs::remove_all(dir);
}
