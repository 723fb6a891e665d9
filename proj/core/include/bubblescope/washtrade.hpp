#pragma once

// Transaction-level wash-trading filters, pre-event wash volume, and the
// aggregate Benford and power-law diagnostics on trade prices.

#include "bubblescope/common.hpp"
#include "bubblescope/ingest.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace bubblescope::wash {

enum Filter : std::uint8_t {
  self_trade = 1 << 0,
  inverted_pair = 1 << 1,
  repeat_buyer = 1 << 2,
  common_funder = 1 << 3,
};

inline constexpr std::array<Filter, 4> kAllFilters = {self_trade, inverted_pair, repeat_buyer, common_funder};
std::string_view to_string(Filter f);
// "self_trade|common_funder"
std::string describe(std::uint8_t filters);
std::uint8_t parse_filters(std::string_view text);

struct WashFlag {
  std::string tx_id;
  std::string token;
  std::string collection;
  Timestamp ts = 0;
  std::uint8_t filters = 0;  // bitmask of Filter
  double volume_eth = 0.0;

  [[nodiscard]] bool has(Filter f) const noexcept { return (filters & f) != 0; }
  friend bool operator==(const WashFlag&, const WashFlag&) = default;
};

struct WashResult {
  std::vector<WashFlag> flags;  // one per (tx_id, token), sorted by (tx_id, token)
  std::size_t missing_funding = 0;  // trades where the common-funder test was skipped
  Diagnostics diagnostics;
};

// Filters, applied to trades (price > 0) only:
//   self_trade     seller == buyer
//   inverted_pair  both A->B and B->A exist for the same token (A != B)
//   repeat_buyer   a wallet bought the token three or more times; all of that
//                  wallet's trades of the token are flagged
//   common_funder  buyer and seller share a first funder outside
//                  `exclusions`, or one of them first-funded the other
// The common-funder test is skipped when either side has no funding record.
WashResult flag_wash_trades(const ingest::TransferLog& log, const ingest::FundingIndex& funding,
                            const std::unordered_set<std::string>& exclusions);

// ln(1 + flagged ETH volume of `collection` strictly before the start of hour t0).
double wash_volume_before(const std::string& collection, HourIndex t0, const std::vector<WashFlag>& flags);

// Flag volume per collection, sorted by time, for repeated lookups.
class WashVolumeIndex {
 public:
  explicit WashVolumeIndex(const std::vector<WashFlag>& flags);
  [[nodiscard]] double log_volume_before(const std::string& collection, HourIndex t0) const;

 private:
  std::unordered_map<std::string, std::vector<std::pair<Timestamp, double>>> cumulative_;
};

// First significant digit of a positive finite number (0.042 -> 4).
int leading_digit(double x);
// log10(1 + 1/d) for d = 1..9.
std::array<double, 9> benford_expected();

struct BenfordResult {
  std::array<double, 9> observed{};
  std::array<double, 9> expected{};
  double chi2 = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::size_t skipped = 0;  // non-positive or non-finite inputs
  Diagnostics diagnostics;
};

BenfordResult benford_test(const std::vector<double>& prices);

// Hill-type maximum-likelihood tail index on the largest tail_fraction of
// the sample: alpha = 1 + k / sum ln(x_i / x_min).
double powerlaw_exponent(std::vector<double> prices, double tail_fraction = 0.10);

}  // namespace bubblescope::wash
