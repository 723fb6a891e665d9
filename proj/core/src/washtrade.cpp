#include "bubblescope/washtrade.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>

namespace bubblescope::wash {

std::string_view to_string(Filter f) {
  switch (f) {
    case self_trade: return "self_trade";
    case inverted_pair: return "inverted_pair";
    case repeat_buyer: return "repeat_buyer";
    case common_funder: return "common_funder";
  }
  return "?";
}

std::string describe(std::uint8_t filters) {
  std::string out;
  for (auto f : kAllFilters)
    if (filters & f) {
      if (!out.empty()) out += '|';
      out += to_string(f);
    }
  return out;
}

std::uint8_t parse_filters(std::string_view text) {
  std::uint8_t bits = 0;
  while (!text.empty()) {
    const auto bar = text.find('|');
    const auto part = text.substr(0, bar);
    bool known = false;
    for (auto f : kAllFilters)
      if (part == to_string(f)) {
        bits |= f;
        known = true;
      }
    if (!known) throw Error("unknown wash filter '" + std::string(part) + "'");
    if (bar == std::string_view::npos) break;
    text.remove_prefix(bar + 1);
  }
  return bits;
}

WashResult flag_wash_trades(const ingest::TransferLog& log, const ingest::FundingIndex& funding,
                            const std::unordered_set<std::string>& exclusions) {
  using Key = std::pair<std::string, std::string>;  // (collection, token)
  std::vector<std::size_t> trades;
  std::map<Key, std::vector<std::size_t>> by_token;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& t = log[i];
    if (!t.is_trade()) continue;
    trades.push_back(i);
    by_token[{t.collection, t.token}].push_back(i);
  }

  std::vector<std::uint8_t> bits(log.size(), 0);
  WashResult result;

  for (const auto& [key, idx] : by_token) {
    std::set<std::pair<std::string, std::string>> directed;
    std::map<std::string, int> buys;
    for (auto i : idx) {
      directed.emplace(log[i].from, log[i].to);
      ++buys[log[i].to];
    }
    for (auto i : idx) {
      const auto& t = log[i];
      if (t.from == t.to) bits[i] |= self_trade;
      else if (directed.count({t.to, t.from})) bits[i] |= inverted_pair;
      auto b = buys.find(t.to);
      auto s = buys.find(t.from);
      if ((b != buys.end() && b->second >= 3) || (s != buys.end() && s->second >= 3)) bits[i] |= repeat_buyer;
    }
  }

  for (auto i : trades) {
    const auto& t = log[i];
    const auto fb = funding.first_funder(t.to);
    const auto fs = funding.first_funder(t.from);
    if (!fb || !fs) {
      ++result.missing_funding;
      continue;
    }
    const bool shared = *fb == *fs && !exclusions.count(*fb);
    if (shared || *fb == t.from || *fs == t.to) bits[i] |= common_funder;
  }
  if (result.missing_funding)
    result.diagnostics.warn("wash", std::to_string(result.missing_funding) +
                                        " trades lack funding data; common-funder test skipped for them");

  // One flag per (tx_id, token); duplicates cannot survive TransferLog, but a
  // tx moving the same token twice would merge here.
  std::map<Key, WashFlag> merged;
  for (auto i : trades) {
    if (!bits[i]) continue;
    const auto& t = log[i];
    auto [it, inserted] = merged.try_emplace({t.tx_id, t.token});
    auto& f = it->second;
    if (inserted) {
      f.tx_id = t.tx_id;
      f.token = t.token;
      f.collection = t.collection;
      f.ts = t.ts;
      f.volume_eth = t.price_eth;
    }
    f.filters |= bits[i];
  }
  result.flags.reserve(merged.size());
  for (auto& [k, f] : merged) result.flags.push_back(std::move(f));
  return result;
}

double wash_volume_before(const std::string& collection, HourIndex t0, const std::vector<WashFlag>& flags) {
  const Timestamp cutoff = hour_start(t0);
  double v = 0.0;
  for (const auto& f : flags)
    if (f.collection == collection && f.ts < cutoff) v += f.volume_eth;
  return std::log1p(v);
}

WashVolumeIndex::WashVolumeIndex(const std::vector<WashFlag>& flags) {
  for (const auto& f : flags) cumulative_[f.collection].emplace_back(f.ts, f.volume_eth);
  for (auto& [c, v] : cumulative_) {
    std::sort(v.begin(), v.end());
    double run = 0.0;
    for (auto& [ts, x] : v) {
      run += x;
      x = run;
    }
  }
}

double WashVolumeIndex::log_volume_before(const std::string& collection, HourIndex t0) const {
  auto it = cumulative_.find(collection);
  if (it == cumulative_.end()) return 0.0;
  const auto& v = it->second;
  auto pos = std::lower_bound(v.begin(), v.end(), hour_start(t0),
                              [](const auto& e, Timestamp ts) { return e.first < ts; });
  if (pos == v.begin()) return 0.0;
  return std::log1p(std::prev(pos)->second);
}

int leading_digit(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw Error("leading digit needs a positive finite number");
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::scientific);
  (void)res;
  return buf[0] - '0';
}

std::array<double, 9> benford_expected() {
  std::array<double, 9> e{};
  for (int d = 1; d <= 9; ++d) e[static_cast<std::size_t>(d - 1)] = std::log10(1.0 + 1.0 / d);
  return e;
}

BenfordResult benford_test(const std::vector<double>& prices) {
  BenfordResult r;
  r.expected = benford_expected();
  std::array<std::size_t, 9> counts{};
  for (double p : prices) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      ++r.skipped;
      continue;
    }
    ++counts[static_cast<std::size_t>(leading_digit(p) - 1)];
    ++r.n;
  }
  if (r.skipped) r.diagnostics.warn("benford", std::to_string(r.skipped) + " non-positive prices skipped");
  if (r.n == 0) throw Error("benford test needs at least one positive price");
  const auto n = static_cast<double>(r.n);
  for (std::size_t d = 0; d < 9; ++d) {
    r.observed[d] = static_cast<double>(counts[d]) / n;
    const double diff = r.observed[d] - r.expected[d];
    r.chi2 += diff * diff / r.expected[d];
  }
  r.chi2 *= n;
  r.p_value = boost::math::gamma_q(4.0, r.chi2 / 2.0);  // chi-square survival, 8 df
  return r;
}

double powerlaw_exponent(std::vector<double> prices, double tail_fraction) {
  if (!(tail_fraction > 0.0) || tail_fraction > 1.0) throw Error("tail fraction must lie in (0, 1]");
  std::erase_if(prices, [](double x) { return !(x > 0.0) || !std::isfinite(x); });
  std::sort(prices.begin(), prices.end(), std::greater<>());
  const auto k = static_cast<std::size_t>(std::floor(static_cast<double>(prices.size()) * tail_fraction + 1e-9));
  if (k < 100) throw Error("power-law fit needs at least 100 tail observations, got " + std::to_string(k));
  const double x_min = prices[k - 1];
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += std::log(prices[i] / x_min);
  if (!(s > 0.0)) throw Error("degenerate tail: all tail prices are equal");
  return 1.0 + static_cast<double>(k) / s;
}

}  // namespace bubblescope::wash
