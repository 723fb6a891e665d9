#pragma once

#include "bubblescope/ingest.hpp"

#include <map>
#include <string>
#include <vector>

namespace bstest {

using bubblescope::HourIndex;
using bubblescope::Timestamp;
using bubblescope::ingest::Transfer;
using bubblescope::ingest::TransferLog;

inline constexpr Timestamp kStart = 1640995200;  // 2022-01-01T00:00Z

inline Timestamp at_hour(HourIndex h, int second = 0) { return kStart + h * 3600 + second; }

class LogBuilder {
 public:
  LogBuilder& mint(const std::string& coll, const std::string& token, const std::string& to, Timestamp ts) {
    return add(coll, token, std::string(bubblescope::kZeroAddress), to, 0.0, ts);
  }
  LogBuilder& trade(const std::string& coll, const std::string& token, const std::string& from, const std::string& to,
                    double price, Timestamp ts) {
    return add(coll, token, from, to, price, ts);
  }
  LogBuilder& add(const std::string& coll, const std::string& token, const std::string& from, const std::string& to,
                  double price, Timestamp ts) {
    Transfer t;
    t.tx_id = "0x" + std::to_string(1000000 + next_++);
    t.ts = ts;
    t.collection = coll;
    t.token = token;
    t.from = from;
    t.to = to;
    t.price_eth = price;
    t.price_usd = price * 4000.0;
    records.push_back(t);
    return *this;
  }
  [[nodiscard]] TransferLog build() const { return TransferLog(records); }

  std::vector<Transfer> records;

 private:
  int next_ = 0;
};

// `supply` tokens minted to one wallet in hour 0, then for each hour h >= 1
// `per_hour` trades at prices[h - 1], each to a fresh wallet.
inline LogBuilder price_path(const std::string& coll, const std::vector<double>& prices, int supply = 20,
                             int per_hour = 1) {
  LogBuilder b;
  std::vector<std::string> owner(static_cast<std::size_t>(supply), "minter-" + coll);
  for (int i = 0; i < supply; ++i) b.mint(coll, std::to_string(i), owner[static_cast<std::size_t>(i)], at_hour(0, i));
  int k = 0;
  for (std::size_t h = 0; h < prices.size(); ++h)
    for (int j = 0; j < per_hour; ++j, ++k) {
      const auto tok = static_cast<std::size_t>(k % supply);
      const std::string buyer = coll + "-w" + std::to_string(k);
      b.trade(coll, std::to_string(tok), owner[tok], buyer, prices[h], at_hour(static_cast<HourIndex>(h) + 1, 60 + j));
      owner[tok] = buyer;
    }
  return b;
}

}  // namespace bstest
