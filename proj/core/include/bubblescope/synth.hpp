#pragma once

// Synthetic NFT markets with planted run-ups, crash outcomes, wash-trading
// loops and sophisticated wallets, emitted in the ingest schemas together
// with the ground truth used by the acceptance checks.

#include "bubblescope/common.hpp"
#include "bubblescope/ingest.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace bubblescope::synth {

// Feature keys accepted in planted_effects, in ground-truth order.
inline constexpr std::array<std::string_view, 6> kFeatureNames = {
    "volatility", "turnover", "acceleration", "sophisticated_frac", "unique_owner_change", "wash_volume"};

std::map<std::string, double> default_effects();

struct SynthConfig {
  std::uint64_t seed = 42;
  int n_collections = 50;
  int n_wallets = 100000;  // ordinary wallet budget, split evenly across collections
  int horizon_hours = 2000;
  double runup_rate = 5.0;  // planted run-ups per collection per 1,000 hours
  double crash_prob_base = 0.5;
  // Logistic crash-probability coefficient per standardized feature.
  std::map<std::string, double> planted_effects = default_effects();
  int wash_loop_count = 400;
  double sophisticated_share = 0.0015;  // of n_wallets
  int max_sophisticated_per_event = 6;
  Timestamp start = 1637366400;  // 2021-11-20T00:00Z
};

// Throws Error describing the first invalid field.
void validate(const SynthConfig& config);

struct EventFeatures {
  double volatility = 0;
  double turnover = 0;
  double acceleration = 0;
  double sophisticated_frac = 0;
  double unique_owner_change = 0;
  double wash_log_volume = 0;

  [[nodiscard]] double get(std::size_t i) const;
};

struct PlantedEvent {
  std::string collection;
  HourIndex t0 = 0;
  bool crash = false;
  double ex_post_ret = 0;
  double crash_probability = 0;
  int peak_hour = 0;
  EventFeatures features;
  std::vector<std::string> sophisticated_participants;
  std::size_t sophisticated_eligible = 0;
};

enum class LoopType { self_trade, inverted_pair, repeat_buyer, shared_funder, direct_funder };
std::string_view to_string(LoopType t);

struct PlantedWashTrade {
  std::string tx_id;
  std::string token;
  std::string collection;
  LoopType loop = LoopType::self_trade;
  std::uint8_t filters = 0;  // wash::Filter bits the trade must carry
};

struct GroundTruth {
  std::vector<PlantedEvent> events;  // sorted by (collection, t0)
  std::vector<PlantedWashTrade> wash_trades;
  std::vector<std::string> sophisticated_wallets;  // planted sophisticated intent
  std::array<double, 6> feature_center{};
  std::array<double, 6> feature_scale{};
  std::size_t wash_loops = 0;
};

struct SynthMarket {
  std::vector<ingest::Transfer> transfers;  // canonical order
  std::vector<ingest::FundingEdge> funding;
  ingest::CategoryMap categories;
  std::vector<ingest::WalletTx> wallet_txs;
  GroundTruth truth;
};

// Collections are generated independently (in parallel when threads > 1)
// from per-collection streams; cross-collection state (event schedule,
// sophisticated participation, wash-loop allocation) is planned first from
// a separate stream, so the output does not depend on the thread count.
SynthMarket generate_market(const SynthConfig& config, int threads = 1);

std::string ground_truth_json(const GroundTruth& truth);
// transfers.jsonl, funding.jsonl, categories.csv, wallet_tx.jsonl, ground_truth.json
void write_market(const SynthMarket& market, const std::string& dir);

}  // namespace bubblescope::synth
