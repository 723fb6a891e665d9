#pragma once

// Raw record parsing and indexing: transfers, wallet funding edges, address
// categories and wallet-level chain transactions.
//
// Everything arrives as files. A remote indexer can be plugged in by
// implementing RecordSource so that it yields the same JSONL lines.

#include "bubblescope/common.hpp"

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace bubblescope::ingest {

struct Transfer {
  std::string tx_id;
  Timestamp ts = 0;
  std::string collection;
  std::string token;
  std::string from;
  std::string to;
  double price_eth = 0.0;
  double price_usd = 0.0;
  std::string market = "opensea";

  [[nodiscard]] bool is_trade() const noexcept { return price_eth > 0.0; }
  [[nodiscard]] bool is_mint() const noexcept { return from == kZeroAddress; }
  [[nodiscard]] bool is_self_trade() const noexcept { return from == to; }
  [[nodiscard]] HourIndex hour() const noexcept { return hour_of(ts); }

  friend bool operator==(const Transfer&, const Transfer&) = default;
};

// Canonical order: (ts, tx_id, token), then the remaining fields so that the
// order is total and independent of input order.
bool canonical_less(const Transfer& a, const Transfer& b);

// Immutable, sorted, deduplicated transfer log.
class TransferLog {
 public:
  TransferLog() = default;
  // Sorts and collapses duplicate (tx_id, token) pairs. `duplicates` receives
  // the number of records dropped.
  explicit TransferLog(std::vector<Transfer> records, std::size_t* duplicates = nullptr);

  [[nodiscard]] std::span<const Transfer> records() const noexcept { return records_; }
  [[nodiscard]] std::size_t size() const noexcept { return records_.size(); }
  [[nodiscard]] bool empty() const noexcept { return records_.empty(); }
  [[nodiscard]] const Transfer& operator[](std::size_t i) const { return records_[i]; }

  // Collections in lexicographic order.
  [[nodiscard]] std::vector<std::string> collections() const;
  // Indices into records() for one collection, chronological.
  [[nodiscard]] const std::vector<std::size_t>& indices_of(const std::string& collection) const;

  friend bool operator==(const TransferLog& a, const TransferLog& b) { return a.records_ == b.records_; }

 private:
  std::vector<Transfer> records_;
  std::map<std::string, std::vector<std::size_t>> by_collection_;
};

struct ParseReport {
  std::size_t lines = 0;  // non-blank input lines
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t duplicates = 0;
  Diagnostics diagnostics;
};

struct ParsedTransfers {
  TransferLog log;
  ParseReport report;
};

// Source of raw JSONL lines; the file reader is the only built-in one.
class RecordSource {
 public:
  virtual ~RecordSource() = default;
  // Returns false at end of stream.
  virtual bool next_line(std::string& line) = 0;
};

class StreamSource final : public RecordSource {
 public:
  explicit StreamSource(std::istream& in) : in_(in) {}
  bool next_line(std::string& line) override;

 private:
  std::istream& in_;
};

ParsedTransfers parse_transfers(RecordSource& source);
ParsedTransfers parse_transfers(std::istream& in);
ParsedTransfers parse_transfers_file(const std::string& path);

// Validates one JSON object line; throws Error with a reason on failure.
Transfer parse_transfer_line(std::string_view line);
std::string serialize_transfer(const Transfer& t);
void write_transfers(std::ostream& out, const TransferLog& log);

struct FundingEdge {
  std::string wallet;
  std::string first_funder;
  Timestamp funded_at = 0;

  friend bool operator==(const FundingEdge&, const FundingEdge&) = default;
};

class FundingIndex {
 public:
  FundingIndex() = default;

  // Keeps the earliest funded_at per wallet; returns false (and keeps the
  // existing edge) when the new edge is not earlier.
  bool insert(const FundingEdge& edge);

  [[nodiscard]] std::optional<std::string> first_funder(const std::string& wallet) const;
  [[nodiscard]] std::size_t size() const noexcept { return edges_.size(); }
  [[nodiscard]] std::vector<FundingEdge> edges() const;  // sorted by wallet

 private:
  std::unordered_map<std::string, FundingEdge> edges_;
};

struct ParsedFunding {
  FundingIndex index;
  ParseReport report;
};

ParsedFunding load_funding_graph(std::istream& in);
ParsedFunding load_funding_graph_file(const std::string& path);
std::string serialize_funding_edge(const FundingEdge& e);

enum class Category { dex_swap, dex_liquidity, lending, cex, mixer, other };

std::string_view to_string(Category c);
std::optional<Category> parse_category(std::string_view s);

class CategoryMap {
 public:
  // First insertion wins; returns false on a duplicate address.
  bool insert(std::string address, Category category);
  [[nodiscard]] std::optional<Category> lookup(const std::string& address) const;
  [[nodiscard]] std::size_t size() const noexcept { return map_.size(); }
  // cex and mixer addresses; excluded from common-funder wash detection.
  [[nodiscard]] std::unordered_set<std::string> exclusions() const;
  [[nodiscard]] const std::map<std::string, Category>& entries() const noexcept { return map_; }

 private:
  std::map<std::string, Category> map_;
};

struct ParsedCategories {
  CategoryMap map;
  ParseReport report;
};

ParsedCategories load_categories(std::istream& in);
ParsedCategories load_categories_file(const std::string& path);
void write_categories(std::ostream& out, const CategoryMap& map);

enum class WalletTxKind { transfer, contract_call };

struct WalletTx {
  std::string wallet;
  Timestamp ts = 0;
  std::string counterparty;
  double value_eth = 0.0;
  WalletTxKind kind = WalletTxKind::transfer;

  friend bool operator==(const WalletTx&, const WalletTx&) = default;
};

struct ParsedWalletTxs {
  std::vector<WalletTx> txs;  // sorted by (wallet, ts, counterparty)
  ParseReport report;
};

ParsedWalletTxs load_wallet_txs(std::istream& in);
ParsedWalletTxs load_wallet_txs_file(const std::string& path);
std::string serialize_wallet_tx(const WalletTx& tx);

}  // namespace bubblescope::ingest
