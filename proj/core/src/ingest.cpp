#include "bubblescope/ingest.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <tuple>

namespace bubblescope::ingest {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kStage = "ingest";

std::string require_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(std::string("missing field '") + key + "'");
  if (!it->is_string()) throw Error(std::string("field '") + key + "' must be a string");
  auto s = it->get<std::string>();
  if (s.empty()) throw Error(std::string("field '") + key + "' is empty");
  return s;
}

double require_number(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(std::string("missing field '") + key + "'");
  double v = 0.0;
  if (it->is_number()) {
    v = it->get<double>();
  } else if (it->is_string()) {
    const auto& s = it->get_ref<const std::string&>();
    std::size_t pos = 0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      throw Error(std::string("field '") + key + "' is not numeric");
    }
    if (pos != s.size()) throw Error(std::string("field '") + key + "' is not numeric");
  } else {
    throw Error(std::string("field '") + key + "' must be numeric");
  }
  if (!std::isfinite(v)) throw Error(std::string("field '") + key + "' is not finite");
  return v;
}

Timestamp require_timestamp(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(std::string("missing field '") + key + "'");
  if (it->is_number_integer()) return it->get<Timestamp>();
  const double v = require_number(obj, key);
  if (v != std::floor(v)) throw Error(std::string("field '") + key + "' must be whole seconds");
  return static_cast<Timestamp>(v);
}

json parse_object(std::string_view line) {
  json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (obj.is_discarded()) throw Error("invalid JSON");
  if (!obj.is_object()) throw Error("record is not a JSON object");
  return obj;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return in;
}

auto ordering_key(const Transfer& t) {
  return std::tie(t.ts, t.tx_id, t.token, t.collection, t.from, t.to, t.price_eth, t.price_usd, t.market);
}

}  // namespace

bool canonical_less(const Transfer& a, const Transfer& b) { return ordering_key(a) < ordering_key(b); }

TransferLog::TransferLog(std::vector<Transfer> records, std::size_t* duplicates) {
  std::sort(records.begin(), records.end(), canonical_less);
  std::unordered_set<std::string> seen;
  seen.reserve(records.size());
  records_.reserve(records.size());
  std::size_t dropped = 0;
  for (auto& r : records) {
    std::string key = r.tx_id;
    key.push_back('\x1f');
    key += r.token;
    if (!seen.insert(std::move(key)).second) {
      ++dropped;
      continue;
    }
    records_.push_back(std::move(r));
  }
  if (duplicates) *duplicates = dropped;
  for (std::size_t i = 0; i < records_.size(); ++i) by_collection_[records_[i].collection].push_back(i);
}

std::vector<std::string> TransferLog::collections() const {
  std::vector<std::string> out;
  out.reserve(by_collection_.size());
  for (const auto& [c, _] : by_collection_) out.push_back(c);
  return out;
}

const std::vector<std::size_t>& TransferLog::indices_of(const std::string& collection) const {
  static const std::vector<std::size_t> kEmpty;
  auto it = by_collection_.find(collection);
  return it == by_collection_.end() ? kEmpty : it->second;
}

bool StreamSource::next_line(std::string& line) { return static_cast<bool>(std::getline(in_, line)); }

Transfer parse_transfer_line(std::string_view line) {
  const json obj = parse_object(line);
  Transfer t;
  t.tx_id = require_string(obj, "tx_id");
  t.ts = require_timestamp(obj, "ts");
  t.collection = require_string(obj, "collection");
  t.token = require_string(obj, "token");
  t.from = require_string(obj, "from");
  t.to = require_string(obj, "to");
  t.price_eth = require_number(obj, "price_eth");
  t.price_usd = require_number(obj, "price_usd");
  if (auto it = obj.find("market"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw Error("field 'market' must be a string");
    t.market = it->get<std::string>();
  }
  if (t.ts <= 0) throw Error("timestamp must be positive");
  if (t.price_eth < 0.0) throw Error("negative price_eth");
  if (t.price_usd < 0.0) throw Error("negative price_usd");
  return t;
}

std::string serialize_transfer(const Transfer& t) {
  ordered_json obj;
  obj["tx_id"] = t.tx_id;
  obj["ts"] = t.ts;
  obj["collection"] = t.collection;
  obj["token"] = t.token;
  obj["from"] = t.from;
  obj["to"] = t.to;
  obj["price_eth"] = t.price_eth;
  obj["price_usd"] = t.price_usd;
  obj["market"] = t.market;
  return obj.dump();
}

void write_transfers(std::ostream& out, const TransferLog& log) {
  for (const auto& t : log.records()) out << serialize_transfer(t) << '\n';
}

ParsedTransfers parse_transfers(RecordSource& source) {
  ParsedTransfers result;
  auto& rep = result.report;
  std::vector<Transfer> records;
  std::string line;
  std::size_t line_no = 0;
  while (source.next_line(line)) {
    ++line_no;
    if (is_blank(line)) continue;
    ++rep.lines;
    try {
      records.push_back(parse_transfer_line(line));
      ++rep.accepted;
    } catch (const std::exception& e) {
      ++rep.rejected;
      rep.diagnostics.warn(kStage, std::string("rejected transfer: ") + e.what(), line_no);
    }
  }
  result.log = TransferLog(std::move(records), &rep.duplicates);
  if (rep.duplicates > 0)
    rep.diagnostics.add(kStage, Severity::info,
                        "collapsed " + std::to_string(rep.duplicates) + " duplicate (tx_id, token) records");
  return result;
}

ParsedTransfers parse_transfers(std::istream& in) {
  StreamSource src(in);
  return parse_transfers(src);
}

ParsedTransfers parse_transfers_file(const std::string& path) {
  auto in = open_or_throw(path);
  return parse_transfers(in);
}

bool FundingIndex::insert(const FundingEdge& edge) {
  auto [it, inserted] = edges_.try_emplace(edge.wallet, edge);
  if (inserted) return true;
  auto& cur = it->second;
  if (std::tie(edge.funded_at, edge.first_funder) < std::tie(cur.funded_at, cur.first_funder)) cur = edge;
  return false;
}

std::optional<std::string> FundingIndex::first_funder(const std::string& wallet) const {
  auto it = edges_.find(wallet);
  if (it == edges_.end()) return std::nullopt;
  return it->second.first_funder;
}

std::vector<FundingEdge> FundingIndex::edges() const {
  std::vector<FundingEdge> out;
  out.reserve(edges_.size());
  for (const auto& [_, e] : edges_) out.push_back(e);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.wallet < b.wallet; });
  return out;
}

ParsedFunding load_funding_graph(std::istream& in) {
  ParsedFunding result;
  auto& rep = result.report;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    ++rep.lines;
    try {
      const json obj = parse_object(line);
      FundingEdge e{require_string(obj, "wallet"), require_string(obj, "first_funder"),
                    require_timestamp(obj, "funded_at")};
      ++rep.accepted;
      if (!result.index.insert(e))
        rep.diagnostics.warn(kStage, "second funding edge for wallet " + e.wallet + "; keeping the earliest",
                             line_no);
    } catch (const std::exception& e) {
      ++rep.rejected;
      rep.diagnostics.warn(kStage, std::string("rejected funding edge: ") + e.what(), line_no);
    }
  }
  return result;
}

ParsedFunding load_funding_graph_file(const std::string& path) {
  auto in = open_or_throw(path);
  return load_funding_graph(in);
}

std::string serialize_funding_edge(const FundingEdge& e) {
  ordered_json obj;
  obj["wallet"] = e.wallet;
  obj["first_funder"] = e.first_funder;
  obj["funded_at"] = e.funded_at;
  return obj.dump();
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::dex_swap: return "dex_swap";
    case Category::dex_liquidity: return "dex_liquidity";
    case Category::lending: return "lending";
    case Category::cex: return "cex";
    case Category::mixer: return "mixer";
    case Category::other: return "other";
  }
  return "other";
}

std::optional<Category> parse_category(std::string_view s) {
  for (auto c : {Category::dex_swap, Category::dex_liquidity, Category::lending, Category::cex, Category::mixer,
                 Category::other})
    if (to_string(c) == s) return c;
  return std::nullopt;
}

bool CategoryMap::insert(std::string address, Category category) {
  return map_.try_emplace(std::move(address), category).second;
}

std::optional<Category> CategoryMap::lookup(const std::string& address) const {
  auto it = map_.find(address);
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

std::unordered_set<std::string> CategoryMap::exclusions() const {
  std::unordered_set<std::string> out;
  for (const auto& [addr, cat] : map_)
    if (cat == Category::cex || cat == Category::mixer) out.insert(addr);
  return out;
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\"");
  auto e = s.find_last_not_of(" \t\r\"");
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

ParsedCategories load_categories(std::istream& in) {
  ParsedCategories result;
  auto& rep = result.report;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const auto comma = line.find(',');
    const std::string address = trim(std::string_view(line).substr(0, comma));
    const std::string cat =
        comma == std::string::npos ? std::string{} : trim(std::string_view(line).substr(comma + 1));
    if (line_no == 1 && address == "address" && cat == "category") continue;  // header
    ++rep.lines;
    if (comma == std::string::npos || address.empty()) {
      ++rep.rejected;
      rep.diagnostics.warn(kStage, "rejected category line: expected address,category", line_no);
      continue;
    }
    auto parsed = parse_category(cat);
    if (!parsed) {
      ++rep.rejected;
      rep.diagnostics.warn(kStage, "rejected category line: unknown category '" + cat + "'", line_no);
      continue;
    }
    ++rep.accepted;
    if (!result.map.insert(address, *parsed))
      rep.diagnostics.warn(kStage, "duplicate category for " + address + "; keeping the first", line_no);
  }
  return result;
}

ParsedCategories load_categories_file(const std::string& path) {
  auto in = open_or_throw(path);
  return load_categories(in);
}

void write_categories(std::ostream& out, const CategoryMap& map) {
  out << "address,category\n";
  for (const auto& [addr, cat] : map.entries()) out << addr << ',' << to_string(cat) << '\n';
}

ParsedWalletTxs load_wallet_txs(std::istream& in) {
  ParsedWalletTxs result;
  auto& rep = result.report;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    ++rep.lines;
    try {
      const json obj = parse_object(line);
      WalletTx tx;
      tx.wallet = require_string(obj, "wallet");
      tx.ts = require_timestamp(obj, "ts");
      tx.counterparty = require_string(obj, "counterparty");
      tx.value_eth = require_number(obj, "value_eth");
      const auto kind = require_string(obj, "kind");
      if (kind == "transfer")
        tx.kind = WalletTxKind::transfer;
      else if (kind == "contract_call")
        tx.kind = WalletTxKind::contract_call;
      else
        throw Error("unknown kind '" + kind + "'");
      if (tx.ts <= 0) throw Error("timestamp must be positive");
      result.txs.push_back(std::move(tx));
      ++rep.accepted;
    } catch (const std::exception& e) {
      ++rep.rejected;
      rep.diagnostics.warn(kStage, std::string("rejected wallet tx: ") + e.what(), line_no);
    }
  }
  std::sort(result.txs.begin(), result.txs.end(), [](const WalletTx& a, const WalletTx& b) {
    return std::tie(a.wallet, a.ts, a.counterparty, a.value_eth) < std::tie(b.wallet, b.ts, b.counterparty, b.value_eth);
  });
  return result;
}

ParsedWalletTxs load_wallet_txs_file(const std::string& path) {
  auto in = open_or_throw(path);
  return load_wallet_txs(in);
}

std::string serialize_wallet_tx(const WalletTx& tx) {
  ordered_json obj;
  obj["wallet"] = tx.wallet;
  obj["ts"] = tx.ts;
  obj["counterparty"] = tx.counterparty;
  obj["value_eth"] = tx.value_eth;
  obj["kind"] = tx.kind == WalletTxKind::transfer ? "transfer" : "contract_call";
  return obj.dump();
}

}  // namespace bubblescope::ingest
