#include "bubblescope/panel.hpp"

#include <algorithm>
#include <cmath>

namespace bubblescope::panel {

namespace {
constexpr const char* kStage = "panel";
}

Panel::Panel(std::vector<PanelRow> rows) : rows_(std::move(rows)) { reindex(); }

void Panel::reindex() {
  ranges_.clear();
  std::size_t i = 0;
  while (i < rows_.size()) {
    std::size_t j = i;
    while (j < rows_.size() && rows_[j].collection == rows_[i].collection) ++j;
    if (!ranges_.emplace(rows_[i].collection, std::make_pair(i, j)).second)
      throw Error("panel rows for collection " + rows_[i].collection + " are not contiguous");
    i = j;
  }
}

std::vector<std::string> Panel::collections() const {
  std::vector<std::string> out;
  for (const auto& [c, _] : ranges_) out.push_back(c);
  return out;
}

std::span<const PanelRow> Panel::series(const std::string& collection) const {
  auto it = ranges_.find(collection);
  if (it == ranges_.end()) return {};
  return std::span<const PanelRow>(rows_).subspan(it->second.first, it->second.second - it->second.first);
}

const PanelRow* Panel::at(const std::string& collection, HourIndex hour) const {
  auto s = series(collection);
  if (s.empty()) return nullptr;
  const HourIndex off = hour - s.front().hour;
  if (off < 0 || off >= static_cast<HourIndex>(s.size())) return nullptr;
  return &s[static_cast<std::size_t>(off)];
}

namespace {

struct CollectionBuild {
  std::vector<PanelRow> rows;
  Diagnostics diagnostics;
};

CollectionBuild build_collection(const ingest::TransferLog& log, const std::string& collection) {
  CollectionBuild out;
  const auto& idx = log.indices_of(collection);
  if (idx.empty()) return out;
  const HourIndex first = log[idx.front()].hour();
  const HourIndex last = log[idx.back()].hour();
  const auto n_hours = static_cast<std::size_t>(last - first + 1);

  std::vector<double> volume(n_hours, 0.0), sales(n_hours, 0.0), minted(n_hours, 0.0);
  for (auto i : idx) {
    const auto& t = log[i];
    const auto k = static_cast<std::size_t>(t.hour() - first);
    if (t.is_mint()) minted[k] += 1.0;
    if (t.is_trade()) {
      volume[k] += t.price_eth;
      sales[k] += 1.0;
    }
  }

  out.rows.resize(n_hours);
  std::optional<double> carried;
  double supply = 0.0;
  bool warned_supply = false;
  for (std::size_t k = 0; k < n_hours; ++k) {
    auto& row = out.rows[k];
    row.collection = collection;
    row.hour = first + static_cast<HourIndex>(k);
    row.volume = volume[k];
    row.sales = sales[k];
    row.minted = minted[k];
    supply += minted[k];
    row.supply = supply;
    row.age_hours = static_cast<double>(k);
    row.traded = sales[k] > 0.0;
    if (row.traded) {
      const double p = volume[k] / sales[k];
      if (carried) row.ret = p / *carried - 1.0;
      row.price = p;
      carried = p;
    } else if (carried) {
      row.price = carried;
      row.ret = 0.0;
    }
    if (supply > 0.0) {
      row.turnover = sales[k] / supply * 100.0;
    } else if (sales[k] > 0.0 && !warned_supply) {
      out.diagnostics.warn(kStage, "collection " + collection + " trades before any mint; turnover undefined");
      warned_supply = true;
    }
  }
  return out;
}

}  // namespace

PanelBuild build_panel(const ingest::TransferLog& log, int threads) {
  const auto collections = log.collections();
  std::vector<CollectionBuild> parts(collections.size());
  parallel_for(collections.size(), threads, [&](std::size_t i) { parts[i] = build_collection(log, collections[i]); });

  PanelBuild result;
  std::vector<PanelRow> rows;
  std::size_t total = 0;
  for (const auto& p : parts) total += p.rows.size();
  rows.reserve(total);
  for (auto& p : parts) {
    std::move(p.rows.begin(), p.rows.end(), std::back_inserter(rows));
    result.diagnostics.append(p.diagnostics);
  }
  result.panel = Panel(std::move(rows));
  return result;
}

std::string_view to_string(Variable v) {
  switch (v) {
    case Variable::price: return "price";
    case Variable::floor: return "floor";
    case Variable::ret: return "ret";
    case Variable::volume: return "volume";
    case Variable::sales: return "sales";
    case Variable::minted: return "minted";
    case Variable::supply: return "supply";
    case Variable::turnover: return "turnover";
    case Variable::mcap: return "mcap";
    case Variable::age: return "age_hours";
  }
  return "?";
}

std::optional<double> value_of(const PanelRow& row, Variable v) {
  switch (v) {
    case Variable::price: return row.price;
    case Variable::floor: return row.floor;
    case Variable::ret: return row.ret;
    case Variable::volume: return row.volume;
    case Variable::sales: return row.sales;
    case Variable::minted: return row.minted;
    case Variable::supply: return row.supply;
    case Variable::turnover: return row.turnover;
    case Variable::mcap: return row.mcap;
    case Variable::age: return row.age_hours;
  }
  return std::nullopt;
}

namespace {

void set_value(PanelRow& row, Variable v, double x) {
  switch (v) {
    case Variable::price: row.price = x; break;
    case Variable::floor: row.floor = x; break;
    case Variable::ret: row.ret = x; break;
    case Variable::volume: row.volume = x; break;
    case Variable::sales: row.sales = x; break;
    case Variable::minted: row.minted = x; break;
    case Variable::supply: row.supply = x; break;
    case Variable::turnover: row.turnover = x; break;
    case Variable::mcap: row.mcap = x; break;
    case Variable::age: row.age_hours = x; break;
  }
}

std::vector<double> column(const Panel& panel, Variable v) {
  std::vector<double> xs;
  xs.reserve(panel.size());
  for (const auto& r : panel.rows())
    if (auto x = value_of(r, v)) xs.push_back(*x);
  return xs;
}

double nearest_order_statistic(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  return sorted[static_cast<std::size_t>(std::floor(h + 0.5))];
}

}  // namespace

WinsorizeResult winsorize(const Panel& panel, double level) {
  if (!(level >= 0.0 && level < 0.5)) throw Error("winsorize level must lie in [0, 0.5)");
  WinsorizeResult result;
  result.panel = panel;
  if (level == 0.0) return result;
  const double min_n = 1.0 / level;
  if (static_cast<double>(panel.size()) < min_n) {
    result.diagnostics.warn(kStage, "fewer than 1/level observations; winsorization skipped");
    return result;
  }
  auto& rows = result.panel.mutable_rows();
  for (auto v : kAllVariables) {
    auto xs = column(panel, v);
    if (xs.empty()) continue;
    if (static_cast<double>(xs.size()) < min_n) {
      result.diagnostics.warn(kStage, std::string("too few observations of ") + std::string(to_string(v)) +
                                          "; left unclipped");
      continue;
    }
    std::sort(xs.begin(), xs.end());
    const double lo = nearest_order_statistic(xs, level);
    const double hi = nearest_order_statistic(xs, 1.0 - level);
    for (auto& r : rows)
      if (auto x = value_of(r, v)) set_value(r, v, std::clamp(*x, lo, hi));
  }
  result.applied = true;
  return result;
}

StatsTable summary_stats(const Panel& panel) {
  if (panel.empty()) throw Error("summary statistics of an empty panel");
  StatsTable table;
  for (auto v : kAllVariables) {
    auto xs = column(panel, v);
    if (xs.empty()) continue;
    VariableStats s;
    s.variable = v;
    s.n = xs.size();
    s.mean = mean(xs);
    s.sd = sample_sd(xs);
    std::sort(xs.begin(), xs.end());
    s.min = xs.front();
    s.max = xs.back();
    s.p25 = quantile_sorted(xs, 0.25);
    s.median = quantile_sorted(xs, 0.5);
    s.p75 = quantile_sorted(xs, 0.75);
    table.rows.push_back(s);
  }
  return table;
}

}  // namespace bubblescope::panel
