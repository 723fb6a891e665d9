#pragma once

// Hourly collection panel built from the transfer log.
//
// Hours with no trades carry the last traded price forward with ret = 0, so
// cumulative returns are defined over any calendar window. Before the first
// trade of a collection the price (and return) is absent.

#include "bubblescope/common.hpp"
#include "bubblescope/ingest.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bubblescope::panel {

struct PanelRow {
  std::string collection;
  HourIndex hour = 0;
  std::optional<double> price;  // mean trade price (ETH), carried through idle hours
  std::optional<double> floor;  // listing floor; absent without a listing feed
  std::optional<double> ret;    // vs. previous carried price
  double volume = 0.0;          // ETH
  double sales = 0.0;
  double minted = 0.0;
  double supply = 0.0;             // cumulative mints
  std::optional<double> turnover;  // sales / supply, percent
  std::optional<double> mcap;      // supply * floor
  double age_hours = 0.0;
  bool traded = false;  // at least one trade this hour

  friend bool operator==(const PanelRow&, const PanelRow&) = default;
};

// Rows are grouped by collection (lexicographic) and contiguous in hour.
class Panel {
 public:
  Panel() = default;
  explicit Panel(std::vector<PanelRow> rows);

  [[nodiscard]] std::span<const PanelRow> rows() const noexcept { return rows_; }
  [[nodiscard]] std::vector<PanelRow>& mutable_rows() noexcept { return rows_; }
  [[nodiscard]] std::size_t size() const noexcept { return rows_.size(); }
  [[nodiscard]] bool empty() const noexcept { return rows_.empty(); }

  [[nodiscard]] std::vector<std::string> collections() const;
  // Contiguous rows of one collection; empty span if unknown.
  [[nodiscard]] std::span<const PanelRow> series(const std::string& collection) const;
  // Row of `collection` at `hour`, if inside its range.
  [[nodiscard]] const PanelRow* at(const std::string& collection, HourIndex hour) const;

  friend bool operator==(const Panel& a, const Panel& b) { return a.rows_ == b.rows_; }

 private:
  void reindex();

  std::vector<PanelRow> rows_;
  std::map<std::string, std::pair<std::size_t, std::size_t>> ranges_;  // [begin, end)
};

struct PanelBuild {
  Panel panel;
  Diagnostics diagnostics;
};

PanelBuild build_panel(const ingest::TransferLog& log, int threads = 1);

// Variables summarised in the statistics table, in output order.
enum class Variable { price, floor, ret, volume, sales, minted, supply, turnover, mcap, age };
inline constexpr std::array<Variable, 10> kAllVariables = {Variable::price,  Variable::floor,  Variable::ret,
                                                           Variable::volume, Variable::sales,  Variable::minted,
                                                           Variable::supply, Variable::turnover, Variable::mcap,
                                                           Variable::age};
std::string_view to_string(Variable v);
std::optional<double> value_of(const PanelRow& row, Variable v);

struct WinsorizeResult {
  Panel panel;
  Diagnostics diagnostics;
  bool applied = false;
};

// Clips every variable at its level / (1 - level) empirical quantiles over
// the whole panel. The quantile is the order statistic nearest to the
// (n-1)p position, so the bounds are observed values and a second pass at
// the same level changes nothing.
WinsorizeResult winsorize(const Panel& panel, double level = 0.01);

struct VariableStats {
  Variable variable;
  double mean = 0, sd = 0, min = 0, p25 = 0, median = 0, p75 = 0, max = 0;
  std::size_t n = 0;
};

struct StatsTable {
  std::vector<VariableStats> rows;  // variables with at least one observation
};

StatsTable summary_stats(const Panel& panel);

}  // namespace bubblescope::panel
