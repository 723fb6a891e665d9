#pragma once

// CSV and plain-text artifacts. Numbers are written in shortest round-trip
// form so that re-reading a file reproduces the values exactly and output
// bytes are a pure function of the values.

#include "bubblescope/agents.hpp"
#include "bubblescope/backtest.hpp"
#include "bubblescope/econometrics.hpp"
#include "bubblescope/events.hpp"
#include "bubblescope/panel.hpp"
#include "bubblescope/washtrade.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace bubblescope::io {

std::string format_number(double x);
std::string format_number(const std::optional<double>& x);  // empty when absent

// Minimal CSV: no quoting, first line is the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  [[nodiscard]] std::size_t column(std::string_view name) const;  // throws if missing
};
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

void write_panel(std::ostream& out, const panel::Panel& panel);
panel::Panel read_panel(std::istream& in);
panel::Panel read_panel_file(const std::string& path);
void write_stats(std::ostream& out, const panel::StatsTable& stats);

void write_events(std::ostream& out, const std::vector<events::EventRow>& rows);
std::vector<events::EventRow> read_events(std::istream& in);
std::vector<events::EventRow> read_events_file(const std::string& path);

void write_flags(std::ostream& out, const std::vector<wash::WashFlag>& flags);
std::vector<wash::WashFlag> read_flags_file(const std::string& path);
void write_benford(std::ostream& out, const wash::BenfordResult& r);

void write_participations(std::ostream& out, const std::vector<agents::EventParticipation>& parts,
                          const std::vector<std::set<std::string>>& flags);
void write_agent_records(std::ostream& out, const std::vector<agents::AgentEventRecord>& records);
void write_ownership(std::ostream& out, const agents::OwnershipSeries& series);
void write_wallet_stats(std::ostream& out, const std::vector<agents::WalletStats>& stats);
void write_comparison(std::ostream& out, const std::vector<agents::GroupComparison>& rows);

// Long format: one line per (specification, term).
void write_regressions_csv(std::ostream& out, const std::string& table, const std::vector<econ::RegressionResult>& rs);
// Side-by-side coefficient table with t-stats in parentheses.
void write_regressions_text(std::ostream& out, const std::string& title, const std::vector<econ::RegressionResult>& rs);

void write_market_factor(std::ostream& out, const std::vector<econ::MarketFactorResult>& rs);
void write_pnl(std::ostream& out, const backtest::BacktestResult& result);

// Writes via a temporary file and rename so readers never see partial output.
void write_file(const std::string& path, const std::function<void(std::ostream&)>& body);

}  // namespace bubblescope::io
