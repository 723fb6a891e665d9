#include "bubblescope/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace bubblescope::io {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string format_number(const std::optional<double>& x) { return x ? format_number(*x) : std::string(); }

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw Error("bad number '" + s + "' in " + what);
  return v;
}

std::optional<double> parse_optional(const std::string& s, const std::string& what) {
  if (s.empty()) return std::nullopt;
  return parse_double(s, what);
}

template <typename... Ts>
void row(std::ostream& out, const Ts&... fields) {
  bool first = true;
  ((out << (first ? "" : ",") << fields, first = false), ...);
  out << '\n';
}

const char* bool_str(bool b) { return b ? "1" : "0"; }

}  // namespace

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw Error("csv is missing column '" + std::string(name) + "'");
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw Error("csv row has " + std::to_string(fields.size()) + " fields, header has " +
                  std::to_string(t.header.size()));
    t.rows.push_back(std::move(fields));
  }
  if (!have_header) throw Error("csv input is empty");
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_csv(in);
}

void write_panel(std::ostream& out, const panel::Panel& p) {
  row(out, "collection", "hour", "hour_utc", "price", "floor", "ret", "volume", "sales", "minted", "supply",
      "turnover", "mcap", "age_hours", "traded");
  for (const auto& r : p.rows())
    row(out, r.collection, r.hour, format_utc_hour(r.hour), format_number(r.price), format_number(r.floor),
        format_number(r.ret), format_number(r.volume), format_number(r.sales), format_number(r.minted),
        format_number(r.supply), format_number(r.turnover), format_number(r.mcap), format_number(r.age_hours),
        bool_str(r.traded));
}

panel::Panel read_panel(std::istream& in) {
  const auto t = read_csv(in);
  const std::string what = "panel.csv";
  auto col = [&](std::string_view n) { return t.column(n); };
  const auto c_coll = col("collection"), c_hour = col("hour"), c_price = col("price"), c_floor = col("floor"),
             c_ret = col("ret"), c_vol = col("volume"), c_sales = col("sales"), c_mint = col("minted"),
             c_sup = col("supply"), c_turn = col("turnover"), c_mcap = col("mcap"), c_age = col("age_hours"),
             c_tr = col("traded");
  std::vector<panel::PanelRow> rows;
  rows.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    panel::PanelRow p;
    p.collection = r[c_coll];
    p.hour = static_cast<HourIndex>(parse_double(r[c_hour], what));
    p.price = parse_optional(r[c_price], what);
    p.floor = parse_optional(r[c_floor], what);
    p.ret = parse_optional(r[c_ret], what);
    p.volume = parse_double(r[c_vol], what);
    p.sales = parse_double(r[c_sales], what);
    p.minted = parse_double(r[c_mint], what);
    p.supply = parse_double(r[c_sup], what);
    p.turnover = parse_optional(r[c_turn], what);
    p.mcap = parse_optional(r[c_mcap], what);
    p.age_hours = parse_double(r[c_age], what);
    p.traded = r[c_tr] == "1";
    rows.push_back(std::move(p));
  }
  return panel::Panel(std::move(rows));
}

panel::Panel read_panel_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_panel(in);
}

void write_stats(std::ostream& out, const panel::StatsTable& stats) {
  row(out, "variable", "mean", "sd", "min", "p25", "median", "p75", "max", "n");
  for (const auto& s : stats.rows)
    row(out, panel::to_string(s.variable), format_number(s.mean), format_number(s.sd), format_number(s.min),
        format_number(s.p25), format_number(s.median), format_number(s.p75), format_number(s.max), s.n);
}

void write_events(std::ostream& out, const std::vector<events::EventRow>& rows) {
  row(out, "id", "collection", "t0", "t0_utc", "volume_eth", "active_wallets", "runup_ret", "ex_post_ret", "crash",
      "price_t0", "price_t1", "price_t24", "volatility", "turnover", "age_hours", "acceleration",
      "sophisticated_frac", "unique_owner_change", "wash_log_volume", "turnover_post", "amihud", "volatility_post");
  for (const auto& e : rows) {
    const auto& p = e.predictors;
    row(out, e.id, e.collection, e.t0, format_utc_hour(e.t0), format_number(e.volume_eth), e.active_wallets,
        format_number(e.runup_ret), format_number(e.ex_post_ret), bool_str(e.crash), format_number(e.price_t0),
        format_number(e.price_t1), format_number(e.price_t24), format_number(p.volatility), format_number(p.turnover),
        format_number(p.age_hours), format_number(p.acceleration), format_number(p.sophisticated_frac),
        format_number(p.unique_owner_change), format_number(p.wash_log_volume),
        format_number(e.liquidity.turnover_post), format_number(e.liquidity.amihud),
        format_number(e.liquidity.volatility_post));
  }
}

std::vector<events::EventRow> read_events(std::istream& in) {
  const auto t = read_csv(in);
  const std::string what = "events.csv";
  auto col = [&](std::string_view n) { return t.column(n); };
  const auto c_id = col("id"), c_coll = col("collection"), c_t0 = col("t0"), c_vol = col("volume_eth"),
             c_act = col("active_wallets"), c_run = col("runup_ret"), c_ex = col("ex_post_ret"), c_crash = col("crash"),
             c_p0 = col("price_t0"), c_p1 = col("price_t1"), c_p24 = col("price_t24"), c_v = col("volatility"),
             c_tu = col("turnover"), c_age = col("age_hours"), c_acc = col("acceleration"),
             c_so = col("sophisticated_frac"), c_uo = col("unique_owner_change"), c_wa = col("wash_log_volume"),
             c_tp = col("turnover_post"), c_am = col("amihud"), c_vp = col("volatility_post");
  std::vector<events::EventRow> out;
  for (const auto& r : t.rows) {
    events::EventRow e;
    e.id = r[c_id];
    e.collection = r[c_coll];
    e.t0 = static_cast<HourIndex>(parse_double(r[c_t0], what));
    e.volume_eth = parse_double(r[c_vol], what);
    e.active_wallets = static_cast<std::size_t>(parse_double(r[c_act], what));
    e.runup_ret = parse_double(r[c_run], what);
    e.ex_post_ret = parse_double(r[c_ex], what);
    e.crash = r[c_crash] == "1";
    e.price_t0 = parse_double(r[c_p0], what);
    e.price_t1 = parse_double(r[c_p1], what);
    e.price_t24 = parse_double(r[c_p24], what);
    e.predictors.volatility = parse_optional(r[c_v], what);
    e.predictors.turnover = parse_optional(r[c_tu], what);
    e.predictors.age_hours = parse_optional(r[c_age], what);
    e.predictors.acceleration = parse_optional(r[c_acc], what);
    e.predictors.sophisticated_frac = parse_optional(r[c_so], what);
    e.predictors.unique_owner_change = parse_optional(r[c_uo], what);
    e.predictors.wash_log_volume = parse_optional(r[c_wa], what);
    e.liquidity.turnover_post = parse_optional(r[c_tp], what);
    e.liquidity.amihud = parse_optional(r[c_am], what);
    e.liquidity.volatility_post = parse_double(r[c_vp], what);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<events::EventRow> read_events_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_events(in);
}

void write_flags(std::ostream& out, const std::vector<wash::WashFlag>& flags) {
  row(out, "tx_id", "token", "filter", "volume_eth", "collection", "ts");
  for (const auto& f : flags)
    row(out, f.tx_id, f.token, wash::describe(f.filters), format_number(f.volume_eth), f.collection, f.ts);
}

std::vector<wash::WashFlag> read_flags_file(const std::string& path) {
  const auto t = read_csv_file(path);
  const auto c_tx = t.column("tx_id"), c_tok = t.column("token"), c_f = t.column("filter"),
             c_v = t.column("volume_eth"), c_c = t.column("collection"), c_ts = t.column("ts");
  std::vector<wash::WashFlag> out;
  for (const auto& r : t.rows) {
    wash::WashFlag f;
    f.tx_id = r[c_tx];
    f.token = r[c_tok];
    f.filters = wash::parse_filters(r[c_f]);
    f.volume_eth = parse_double(r[c_v], path);
    f.collection = r[c_c];
    f.ts = static_cast<Timestamp>(parse_double(r[c_ts], path));
    out.push_back(std::move(f));
  }
  return out;
}

void write_benford(std::ostream& out, const wash::BenfordResult& r) {
  row(out, "digit", "observed", "expected");
  for (std::size_t d = 0; d < 9; ++d) row(out, d + 1, format_number(r.observed[d]), format_number(r.expected[d]));
  row(out, "chi2", format_number(r.chi2), "");
  row(out, "p_value", format_number(r.p_value), "");
  row(out, "n", r.n, "");
}

void write_participations(std::ostream& out, const std::vector<agents::EventParticipation>& parts,
                          const std::vector<std::set<std::string>>& flags) {
  row(out, "event", "t0", "wallet", "cost", "proceeds", "profit_pct", "n_buys", "n_sells", "marked_at_carried",
      "sophisticated");
  for (std::size_t i = 0; i < parts.size(); ++i)
    for (const auto& [w, p] : parts[i].profits)
      row(out, parts[i].event_id, parts[i].t0, w, format_number(p.cost), format_number(p.proceeds),
          format_number(p.profit_pct), p.n_buys, p.n_sells, bool_str(p.marked_at_carried),
          bool_str(flags[i].count(w) > 0));
}

void write_agent_records(std::ostream& out, const std::vector<agents::AgentEventRecord>& records) {
  row(out, "wallet", "event", "profit_pct", "n_buys", "n_sells", "sophisticated", "sophisticated_ever", "ts", "ts_buy",
      "ts_sell", "ts_rank", "ts_buy_rank", "ts_sell_rank");
  for (const auto& r : records)
    row(out, r.wallet, r.event_id, format_number(r.profit_pct), r.n_buys, r.n_sells, bool_str(r.sophisticated),
        bool_str(r.sophisticated_ever), format_number(r.ts), format_number(r.ts_buy), format_number(r.ts_sell),
        format_number(r.ts_rank), format_number(r.ts_buy_rank), format_number(r.ts_sell_rank));
}

void write_ownership(std::ostream& out, const agents::OwnershipSeries& series) {
  row(out, "collection", "hour", "unique_owners", "supply", "fraction");
  for (const auto& p : series.points)
    row(out, p.collection, p.hour, p.unique_owners, p.supply, format_number(p.fraction));
}

void write_wallet_stats(std::ostream& out, const std::vector<agents::WalletStats>& stats) {
  out << "wallet";
  for (auto m : agents::kWalletMetrics) out << ',' << m;
  out << '\n';
  for (const auto& s : stats) {
    out << s.wallet;
    for (std::size_t m = 0; m < agents::kWalletMetrics.size(); ++m) out << ',' << format_number(agents::metric_value(s, m));
    out << '\n';
  }
}

void write_comparison(std::ostream& out, const std::vector<agents::GroupComparison>& rows) {
  row(out, "metric", "mean_sophisticated", "mean_other", "difference", "t_stat", "n_sophisticated", "n_other");
  for (const auto& g : rows)
    row(out, g.metric, format_number(g.mean_sophisticated), format_number(g.mean_other), format_number(g.difference),
        format_number(g.t_stat), g.n_sophisticated, g.n_other);
}

void write_regressions_csv(std::ostream& out, const std::string& table, const std::vector<econ::RegressionResult>& rs) {
  row(out, "table", "spec", "dependent", "se_mode", "n", "r2", "low_power", "term", "beta", "se", "t");
  for (const auto& r : rs)
    for (std::size_t j = 0; j < r.names.size(); ++j)
      row(out, table, r.label, r.dependent, econ::to_string(r.se_mode), r.n, format_number(r.r2),
          bool_str(r.low_power), r.names[j], format_number(r.beta[j]), format_number(r.se[j]), format_number(r.t[j]));
}

void write_regressions_text(std::ostream& out, const std::string& title, const std::vector<econ::RegressionResult>& rs) {
  std::vector<std::string> terms;
  for (const auto& r : rs)
    for (const auto& n : r.names)
      if (std::find(terms.begin(), terms.end(), n) == terms.end()) terms.push_back(n);
  constexpr int kLabel = 22, kCell = 14;
  char buf[64];
  auto cell = [&](const std::string& s) {
    std::snprintf(buf, sizeof buf, "%*s", kCell, s.c_str());
    out << buf;
  };
  auto label = [&](const std::string& s) {
    std::snprintf(buf, sizeof buf, "%-*s", kLabel, s.c_str());
    out << buf;
  };
  auto num = [&](double x, const char* fmt) {
    char b[32];
    std::snprintf(b, sizeof b, fmt, x);
    return std::string(b);
  };
  out << title << '\n';
  label("");
  for (const auto& r : rs) cell(r.label);
  out << '\n';
  label("dependent");
  for (const auto& r : rs) cell(r.dependent);
  out << '\n';
  for (const auto& term : terms) {
    label(term);
    for (const auto& r : rs) {
      auto i = r.index_of(term);
      cell(i ? num(r.beta[*i], "%.4f") : "");
    }
    out << '\n';
    label("");
    for (const auto& r : rs) {
      auto i = r.index_of(term);
      cell(i ? "(" + num(r.t[*i], "%.2f") + ")" : "");
    }
    out << '\n';
  }
  label("R2");
  for (const auto& r : rs) cell(num(r.r2, "%.4f"));
  out << '\n';
  label("N");
  for (const auto& r : rs) cell(std::to_string(r.n) + (r.low_power ? "*" : ""));
  out << '\n';
  label("SE");
  for (const auto& r : rs) cell(std::string(econ::to_string(r.se_mode)));
  out << '\n';
}

void write_market_factor(std::ostream& out, const std::vector<econ::MarketFactorResult>& rs) {
  row(out, "frequency", "collections", "dropped", "mean_abs_beta", "median_abs_beta", "mean_r2", "median_r2",
      "pc1_explained", "top5_explained");
  for (const auto& r : rs)
    row(out, econ::to_string(r.frequency), r.betas.size(), r.dropped, format_number(r.mean_abs_beta),
        format_number(r.median_abs_beta), format_number(r.mean_r2), format_number(r.median_r2),
        format_number(r.explained.empty() ? 0.0 : r.explained.front()), format_number(r.top5_explained));
}

void write_pnl(std::ostream& out, const backtest::BacktestResult& result) {
  row(out, "model", "portfolio", "event", "t0", "t0_utc", "prediction", "entry", "exit", "pnl_eth", "cum_pnl");
  for (const auto& run : result.runs)
    for (std::size_t i = 0; i < run.trades.size(); ++i) {
      const auto& t = run.trades[i];
      row(out, econ::to_string(run.model), backtest::to_string(run.portfolio), t.event_id, t.t0,
          format_utc_hour(t.t0), format_number(t.prediction), format_number(t.entry), format_number(t.exit),
          format_number(t.pnl_eth), format_number(run.cum_pnl[i]));
    }
}

void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp.string());
    body(out);
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace bubblescope::io
