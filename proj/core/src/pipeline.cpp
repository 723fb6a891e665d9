#include "bubblescope/pipeline.hpp"

#include "bubblescope/io.hpp"

#include "json.hpp"
#include "toml.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#ifndef BUBBLESCOPE_VERSION
#define BUBBLESCOPE_VERSION "0.0.0"
#endif

namespace bubblescope::pipeline {

namespace fs = std::filesystem;

std::string_view version() { return BUBBLESCOPE_VERSION; }

Config::Config() : split_hour(hour_of(parse_utc("2021-12-31T23"))) {}

bool Config::wants(std::string_view stage) const {
  if (!stages.empty()) return std::find(stages.begin(), stages.end(), stage) != stages.end();
  if (stage == "simulate") return has_synth && input_dir.empty();
  return true;
}

std::string Config::canonical() const {
  std::ostringstream o;
  auto kv = [&](std::string_view k, const auto& v) { o << k << " = " << v << '\n'; };
  auto num = [](double x) { return io::format_number(x); };
  kv("run.input", input_dir);
  std::string st;
  for (const auto& s : stages) st += (st.empty() ? "" : ",") + s;
  kv("run.stages", st);
  kv("panel.winsorize", num(winsorize));
  kv("detect.runup_threshold", num(detect.runup_threshold));
  kv("detect.lookback_hours", detect.lookback);
  kv("detect.min_volume_eth", num(detect.min_volume_eth));
  kv("detect.half_window", detect.half_window);
  kv("detect.crash_threshold", num(detect.crash_threshold));
  kv("detect.acceleration", events::to_string(acceleration));
  kv("agents.min_events", sophistication.min_events);
  kv("agents.lookback_events", sophistication.lookback);
  kv("agents.min_avg_profit", num(sophistication.min_avg_profit));
  kv("agents.as_of", as_of ? std::to_string(*as_of) : std::string("last_transfer"));
  kv("backtest.split", format_utc_hour(split_hour));
  kv("regress.max_cluster_days", max_cluster_days);
  if (has_synth) {
    kv("synth.seed", synth.seed);
    kv("synth.n_collections", synth.n_collections);
    kv("synth.n_wallets", synth.n_wallets);
    kv("synth.horizon_hours", synth.horizon_hours);
    kv("synth.runup_rate", num(synth.runup_rate));
    kv("synth.crash_prob_base", num(synth.crash_prob_base));
    kv("synth.wash_loop_count", synth.wash_loop_count);
    kv("synth.sophisticated_share", num(synth.sophisticated_share));
    kv("synth.max_sophisticated_per_event", synth.max_sophisticated_per_event);
    kv("synth.start", synth.start);
    for (const auto& [k, v] : synth.planted_effects) kv("synth.planted_effects." + k, num(v));
  }
  return o.str();
}

namespace {

void check_keys(const toml::table& t, std::string_view section, std::initializer_list<std::string_view> allowed) {
  for (const auto& [k, v] : t) {
    if (std::find(allowed.begin(), allowed.end(), k.str()) == allowed.end())
      throw Error("config: unknown key '" + std::string(k.str()) + "' in [" + std::string(section) + "]");
  }
}

template <typename T>
void read(const toml::table& t, std::string_view key, T& target) {
  const auto* node = t.get(key);
  if (!node) return;
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = node->value<double>()) {
      target = *v;
      return;
    }
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = node->value<std::string>()) {
      target = *v;
      return;
    }
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto v = node->value<bool>()) {
      target = *v;
      return;
    }
  } else {
    if (auto v = node->value<std::int64_t>()) {
      target = static_cast<T>(*v);
      return;
    }
  }
  throw Error("config: key '" + std::string(key) + "' has the wrong type");
}

const toml::table* section(const toml::table& root, std::string_view name) {
  const auto* node = root.get(name);
  if (!node) return nullptr;
  if (!node->is_table()) throw Error("config: '" + std::string(name) + "' must be a table");
  return node->as_table();
}

synth::SynthConfig synth_from(const toml::table& s) {
  check_keys(s, "synth",
             {"seed", "n_collections", "n_wallets", "horizon_hours", "runup_rate", "crash_prob_base", "planted_effects",
              "wash_loop_count", "sophisticated_share", "max_sophisticated_per_event", "start"});
  synth::SynthConfig c;
  std::int64_t seed = static_cast<std::int64_t>(c.seed);
  read(s, "seed", seed);
  if (seed < 0) throw Error("config: synth.seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  read(s, "n_collections", c.n_collections);
  read(s, "n_wallets", c.n_wallets);
  read(s, "horizon_hours", c.horizon_hours);
  read(s, "runup_rate", c.runup_rate);
  read(s, "crash_prob_base", c.crash_prob_base);
  read(s, "wash_loop_count", c.wash_loop_count);
  read(s, "sophisticated_share", c.sophisticated_share);
  read(s, "max_sophisticated_per_event", c.max_sophisticated_per_event);
  std::string start;
  read(s, "start", start);
  if (!start.empty()) c.start = parse_utc(start);
  if (const auto* eff = section(s, "planted_effects")) {
    for (const auto& [k, v] : *eff) {
      auto x = v.value<double>();
      if (!x) throw Error("config: planted effect '" + std::string(k.str()) + "' must be a number");
      c.planted_effects[std::string(k.str())] = *x;
    }
  }
  synth::validate(c);
  return c;
}

toml::table parse_toml(const std::string& text, const std::string& origin) {
  try {
    return toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    std::ostringstream o;
    o << "config " << origin << ":" << e.source().begin.line << ": " << e.description();
    throw Error(o.str());
  }
}

}  // namespace

Config parse_config(const std::string& text, const std::string& origin) {
  const auto root = parse_toml(text, origin);
  check_keys(root, "root", {"run", "synth", "panel", "detect", "agents", "backtest", "regress"});
  Config c;
  if (const auto* r = section(root, "run")) {
    check_keys(*r, "run", {"input", "out", "threads", "stages"});
    read(*r, "input", c.input_dir);
    read(*r, "out", c.out_dir);
    read(*r, "threads", c.threads);
    if (const auto* st = r->get("stages")) {
      const auto* arr = st->as_array();
      if (!arr) throw Error("config: run.stages must be an array of stage names");
      for (const auto& v : *arr) {
        auto name = v.value<std::string>();
        if (!name || std::find(kStages.begin(), kStages.end(), *name) == kStages.end())
          throw Error("config: unknown stage in run.stages");
        c.stages.push_back(*name);
      }
    }
  }
  if (const auto* s = section(root, "synth")) {
    c.has_synth = true;
    c.synth = synth_from(*s);
  }
  if (const auto* p = section(root, "panel")) {
    check_keys(*p, "panel", {"winsorize"});
    read(*p, "winsorize", c.winsorize);
  }
  if (const auto* d = section(root, "detect")) {
    check_keys(*d, "detect",
               {"runup_threshold", "lookback_hours", "min_volume_eth", "half_window", "crash_threshold", "acceleration"});
    read(*d, "runup_threshold", c.detect.runup_threshold);
    read(*d, "lookback_hours", c.detect.lookback);
    read(*d, "min_volume_eth", c.detect.min_volume_eth);
    read(*d, "half_window", c.detect.half_window);
    read(*d, "crash_threshold", c.detect.crash_threshold);
    std::string acc;
    read(*d, "acceleration", acc);
    if (!acc.empty()) c.acceleration = events::parse_acceleration_variant(acc);
  }
  if (const auto* a = section(root, "agents")) {
    check_keys(*a, "agents", {"min_events", "lookback_events", "min_avg_profit", "as_of"});
    read(*a, "min_events", c.sophistication.min_events);
    read(*a, "lookback_events", c.sophistication.lookback);
    read(*a, "min_avg_profit", c.sophistication.min_avg_profit);
    std::string as_of;
    read(*a, "as_of", as_of);
    if (!as_of.empty()) c.as_of = parse_utc(as_of);
  }
  if (const auto* b = section(root, "backtest")) {
    check_keys(*b, "backtest", {"split"});
    std::string split;
    read(*b, "split", split);
    if (!split.empty()) c.split_hour = hour_of(parse_utc(split));
  }
  if (const auto* g = section(root, "regress")) {
    check_keys(*g, "regress", {"max_cluster_days"});
    read(*g, "max_cluster_days", c.max_cluster_days);
  }
  if (c.threads < 1) throw Error("config: run.threads must be at least 1");
  if (c.max_cluster_days < 1 || c.max_cluster_days > 10) throw Error("config: regress.max_cluster_days must be 1..10");
  if (c.sophistication.min_events < 1 || c.sophistication.lookback < 1)
    throw Error("config: agents.min_events and agents.lookback_events must be positive");
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

synth::SynthConfig parse_synth_config(const std::string& text, const std::string& origin) {
  const auto root = parse_toml(text, origin);
  if (const auto* s = section(root, "synth")) return synth_from(*s);
  return synth_from(root);
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  std::string out;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    out += buf;
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string out;
  char hex[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(hex, sizeof hex, "%02x", md[i]);
    out += hex;
  }
  return out;
}

Inputs load_inputs(const std::string& transfers, const std::string& funding, const std::string& categories,
                   const std::string& wallet_txs) {
  Inputs in;
  auto parsed = ingest::parse_transfers_file(transfers);
  in.log = std::move(parsed.log);
  in.transfer_report = std::move(parsed.report);
  in.diagnostics.append(in.transfer_report.diagnostics);
  in.files["transfers.jsonl"] = transfers;
  if (!funding.empty()) {
    auto f = ingest::load_funding_graph_file(funding);
    in.funding = std::move(f.index);
    in.diagnostics.append(f.report.diagnostics);
    in.files["funding.jsonl"] = funding;
  }
  if (!categories.empty()) {
    auto c = ingest::load_categories_file(categories);
    in.categories = std::move(c.map);
    in.diagnostics.append(c.report.diagnostics);
    in.files["categories.csv"] = categories;
  }
  if (!wallet_txs.empty()) {
    auto w = ingest::load_wallet_txs_file(wallet_txs);
    in.wallet_txs = std::move(w.txs);
    in.diagnostics.append(w.report.diagnostics);
    in.files["wallet_tx.jsonl"] = wallet_txs;
  }
  return in;
}

Inputs load_inputs(const std::string& dir) {
  const fs::path d(dir);
  if (!fs::exists(d / "transfers.jsonl")) throw Error("input directory " + dir + " has no transfers.jsonl");
  auto opt = [&](const char* name) { return fs::exists(d / name) ? (d / name).string() : std::string(); };
  return load_inputs((d / "transfers.jsonl").string(), opt("funding.jsonl"), opt("categories.csv"),
                     opt("wallet_tx.jsonl"));
}

WashStage run_wash(const Inputs& in) {
  WashStage s;
  const ingest::FundingIndex empty_funding;
  const auto& funding = in.funding ? *in.funding : empty_funding;
  if (!in.funding) s.diagnostics.warn("wash", "no funding graph; common-funder filter skipped");
  const auto exclusions = in.categories ? in.categories->exclusions() : std::unordered_set<std::string>{};
  s.result = wash::flag_wash_trades(in.log, funding, exclusions);
  s.diagnostics.append(s.result.diagnostics);

  std::vector<double> prices;
  for (const auto& t : in.log.records())
    if (t.is_trade()) prices.push_back(t.price_eth);
  if (!prices.empty()) {
    s.benford = wash::benford_test(prices);
    s.diagnostics.append(s.benford->diagnostics);
  }
  try {
    s.powerlaw_alpha = wash::powerlaw_exponent(prices);
  } catch (const Error& e) {
    s.diagnostics.warn("wash", std::string("power-law fit skipped: ") + e.what());
  }
  return s;
}

AgentStage run_agents(const Inputs& in, const panel::Panel& panel, std::vector<events::EventRow>& rows,
                      const std::vector<wash::WashFlag>* flags, const Config& cfg) {
  AgentStage s;
  const auto evs = events::rebuild_events(panel, rows, cfg.detect);

  s.participations.resize(evs.size());
  parallel_for(evs.size(), cfg.threads, [&](std::size_t i) {
    auto& p = s.participations[i];
    p.event_id = evs[i].id();
    p.t0 = evs[i].t0;
    p.collection = evs[i].collection;
    p.profits = agents::event_agent_profits(evs[i], in.log);
  });
  for (const auto& p : s.participations)
    for (const auto& [w, prof] : p.profits)
      if (prof.marked_at_carried) {
        s.diagnostics.warn("agents", "event " + p.event_id + ": holdings marked at a carried price at t=+w");
        break;
      }
  s.flags = agents::sophistication_flags(s.participations, cfg.sophistication);
  s.persistence = agents::profit_persistence(s.participations);
  if (s.persistence.low_power)
    s.diagnostics.warn("agents", "profit persistence has fewer than 30 pairs (low power)");

  s.ownership = agents::unique_owner_series(in.log);
  s.diagnostics.append(s.ownership.diagnostics);

  std::optional<wash::WashVolumeIndex> wash_index;
  if (flags) wash_index.emplace(*flags);
  else s.diagnostics.warn("agents", "no wash flags available; wash_log_volume left empty");

  std::set<std::string> ever;
  for (const auto& f : s.flags) ever.insert(f.begin(), f.end());

  std::vector<std::vector<agents::AgentEventRecord>> timing(evs.size());
  parallel_for(evs.size(), cfg.threads, [&](std::size_t i) {
    auto& row = rows[i];
    row.predictors.sophisticated_frac = agents::sophisticated_fraction(evs[i], in.log, s.flags[i]);
    row.predictors.unique_owner_change =
        agents::unique_owner_change(s.ownership, row.collection, row.t0, cfg.detect.lookback);
    if (wash_index) row.predictors.wash_log_volume = wash_index->log_volume_before(row.collection, row.t0);
    if (evs[i].crash) {
      timing[i] = agents::timing_scores(evs[i], in.log);
      for (auto& r : timing[i]) {
        r.sophisticated = s.flags[i].count(r.wallet) > 0;
        r.sophisticated_ever = ever.count(r.wallet) > 0;
      }
    }
  });
  for (auto& t : timing) std::move(t.begin(), t.end(), std::back_inserter(s.timing));

  if (in.wallet_txs) {
    std::set<std::string> wallets;
    for (const auto& t : *in.wallet_txs) wallets.insert(t.wallet);
    Timestamp as_of = cfg.as_of.value_or(in.log.empty() ? 0 : in.log.records().back().ts);
    const ingest::CategoryMap no_categories;
    s.wallet_stats = agents::enrich_wallets(std::vector<std::string>(wallets.begin(), wallets.end()), *in.wallet_txs,
                                            in.categories ? *in.categories : no_categories, in.log, as_of);
    try {
      s.comparison = agents::compare_sophisticated(s.wallet_stats, ever);
    } catch (const Error& e) {
      s.diagnostics.warn("agents", std::string("wallet comparison skipped: ") + e.what());
    }
  } else {
    s.diagnostics.warn("agents", "no wallet transaction log; enrichment skipped");
  }
  return s;
}

std::vector<agents::AgentEventRecord> read_agent_records(const std::string& path) {
  const auto t = io::read_csv_file(path);
  std::vector<agents::AgentEventRecord> out;
  const auto c_w = t.column("wallet"), c_e = t.column("event"), c_p = t.column("profit_pct"),
             c_b = t.column("n_buys"), c_s = t.column("n_sells"), c_so = t.column("sophisticated"),
             c_ev = t.column("sophisticated_ever"), c_ts = t.column("ts"), c_tb = t.column("ts_buy"),
             c_tsl = t.column("ts_sell"), c_r = t.column("ts_rank"), c_rb = t.column("ts_buy_rank"),
             c_rs = t.column("ts_sell_rank");
  for (const auto& r : t.rows) {
    agents::AgentEventRecord a;
    a.wallet = r[c_w];
    a.event_id = r[c_e];
    if (!r[c_p].empty()) a.profit_pct = std::stod(r[c_p]);
    a.n_buys = std::stoi(r[c_b]);
    a.n_sells = std::stoi(r[c_s]);
    a.sophisticated = r[c_so] == "1";
    a.sophisticated_ever = r[c_ev] == "1";
    a.ts = std::stod(r[c_ts]);
    a.ts_buy = std::stod(r[c_tb]);
    a.ts_sell = std::stod(r[c_tsl]);
    a.ts_rank = std::stod(r[c_r]);
    a.ts_buy_rank = std::stod(r[c_rb]);
    a.ts_sell_rank = std::stod(r[c_rs]);
    out.push_back(std::move(a));
  }
  return out;
}

namespace {

void write_tables(const std::string& dir, const std::string& name, const std::string& title,
                  const std::vector<econ::RegressionResult>& rs) {
  io::write_file((fs::path(dir) / (name + ".csv")).string(), [&](std::ostream& o) { io::write_regressions_csv(o, name, rs); });
  io::write_file((fs::path(dir) / (name + ".txt")).string(), [&](std::ostream& o) { io::write_regressions_text(o, title, rs); });
}

std::vector<econ::RegressionResult> concat(std::vector<econ::RegressionResult> a, const std::vector<econ::RegressionResult>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

void write_table(int table, const std::vector<events::EventRow>& rows,
                 const std::vector<agents::AgentEventRecord>* records, const std::string& dir) {
  switch (table) {
    case 2:
      write_tables(dir, "table2", "Crash predictability: market variables (OLS, plain and HC1 t-stats)",
                   concat(econ::table_crash_predictability(rows, econ::SeMode::plain),
                          econ::table_crash_predictability(rows, econ::SeMode::hc_robust)));
      break;
    case 3:
      write_tables(dir, "table3", "Ex-post liquidity regressions (OLS, HC1 t-stats)",
                   econ::liquidity_regression(rows, econ::SeMode::hc_robust));
      break;
    case 5:
      if (!records || records->empty()) throw Error("table 5 needs agent timing records from stage 'agents'");
      write_tables(dir, "table5", "Timing-score ranks on sophistication (OLS, event-clustered t-stats)",
                   econ::timing_regression(*records));
      break;
    case 6:
      write_tables(dir, "table6", "Crash and ex-post return predictability with agent-level variables (OLS)",
                   concat(econ::table_agent_predictability(rows, econ::SeMode::plain),
                          econ::table_agent_predictability(rows, econ::SeMode::hc_robust)));
      break;
    default:
      throw Error("unknown table " + std::to_string(table) + " (expected 2, 3, 5 or 6)");
  }
}

Diagnostics write_backtest(const std::vector<events::EventRow>& rows, HourIndex split_hour, const std::string& dir) {
  const auto preds = backtest::split_fit_predict(rows, split_hour);
  auto result = backtest::run_strategy(preds, rows);
  io::write_file((fs::path(dir) / "pnl.csv").string(), [&](std::ostream& o) { io::write_pnl(o, result); });
  io::write_file((fs::path(dir) / "backtest_summary.csv").string(), [&](std::ostream& o) {
    o << "model,portfolio,trades,total_pnl_eth,train_median,n_train\n";
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
      const auto& r = result.runs[i];
      o << econ::to_string(r.model) << ',' << backtest::to_string(r.portfolio) << ',' << r.trades.size() << ','
        << io::format_number(r.total()) << ',' << io::format_number(preds.models[i / 2].train_median) << ','
        << preds.n_train << '\n';
    }
  });
  return result.diagnostics;
}

void write_agent_outputs(const AgentStage& s, const std::string& dir) {
  auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };
  io::write_file(path("participations.csv"), [&](std::ostream& o) { io::write_participations(o, s.participations, s.flags); });
  io::write_file(path("agent_events.csv"), [&](std::ostream& o) { io::write_agent_records(o, s.timing); });
  io::write_file(path("ownership.csv"), [&](std::ostream& o) { io::write_ownership(o, s.ownership); });
  io::write_file(path("persistence.csv"), [&](std::ostream& o) {
    const auto& p = s.persistence;
    o << "coefficient,t_stat,intercept,pairs,low_power\n"
      << io::format_number(p.coefficient) << ',' << io::format_number(p.t_stat) << ','
      << io::format_number(p.intercept) << ',' << p.pairs << ',' << (p.low_power ? 1 : 0) << '\n';
  });
  if (!s.wallet_stats.empty())
    io::write_file(path("wallet_stats.csv"), [&](std::ostream& o) { io::write_wallet_stats(o, s.wallet_stats); });
  if (!s.comparison.empty())
    io::write_file(path("table4.csv"), [&](std::ostream& o) { io::write_comparison(o, s.comparison); });
}

Diagnostics write_regressions(const std::vector<events::EventRow>& rows,
                              const std::vector<agents::AgentEventRecord>* records, const panel::Panel* panel,
                              int max_cluster_days, const std::string& dir) {
  Diagnostics diag;
  for (int table : {2, 3, 6, 5}) {
    try {
      write_table(table, rows, records, dir);
    } catch (const Error& e) {
      diag.warn("regress", "table " + std::to_string(table) + " skipped: " + e.what());
    }
  }
  try {
    std::vector<econ::RegressionResult> logits;
    for (auto spec : {econ::ModelSpec::market_only, econ::ModelSpec::market_plus_agent})
      logits.push_back(econ::crash_regression(rows, spec, econ::Target::crash_dummy, econ::SeMode::hc_robust,
                                              econ::Estimator::logit));
    write_tables(dir, "table2_logit", "Crash logit (HC1 t-stats, McFadden R2)", logits);
  } catch (const Error& e) {
    diag.warn("regress", std::string("logit robustness skipped: ") + e.what());
  }
  try {
    std::vector<econ::RegressionResult> cl;
    for (int d = 1; d <= max_cluster_days; ++d) cl.push_back(econ::clustering_regression(rows, d));
    write_tables(dir, "clustering", "Crash regressions with event-clustering regressors", cl);
  } catch (const Error& e) {
    diag.warn("regress", std::string("clustering regressions skipped: ") + e.what());
  }
  if (panel) {
    std::vector<econ::MarketFactorResult> mf;
    for (auto f : {econ::Frequency::hourly, econ::Frequency::daily, econ::Frequency::weekly}) {
      try {
        mf.push_back(econ::market_factor_analysis(*panel, f));
      } catch (const Error& e) {
        diag.warn("regress", std::string("market factor (") + std::string(econ::to_string(f)) + ") skipped: " + e.what());
      }
    }
    io::write_file((fs::path(dir) / "market_factor.csv").string(), [&](std::ostream& o) { io::write_market_factor(o, mf); });
  }
  return diag;
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["version"] = version;
  j["config_hash"] = config_hash;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["module_versions"] = nlohmann::ordered_json::object();
  for (auto s : kStages) j["module_versions"][std::string(s)] = version;
  j["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : stages)
    j["stages"].push_back({{"name", s.name}, {"seconds", s.seconds}, {"warnings", s.warnings}, {"errors", s.errors}});
  return j.dump(2) + "\n";
}

namespace {

struct Context {
  const Config& cfg;
  const Logger& log;
  fs::path out;
  std::optional<Inputs> inputs;
  std::optional<panel::Panel> panel;
  std::optional<std::vector<events::EventRow>> rows;
  std::optional<std::vector<wash::WashFlag>> flags;
  std::optional<std::vector<agents::AgentEventRecord>> timing;
  Diagnostics stage_diag;

  void note(const std::string& msg) const {
    if (log) log(msg);
  }
  std::string path(const std::string& name) const { return (out / name).string(); }

  Inputs& need_inputs(const std::string& stage) {
    if (inputs) return *inputs;
    std::string dir = cfg.input_dir;
    if (dir.empty() && fs::exists(out / "sim" / "transfers.jsonl")) dir = (out / "sim").string();
    if (dir.empty())
      throw Error("stage '" + stage + "' needs input data from stage 'ingest' (set run.input) or 'simulate'");
    inputs = load_inputs(dir);
    note("loaded " + std::to_string(inputs->log.size()) + " transfers from " + dir);
    return *inputs;
  }
  panel::Panel& need_panel(const std::string& stage) {
    if (!panel) panel = panel::build_panel(need_inputs(stage).log, cfg.threads).panel;
    return *panel;
  }
  std::vector<events::EventRow>& need_rows(const std::string& stage) {
    if (rows) return *rows;
    if (!fs::exists(out / "events.csv"))
      throw Error("stage '" + stage + "' needs events.csv from stage 'detect'");
    rows = io::read_events_file(path("events.csv"));
    return *rows;
  }
};

void write_events(Context& ctx) {
  io::write_file(ctx.path("events.csv"), [&](std::ostream& o) { io::write_events(o, *ctx.rows); });
}

void stage_simulate(Context& ctx) {
  if (!ctx.cfg.has_synth) throw Error("stage 'simulate' needs a [synth] section in the config");
  const auto market = synth::generate_market(ctx.cfg.synth, ctx.cfg.threads);
  synth::write_market(market, ctx.path("sim"));
  ctx.note("simulated " + std::to_string(market.transfers.size()) + " transfers, " +
           std::to_string(market.truth.events.size()) + " planted run-ups");
}

void stage_ingest(Context& ctx) {
  auto& in = ctx.need_inputs("ingest");
  ctx.stage_diag.append(in.diagnostics);
  io::write_file(ctx.path("ingest_report.csv"), [&](std::ostream& o) {
    const auto& r = in.transfer_report;
    o << "file,lines,accepted,rejected,duplicates\n";
    o << "transfers.jsonl," << r.lines << ',' << r.accepted << ',' << r.rejected << ',' << r.duplicates << '\n';
  });
}

void stage_panel(Context& ctx) {
  auto& in = ctx.need_inputs("panel");
  auto built = panel::build_panel(in.log, ctx.cfg.threads);
  ctx.stage_diag.append(built.diagnostics);
  ctx.panel = std::move(built.panel);
  auto w = panel::winsorize(*ctx.panel, ctx.cfg.winsorize);
  ctx.stage_diag.append(w.diagnostics);
  io::write_file(ctx.path("panel.csv"), [&](std::ostream& o) { io::write_panel(o, *ctx.panel); });
  io::write_file(ctx.path("panel_stats.csv"), [&](std::ostream& o) { io::write_stats(o, panel::summary_stats(w.panel)); });
}

void stage_detect(Context& ctx) {
  auto& in = ctx.need_inputs("detect");
  auto& pnl = ctx.need_panel("detect");
  auto evs = events::detect_runups(pnl, ctx.cfg.detect, ctx.cfg.threads);
  events::attach_activity(evs, in.log);
  ctx.rows = events::summarize(evs, ctx.cfg.acceleration);
  std::size_t crashes = 0;
  for (const auto& r : *ctx.rows) crashes += r.crash;
  ctx.note("detected " + std::to_string(ctx.rows->size()) + " run-ups, " + std::to_string(crashes) + " crashes");
  write_events(ctx);

  // Crash-label robustness across thresholds.
  io::write_file(ctx.path("crash_thresholds.csv"), [&](std::ostream& o) {
    o << "threshold,crashes,events\n";
    for (double th : {-0.2, -0.4, -0.6, -0.8}) {
      std::size_t n = 0;
      for (const auto& e : evs) n += events::classify_crash(e, th);
      o << io::format_number(th) << ',' << n << ',' << evs.size() << '\n';
    }
  });
}

void stage_wash(Context& ctx) {
  auto& in = ctx.need_inputs("wash");
  auto s = run_wash(in);
  ctx.stage_diag.append(s.diagnostics);
  ctx.flags = s.result.flags;
  ctx.note("flagged " + std::to_string(ctx.flags->size()) + " wash trades");
  io::write_file(ctx.path("flags.csv"), [&](std::ostream& o) { io::write_flags(o, *ctx.flags); });
  if (s.benford)
    io::write_file(ctx.path("benford.csv"), [&](std::ostream& o) { io::write_benford(o, *s.benford); });
  io::write_file(ctx.path("powerlaw.csv"), [&](std::ostream& o) {
    o << "tail_fraction,alpha\n0.1," << (s.powerlaw_alpha ? io::format_number(*s.powerlaw_alpha) : "") << '\n';
  });
}

void stage_agents(Context& ctx) {
  auto& in = ctx.need_inputs("agents");
  auto& pnl = ctx.need_panel("agents");
  auto& rows = ctx.need_rows("agents");
  if (!ctx.flags && fs::exists(ctx.out / "flags.csv")) ctx.flags = io::read_flags_file(ctx.path("flags.csv"));
  auto s = run_agents(in, pnl, rows, ctx.flags ? &*ctx.flags : nullptr, ctx.cfg);
  ctx.stage_diag.append(s.diagnostics);
  ctx.timing = s.timing;
  write_events(ctx);
  write_agent_outputs(s, ctx.out.string());
}

void stage_regress(Context& ctx) {
  auto& rows = ctx.need_rows("regress");
  if (!ctx.timing && fs::exists(ctx.out / "agent_events.csv")) ctx.timing = read_agent_records(ctx.path("agent_events.csv"));
  const panel::Panel* pnl = nullptr;
  if (ctx.inputs || !ctx.cfg.input_dir.empty() || fs::exists(ctx.out / "sim" / "transfers.jsonl"))
    pnl = &ctx.need_panel("regress");
  ctx.stage_diag.append(
      write_regressions(rows, ctx.timing ? &*ctx.timing : nullptr, pnl, ctx.cfg.max_cluster_days, ctx.out.string()));
}

void stage_backtest(Context& ctx) {
  ctx.stage_diag.append(write_backtest(ctx.need_rows("backtest"), ctx.cfg.split_hour, ctx.out.string()));
}

}  // namespace

RunManifest run_pipeline(const Config& cfg, const Logger& log) {
  fs::create_directories(cfg.out_dir);
  Context ctx{cfg, log, fs::path(cfg.out_dir), {}, {}, {}, {}, {}, {}};
  RunManifest m;
  m.version = std::string(version());
  m.config_hash = sha256_hex(cfg.canonical());

  const std::map<std::string_view, void (*)(Context&)> fns = {
      {"simulate", stage_simulate}, {"ingest", stage_ingest}, {"panel", stage_panel},     {"detect", stage_detect},
      {"wash", stage_wash},         {"agents", stage_agents}, {"regress", stage_regress}, {"backtest", stage_backtest}};
  for (auto stage : kStages) {
    if (!cfg.wants(stage)) continue;
    ctx.note("stage " + std::string(stage));
    ctx.stage_diag = Diagnostics{};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fns.at(stage)(ctx);
    } catch (const Error& e) {
      throw Error("[" + std::string(stage) + "] " + e.what());
    }
    const auto t1 = std::chrono::steady_clock::now();
    StageRecord rec{std::string(stage), std::chrono::duration<double>(t1 - t0).count(),
                    ctx.stage_diag.count(Severity::warning), ctx.stage_diag.count(Severity::error)};
    m.stages.push_back(rec);
    for (const auto& d : ctx.stage_diag.entries()) ctx.note("  " + d.stage + ": " + d.message);
    if (!ctx.stage_diag.empty())
      io::write_file(ctx.path("diagnostics_" + std::string(stage) + ".txt"), [&](std::ostream& o) {
        for (const auto& d : ctx.stage_diag.entries())
          o << d.stage << (d.line ? ":" + std::to_string(d.line) : "") << ": " << d.message << '\n';
      });
  }

  if (ctx.inputs)
    for (const auto& [name, path] : ctx.inputs->files) m.inputs[name] = sha256_file(path);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(ctx.out))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) m.outputs[fs::relative(f, ctx.out).generic_string()] = sha256_file(f.string());
  io::write_file(ctx.path("manifest.json"), [&](std::ostream& o) { o << m.to_json(); });
  return m;
}

}  // namespace bubblescope::pipeline
