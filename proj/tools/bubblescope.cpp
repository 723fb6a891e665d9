#include "bubblescope/io.hpp"
#include "bubblescope/pipeline.hpp"

#include "CLI11.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace bubblescope;

namespace {

struct Globals {
  std::string config;
  int threads = 0;  // 0: take from config
  std::optional<std::uint64_t> seed;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("bubblescope");
  logger->set_pattern("%^[%l]%$ %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("BUBBLESCOPE_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

pipeline::Config base_config(const Globals& g) {
  pipeline::Config cfg = g.config.empty() ? pipeline::Config{} : pipeline::load_config(g.config);
  if (g.threads > 0) cfg.threads = g.threads;
  if (g.seed) {
    cfg.synth.seed = *g.seed;
  }
  return cfg;
}

void report(const Diagnostics& d) {
  for (const auto& e : d.entries()) {
    const auto where = e.line ? e.stage + ":" + std::to_string(e.line) : e.stage;
    if (e.severity == Severity::error) spdlog::error("{}: {}", where, e.message);
    else if (e.severity == Severity::warning) spdlog::warn("{}: {}", where, e.message);
    else spdlog::info("{}: {}", where, e.message);
  }
}

// A directory holding transfers.jsonl, or the file itself.
std::string transfers_path(const std::string& p) {
  if (fs::is_directory(p)) return (fs::path(p) / "transfers.jsonl").string();
  return p;
}

std::string sibling(const std::string& trades, const char* name) {
  if (!fs::is_directory(trades)) return {};
  auto p = fs::path(trades) / name;
  return fs::exists(p) ? p.string() : std::string();
}

void ensure_parent(const std::string& file) {
  const auto parent = fs::path(file).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void run_ingest(const std::string& trades, const std::string& funding, const std::string& categories,
                const std::string& txlog, const std::string& out) {
  auto in = pipeline::load_inputs(transfers_path(trades), funding, categories, txlog);
  report(in.diagnostics);
  fs::create_directories(out);
  const fs::path dir(out);
  io::write_file((dir / "transfers.jsonl").string(), [&](std::ostream& o) { ingest::write_transfers(o, in.log); });
  if (in.funding)
    io::write_file((dir / "funding.jsonl").string(), [&](std::ostream& o) {
      for (const auto& e : in.funding->edges()) o << ingest::serialize_funding_edge(e) << '\n';
    });
  if (in.categories)
    io::write_file((dir / "categories.csv").string(), [&](std::ostream& o) { ingest::write_categories(o, *in.categories); });
  if (in.wallet_txs)
    io::write_file((dir / "wallet_tx.jsonl").string(), [&](std::ostream& o) {
      for (const auto& t : *in.wallet_txs) o << ingest::serialize_wallet_tx(t) << '\n';
    });
  const auto& r = in.transfer_report;
  spdlog::info("ingested {} transfers ({} rejected, {} duplicates)", r.accepted, r.rejected, r.duplicates);
}

void run_panel(const Globals& g, const std::string& in_dir, const std::string& out, std::optional<double> level) {
  auto cfg = base_config(g);
  auto in = pipeline::load_inputs(transfers_path(in_dir), "", "", "");
  report(in.diagnostics);
  auto built = panel::build_panel(in.log, cfg.threads);
  report(built.diagnostics);
  const double lv = level.value_or(cfg.winsorize);
  auto w = panel::winsorize(built.panel, lv);
  report(w.diagnostics);
  ensure_parent(out);
  const auto& written = level ? w.panel : built.panel;
  io::write_file(out, [&](std::ostream& o) { io::write_panel(o, written); });
  const auto stats = (fs::path(out).parent_path() / "panel_stats.csv").string();
  io::write_file(stats, [&](std::ostream& o) { io::write_stats(o, panel::summary_stats(w.panel)); });
  spdlog::info("panel: {} collection-hours", built.panel.size());
}

void run_detect(const Globals& g, const std::string& panel_csv, std::optional<double> threshold,
                std::optional<double> crash_threshold, const std::string& trades, const std::string& out) {
  auto cfg = base_config(g);
  if (threshold) cfg.detect.runup_threshold = *threshold;
  if (crash_threshold) cfg.detect.crash_threshold = *crash_threshold;
  const auto pnl = io::read_panel_file(panel_csv);
  auto evs = events::detect_runups(pnl, cfg.detect, cfg.threads);
  if (!trades.empty()) {
    auto in = pipeline::load_inputs(transfers_path(trades), "", "", "");
    events::attach_activity(evs, in.log);
  } else {
    spdlog::warn("detect: no --trades given; active_wallets left at 0");
  }
  const auto rows = events::summarize(evs, cfg.acceleration);
  ensure_parent(out);
  io::write_file(out, [&](std::ostream& o) { io::write_events(o, rows); });
  std::size_t crashes = 0;
  for (const auto& r : rows) crashes += r.crash;
  spdlog::info("detected {} run-ups, {} crashes", rows.size(), crashes);
}

void run_agents(const Globals& g, const std::string& events_csv, const std::string& trades, const std::string& txlog,
                const std::string& categories, const std::string& flags_csv, const std::string& out) {
  auto cfg = base_config(g);
  auto in = pipeline::load_inputs(transfers_path(trades), "", categories.empty() ? sibling(trades, "categories.csv") : categories,
                                  txlog.empty() ? sibling(trades, "wallet_tx.jsonl") : txlog);
  report(in.diagnostics);
  auto rows = io::read_events_file(events_csv);
  const auto pnl = panel::build_panel(in.log, cfg.threads).panel;
  std::optional<std::vector<wash::WashFlag>> flags;
  if (!flags_csv.empty()) flags = io::read_flags_file(flags_csv);
  auto s = pipeline::run_agents(in, pnl, rows, flags ? &*flags : nullptr, cfg);
  report(s.diagnostics);
  fs::create_directories(out);
  io::write_file((fs::path(out) / "events.csv").string(), [&](std::ostream& o) { io::write_events(o, rows); });
  pipeline::write_agent_outputs(s, out);
  spdlog::info("agents: {} events, {} timing records", rows.size(), s.timing.size());
}

void run_wash(const std::string& trades, const std::string& funding, const std::string& exclusions,
              const std::string& out) {
  auto in = pipeline::load_inputs(transfers_path(trades), funding.empty() ? sibling(trades, "funding.jsonl") : funding,
                                  exclusions.empty() ? sibling(trades, "categories.csv") : exclusions, "");
  report(in.diagnostics);
  auto s = pipeline::run_wash(in);
  report(s.diagnostics);
  ensure_parent(out);
  io::write_file(out, [&](std::ostream& o) { io::write_flags(o, s.result.flags); });
  spdlog::info("flagged {} wash trades", s.result.flags.size());
}

void run_benford(const std::string& trades, const std::string& out) {
  auto in = pipeline::load_inputs(transfers_path(trades), "", "", "");
  std::vector<double> prices;
  for (const auto& t : in.log.records())
    if (t.is_trade()) prices.push_back(t.price_eth);
  const auto r = wash::benford_test(prices);
  report(r.diagnostics);
  if (out.empty()) {
    io::write_benford(std::cout, r);
  } else {
    ensure_parent(out);
    io::write_file(out, [&](std::ostream& o) { io::write_benford(o, r); });
  }
}

void run_regress(const Globals& g, const std::string& events_csv, const std::string& table,
                 const std::string& records_csv, const std::string& trades, const std::string& out) {
  auto cfg = base_config(g);
  const auto rows = io::read_events_file(events_csv);
  std::optional<std::vector<agents::AgentEventRecord>> records;
  std::string rec_path = records_csv;
  if (rec_path.empty()) {
    auto p = fs::path(events_csv).parent_path() / "agent_events.csv";
    if (fs::exists(p)) rec_path = p.string();
  }
  if (!rec_path.empty()) records = pipeline::read_agent_records(rec_path);
  fs::create_directories(out);
  if (table == "all") {
    std::optional<panel::Panel> pnl;
    if (!trades.empty()) pnl = panel::build_panel(pipeline::load_inputs(transfers_path(trades), "", "", "").log, cfg.threads).panel;
    report(pipeline::write_regressions(rows, records ? &*records : nullptr, pnl ? &*pnl : nullptr,
                                       cfg.max_cluster_days, out));
  } else {
    pipeline::write_table(std::stoi(table), rows, records ? &*records : nullptr, out);
  }
  spdlog::info("regress: table {} written to {}", table, out);
}

void run_backtest(const Globals& g, const std::string& events_csv, const std::string& split, const std::string& out) {
  auto cfg = base_config(g);
  if (!split.empty()) cfg.split_hour = hour_of(parse_utc(split));
  const auto rows = io::read_events_file(events_csv);
  fs::create_directories(out);
  report(pipeline::write_backtest(rows, cfg.split_hour, out));
  spdlog::info("backtest written to {}", out);
}

void run_simulate(const Globals& g, const std::string& out) {
  auto cfg = base_config(g);
  const auto market = synth::generate_market(cfg.synth, cfg.threads);
  synth::write_market(market, out);
  spdlog::info("simulated {} transfers, {} planted run-ups, {} wash trades", market.transfers.size(),
               market.truth.events.size(), market.truth.wash_trades.size());
}

void run_all(const Globals& g, const std::string& out, const std::string& input, const std::vector<std::string>& stages) {
  auto cfg = base_config(g);
  if (!out.empty()) cfg.out_dir = out;
  if (!input.empty()) cfg.input_dir = input;
  if (!stages.empty()) cfg.stages = stages;
  if (g.seed) cfg.has_synth = true;
  const auto m = pipeline::run_pipeline(cfg, [](std::string_view msg) { spdlog::info("{}", msg); });
  std::size_t warnings = 0;
  for (const auto& s : m.stages) warnings += s.warnings;
  spdlog::info("run complete: {} stages, {} warnings, config {}", m.stages.size(), warnings, m.config_hash.substr(0, 12));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"NFT bubble event-study pipeline"};
  app.set_version_flag("--version", std::string(pipeline::version()));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "TOML config file")->check(CLI::ExistingFile);
  app.add_option("--threads", g.threads, "worker threads (default from config, else 1)")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "synthetic-market seed override");

  std::string trades, funding, categories, txlog, out, panel_csv, events_csv, records_csv, flags_csv, split, table,
      input;
  std::optional<double> winsor, threshold, crash_threshold;
  std::vector<std::string> stages;

  auto* ingest = app.add_subcommand("ingest", "validate and normalize raw inputs");
  ingest->add_option("--trades", trades, "transfers JSONL or directory")->required();
  ingest->add_option("--funding", funding, "funding-graph JSONL")->check(CLI::ExistingFile);
  ingest->add_option("--categories", categories, "address category CSV")->check(CLI::ExistingFile);
  ingest->add_option("--txlog", txlog, "wallet transaction JSONL")->check(CLI::ExistingFile);
  ingest->add_option("--out", out, "output directory")->required();

  auto* panel = app.add_subcommand("panel", "build the hourly collection panel");
  panel->add_option("--in", input, "input directory or transfers file")->required();
  panel->add_option("--out", out, "panel CSV")->required();
  panel->add_option("--winsorize", winsor, "write the panel winsorized at this level");

  auto* detect = app.add_subcommand("detect", "identify run-ups and label crashes");
  detect->add_option("--panel", panel_csv, "panel CSV")->required()->check(CLI::ExistingFile);
  detect->add_option("--threshold", threshold, "run-up threshold (cumulative return)");
  detect->add_option("--crash-threshold", crash_threshold, "crash threshold on the ex-post return");
  detect->add_option("--trades", trades, "transfers, for active-wallet counts");
  detect->add_option("--out", out, "events CSV")->required();

  auto* agents = app.add_subcommand("agents", "agent-level profits, sophistication, timing and ownership");
  agents->add_option("--events", events_csv, "events CSV")->required()->check(CLI::ExistingFile);
  agents->add_option("--trades", trades, "transfers JSONL or directory")->required();
  agents->add_option("--txlog", txlog, "wallet transaction JSONL")->check(CLI::ExistingFile);
  agents->add_option("--categories", categories, "address category CSV")->check(CLI::ExistingFile);
  agents->add_option("--flags", flags_csv, "wash flags CSV, for the wash-volume predictor")->check(CLI::ExistingFile);
  agents->add_option("--out", out, "output directory")->required();

  auto* washc = app.add_subcommand("wash", "wash-trade filters");
  washc->require_subcommand(0, 1);
  washc->add_option("--trades", trades, "transfers JSONL or directory");
  washc->add_option("--funding", funding, "funding-graph JSONL")->check(CLI::ExistingFile);
  washc->add_option("--exclusions", categories, "address category CSV (cex and mixer are excluded)")
      ->check(CLI::ExistingFile);
  washc->add_option("--out", out, "flags CSV");
  auto* benford = washc->add_subcommand("benford", "first-digit test on trade prices");
  benford->add_option("--trades", trades, "transfers JSONL or directory")->required();
  benford->add_option("--out", out, "output CSV (stdout if omitted)");

  auto* regress = app.add_subcommand("regress", "regression tables");
  regress->add_option("--events", events_csv, "events CSV")->required()->check(CLI::ExistingFile);
  regress->add_option("--table", table, "2, 3, 5, 6 or all")->required()->check(CLI::IsMember({"2", "3", "5", "6", "all"}));
  regress->add_option("--records", records_csv, "agent_events.csv for table 5")->check(CLI::ExistingFile);
  regress->add_option("--trades", trades, "transfers, for the market-factor analysis with --table all");
  regress->add_option("--out", out, "output directory")->required();

  auto* bt = app.add_subcommand("backtest", "out-of-sample long-short strategy");
  bt->add_option("--events", events_csv, "events CSV")->required()->check(CLI::ExistingFile);
  bt->add_option("--split", split, "last training hour, YYYY-MM-DDTHH");
  bt->add_option("--out", out, "output directory")->required();

  auto* sim = app.add_subcommand("simulate", "generate a synthetic market");
  sim->add_option("--out", out, "output directory")->required();

  auto* run = app.add_subcommand("run", "run the configured pipeline stages");
  run->add_option("--out", out, "artifact directory (overrides run.out)");
  run->add_option("--input", input, "input directory (overrides run.input)");
  run->add_option("--stages", stages, "stages to run")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  std::string stage;
  try {
    if (ingest->parsed()) {
      stage = "ingest";
      run_ingest(trades, funding, categories, txlog, out);
    } else if (panel->parsed()) {
      stage = "panel";
      run_panel(g, input, out, winsor);
    } else if (detect->parsed()) {
      stage = "detect";
      run_detect(g, panel_csv, threshold, crash_threshold, trades, out);
    } else if (agents->parsed()) {
      stage = "agents";
      run_agents(g, events_csv, trades, txlog, categories, flags_csv, out);
    } else if (benford->parsed()) {
      stage = "wash";
      run_benford(trades, out);
    } else if (washc->parsed()) {
      stage = "wash";
      if (trades.empty() || out.empty()) throw Error("wash needs --trades and --out");
      run_wash(trades, funding, categories, out);
    } else if (regress->parsed()) {
      stage = "regress";
      run_regress(g, events_csv, table, records_csv, trades, out);
    } else if (bt->parsed()) {
      stage = "backtest";
      run_backtest(g, events_csv, split, out);
    } else if (sim->parsed()) {
      stage = "simulate";
      run_simulate(g, out);
    } else if (run->parsed()) {
      stage = "run";
      run_all(g, out, input, stages);
    }
  } catch (const std::exception& e) {
    spdlog::error("[{}] {}", stage, e.what());
    return 1;
  }
  return 0;
}
