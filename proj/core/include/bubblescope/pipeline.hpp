#pragma once

// Stage orchestration: simulate -> ingest -> panel -> detect -> wash ->
// agents -> regress -> backtest, driven by a TOML config and recorded in a
// run manifest.

#include "bubblescope/agents.hpp"
#include "bubblescope/backtest.hpp"
#include "bubblescope/econometrics.hpp"
#include "bubblescope/events.hpp"
#include "bubblescope/ingest.hpp"
#include "bubblescope/panel.hpp"
#include "bubblescope/synth.hpp"
#include "bubblescope/washtrade.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace bubblescope::pipeline {

std::string_view version();

inline constexpr std::array<std::string_view, 8> kStages = {"simulate", "ingest", "panel", "detect",
                                                            "wash",     "agents", "regress", "backtest"};

struct Config {
  std::string input_dir;  // transfers.jsonl [funding.jsonl categories.csv wallet_tx.jsonl]
  std::string out_dir = "out";
  int threads = 1;
  std::vector<std::string> stages;  // empty: all but simulate (plus simulate when [synth] is present)

  bool has_synth = false;
  synth::SynthConfig synth;

  double winsorize = 0.01;
  events::DetectParams detect;
  events::AccelerationVariant acceleration = events::AccelerationVariant::trailing_minus_early;
  agents::SophisticationParams sophistication;
  std::optional<Timestamp> as_of;  // wallet-age reference; defaults to the last transfer
  HourIndex split_hour = 0;        // backtest split, inclusive on the training side
  int max_cluster_days = 10;

  Config();
  [[nodiscard]] bool wants(std::string_view stage) const;
  // Normalized key = value listing; its SHA-256 is the manifest config hash.
  [[nodiscard]] std::string canonical() const;
};

Config parse_config(const std::string& toml_text, const std::string& origin = "<config>");
Config load_config(const std::string& path);
synth::SynthConfig parse_synth_config(const std::string& toml_text, const std::string& origin = "<config>");

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

struct Inputs {
  ingest::TransferLog log;
  ingest::ParseReport transfer_report;
  std::optional<ingest::FundingIndex> funding;
  std::optional<ingest::CategoryMap> categories;
  std::optional<std::vector<ingest::WalletTx>> wallet_txs;
  std::map<std::string, std::string> files;  // logical name -> path
  Diagnostics diagnostics;
};

// Loads whichever of the four input files exist in `dir`; transfers.jsonl
// is required.
Inputs load_inputs(const std::string& dir);
// Explicit paths; empty strings skip the optional inputs.
Inputs load_inputs(const std::string& transfers, const std::string& funding, const std::string& categories,
                   const std::string& wallet_txs);

struct WashStage {
  wash::WashResult result;
  std::optional<wash::BenfordResult> benford;
  std::optional<double> powerlaw_alpha;
  Diagnostics diagnostics;
};
WashStage run_wash(const Inputs& in);

struct AgentStage {
  std::vector<agents::EventParticipation> participations;
  std::vector<std::set<std::string>> flags;
  std::vector<agents::AgentEventRecord> timing;
  agents::OwnershipSeries ownership;
  agents::PersistenceResult persistence;
  std::vector<agents::WalletStats> wallet_stats;
  std::vector<agents::GroupComparison> comparison;
  Diagnostics diagnostics;
};
// Fills sophisticated_frac, unique_owner_change and (when flags are given)
// wash_log_volume of `rows` in place.
AgentStage run_agents(const Inputs& in, const panel::Panel& panel, std::vector<events::EventRow>& rows,
                      const std::vector<wash::WashFlag>* flags, const Config& cfg);

// participations.csv, agent_events.csv, ownership.csv, persistence.csv and,
// when wallet logs were given, wallet_stats.csv and table4.csv.
void write_agent_outputs(const AgentStage& stage, const std::string& dir);
std::vector<agents::AgentEventRecord> read_agent_records(const std::string& path);

// Fits on t0 <= split_hour, trades the rest; writes pnl.csv and
// backtest_summary.csv.
Diagnostics write_backtest(const std::vector<events::EventRow>& rows, HourIndex split_hour, const std::string& dir);

struct StageRecord {
  std::string name;
  double seconds = 0.0;
  std::size_t warnings = 0;
  std::size_t errors = 0;
};

struct RunManifest {
  std::string version;
  std::string config_hash;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // file name -> sha256
  std::vector<StageRecord> stages;
  std::string to_json() const;
};

using Logger = std::function<void(std::string_view)>;

// Runs the configured stages in dependency order, writing artifacts and
// manifest.json into cfg.out_dir. Throws Error naming the stage whose
// upstream artifact is missing.
RunManifest run_pipeline(const Config& cfg, const Logger& log = {});

// Writes the regression tables for the given table number (2, 3, 5, 6) into
// `dir`; table 5 needs agent records.
void write_table(int table, const std::vector<events::EventRow>& rows,
                 const std::vector<agents::AgentEventRecord>* records, const std::string& dir);

// All tables plus the logit, clustering and (given a panel) market-factor
// analyses; any piece that cannot be estimated becomes a warning.
Diagnostics write_regressions(const std::vector<events::EventRow>& rows,
                              const std::vector<agents::AgentEventRecord>* records, const panel::Panel* panel,
                              int max_cluster_days, const std::string& dir);

}  // namespace bubblescope::pipeline
