#include "bubblescope/pipeline.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace bubblescope;
using namespace bubblescope::pipeline;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"(
[run]
threads = 1

[synth]
seed = 11
n_collections = 6
n_wallets = 12000
horizon_hours = 2000
runup_rate = 10.0
wash_loop_count = 40
sophisticated_share = 0.01

[backtest]
split = "2022-01-20T00"
)";

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("bubblescope_pipeline_" + name);
  fs::remove_all(dir);
  return dir;
}

Config small(const fs::path& out, int threads) {
  auto c = parse_config(kSmall);
  c.out_dir = out.string();
  c.threads = threads;
  return c;
}

}  // namespace

TEST(Config, DefaultsAndOverrides) {
  const auto c = parse_config("[run]\nthreads = 3\n[detect]\nrunup_threshold = 1.5\n[backtest]\nsplit = \"2022-01-15T00\"\n");
  EXPECT_EQ(c.threads, 3);
  EXPECT_DOUBLE_EQ(c.detect.runup_threshold, 1.5);
  EXPECT_EQ(c.detect.lookback, 24);
  EXPECT_EQ(c.split_hour, parse_utc("2022-01-15T00") / 3600);
  EXPECT_FALSE(c.has_synth);
  EXPECT_FALSE(c.wants("simulate"));
  EXPECT_TRUE(c.wants("backtest"));
}

TEST(Config, SynthSectionEnablesSimulation) {
  const auto c = parse_config(kSmall);
  EXPECT_TRUE(c.has_synth);
  EXPECT_TRUE(c.wants("simulate"));
  EXPECT_EQ(c.synth.n_collections, 6);
  EXPECT_EQ(c.synth.seed, 11u);
}

TEST(Config, UnknownKeysAndBadValuesAreRejected) {
  EXPECT_THROW(parse_config("[run]\nthreds = 2\n"), Error);
  EXPECT_THROW(parse_config("[nonsense]\nx = 1\n"), Error);
  EXPECT_THROW(parse_config("[run]\nthreads = 0\n"), Error);
  EXPECT_THROW(parse_config("[run]\nstages = [\"panel\", \"dance\"]\n"), Error);
  EXPECT_THROW(parse_config("[regress]\nmax_cluster_days = 11\n"), Error);
  EXPECT_THROW(parse_config("[synth]\nn_collections = 0\n"), Error);
  EXPECT_THROW(parse_config("[run\n"), Error);
}

TEST(Config, CanonicalFormIsStable) {
  EXPECT_EQ(parse_config(kSmall).canonical(), parse_config(kSmall).canonical());
  EXPECT_NE(parse_config(kSmall).canonical(), parse_config("").canonical());
}

TEST(Hash, KnownDigest) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Pipeline, MissingUpstreamArtifactNamesTheStage) {
  const auto out = scratch("missing");
  Config c;
  c.out_dir = out.string();
  c.stages = {"backtest"};
  try {
    run_pipeline(c);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("detect"), std::string::npos) << e.what();
  }
  fs::remove_all(out);
}

TEST(Pipeline, RerunsAndThreadCountsGiveIdenticalOutputs) {
  const auto a = scratch("a"), b = scratch("b"), c = scratch("c");
  const auto m1 = run_pipeline(small(a, 1));
  const auto m2 = run_pipeline(small(b, 1));
  const auto m8 = run_pipeline(small(c, 8));
  EXPECT_EQ(m1.outputs, m2.outputs);
  EXPECT_EQ(m1.outputs, m8.outputs);
  EXPECT_EQ(m1.config_hash, m2.config_hash);
  EXPECT_EQ(m1.version, std::string(version()));
  for (const char* f : {"events.csv", "flags.csv", "table2.csv", "table6.csv", "pnl.csv", "panel.csv"})
    EXPECT_TRUE(m1.outputs.count(f)) << f;
  ASSERT_EQ(m1.stages.size(), kStages.size());
  for (std::size_t i = 0; i < kStages.size(); ++i) EXPECT_EQ(m1.stages[i].name, kStages[i]);
  EXPECT_TRUE(fs::exists(a / "manifest.json"));

  // Downstream stages alone reuse the artifacts already in the directory.
  auto partial = small(a, 1);
  partial.stages = {"regress", "backtest"};
  partial.has_synth = false;
  partial.input_dir = (a / "sim").string();
  const auto mp = run_pipeline(partial);
  EXPECT_EQ(mp.outputs.at("pnl.csv"), m1.outputs.at("pnl.csv"));
  for (const auto& d : {a, b, c}) fs::remove_all(d);
}
