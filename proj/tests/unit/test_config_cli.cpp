#include "fixtures.hpp"

#include "procap/config.hpp"
#include "procap/error.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace procap;

#ifdef PROCAP_TOOL_PATH
namespace {

struct ToolRun {
  int code = -1;
  std::string err;
};

ToolRun run_tool(const std::string& args) {
  const auto err_path = fx::temp_dir("cli") / "stderr.txt";
  const std::string cmd = std::string(PROCAP_TOOL_PATH) + " " + args + " > /dev/null 2> " + err_path.string();
  const int status = std::system(cmd.c_str());
  ToolRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err_path);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

}  // namespace
#endif

TEST(Config, EmptyObjectGivesDefaults) {
  const RunConfig c = parse_run_config("{}");
  EXPECT_EQ(c.train.batch_size, 8);
  EXPECT_EQ(c.train.optim.warmup_steps, 5000);
  EXPECT_EQ(c.model.top_k, 9);
  EXPECT_EQ(c.eval.split, "eval");
}

TEST(Config, UnknownKeysAreRejectedWithTheirPath) {
  try {
    parse_run_config(R"({"train": {"learning_rate": 0.1}})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaViolation);
    EXPECT_NE(std::string(e.what()).find("learning_rate"), std::string::npos);
  }
  EXPECT_THROW(parse_run_config(R"({"bogus": 1})"), Error);
  EXPECT_THROW(parse_run_config(R"({"train": {"batch_size": "eight"}})"), Error);
  EXPECT_THROW(parse_run_config("not json"), Error);
}

TEST(Config, SnapshotRoundTrips) {
  RunConfig c = parse_run_config(
      R"({"seed": 17, "train": {"lr_init": 0.002, "total_steps": 300, "freeze_decoder": true},
          "eval": {"decode": "beam", "beam_width": 4}, "model": {"top_k": 5}})");
  EXPECT_EQ(c.seed, 17u);
  EXPECT_EQ(c.train.optim.lr_init, 0.002);
  EXPECT_TRUE(c.train.freeze_decoder);
  EXPECT_EQ(c.eval.generate.mode, DecodeMode::kBeam);
  const std::string snap = run_config_json(c);
  EXPECT_EQ(run_config_json(parse_run_config(snap)), snap);
  EXPECT_EQ(parse_run_config(snap).train.seed, c.train.seed);
}

TEST(Config, SeedDerivesDistinctComponentSeeds) {
  RunConfig a, b;
  apply_seed(a, 1);
  apply_seed(b, 2);
  EXPECT_NE(a.model.encoder_seed, b.model.encoder_seed);
  EXPECT_NE(a.model.init_seed, a.model.encoder_seed);
  EXPECT_NE(a.train.seed, a.model.init_seed);
  RunConfig again;
  apply_seed(again, 1);
  EXPECT_EQ(again.model.init_seed, a.model.init_seed);
}

TEST(Config, ProvenanceCarriesSeedAndConfig) {
  RunConfig c;
  apply_seed(c, 9);
  const auto j = nlohmann::json::parse(provenance_json(c));
  EXPECT_EQ(j.at("seed"), 9);
  EXPECT_TRUE(j.contains("tool"));
  EXPECT_TRUE(j.contains("version"));
  EXPECT_TRUE(j.at("config").is_object());
}

#ifdef PROCAP_TOOL_PATH
TEST(Cli, HelpExitsZero) {
  EXPECT_EQ(run_tool("--help").code, 0);
  EXPECT_EQ(run_tool("train --help").code, 0);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run_tool("frobnicate").code, 2);
  EXPECT_EQ(run_tool("").code, 2);
  const ToolRun r = run_tool("train --out /tmp/x");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--data"), std::string::npos) << r.err;
  EXPECT_EQ(run_tool("caption --checkpoint a --image b --task both").code, 2);
}

TEST(Cli, RuntimeErrorsExitOne) {
  const auto dir = fx::temp_dir("cli_runtime");
  const ToolRun r = run_tool("train --data " + (dir / "missing.json").string() + " --out " + (dir / "o").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
  std::ofstream(dir / "bad.json") << R"({"nope": 1})";
  EXPECT_EQ(run_tool("synth --config " + (dir / "bad.json").string() + " --out " + (dir / "s").string()).code, 1);
}
#endif
