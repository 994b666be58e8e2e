#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace {

std::string tmp(const std::string& name) { return (std::filesystem::temp_directory_path() / name).string(); }

int cli(const std::string& args) {
  const std::string cmd = std::string(AETSGD_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Cli, HelpAndMissingSeed) {
  EXPECT_EQ(cli("--help"), 0);
  EXPECT_EQ(cli("run --iters 100"), 1);
  EXPECT_EQ(cli("nonsense"), 1);
}

TEST(Cli, RunWritesOutputsAndTraceValidates) {
  const auto csv = tmp("cli_run.csv");
  const auto trace = tmp("cli_run.trace");
  ASSERT_EQ(cli("run --seed 3 --iters 500 --out " + csv + " --trace " + trace), 0);
  EXPECT_EQ(slurp(csv).rfind("experiment,node,round,iter,loss,accuracy", 0), 0u);
  EXPECT_EQ(cli("validate-trace --trace " + trace), 0);
  EXPECT_EQ(cli("validate-trace --trace " + trace + " --tau induced"), 0);
  EXPECT_EQ(cli("validate-trace --trace " + trace + " --tau const:0 --violations " + tmp("cli_v.csv")), 3);
}

TEST(Cli, MutationTraceExitsThree) {
  const auto trace = tmp("cli_mut.trace");
  ASSERT_EQ(cli("run --seed 2 --iters 1500 --d 1 --straggler 0:5 --disable-sync --trace " + trace), 0);
  EXPECT_EQ(cli("validate-trace --trace " + trace), 3);
}

TEST(Cli, ValidationErrorsExitOne) {
  EXPECT_EQ(cli("run --seed 1 --schedule linear:0,1,0"), 1);
  EXPECT_EQ(cli("run --seed 1 --straggler 9:2"), 1);
  EXPECT_EQ(cli("run --seed 1 --topology star"), 1);
  EXPECT_EQ(cli("run --seed 1 --config /nonexistent.json"), 2);
  EXPECT_EQ(cli("inspect-idx --images /nonexistent.idx"), 2);
}

TEST(Cli, GenDataThenIdxRun) {
  const auto im = tmp("cli_img.idx");
  const auto lb = tmp("cli_lab.idx");
  ASSERT_EQ(cli("gen-data --seed 4 --m 300 --images " + im + " --labels " + lb), 0);
  EXPECT_EQ(cli("inspect-idx --images " + im + " --labels " + lb), 0);
  EXPECT_EQ(cli("run --seed 4 --iters 300 --objective idx --train-images " + im + " --train-labels " + lb), 0);
  std::ofstream(tmp("cli_bad.idx"), std::ios::binary) << "garbage!";
  EXPECT_EQ(cli("inspect-idx --images " + tmp("cli_bad.idx")), 1);
}

TEST(Cli, ConfigFileWithFlagOverride) {
  const auto cfg = tmp("cli_cfg.json");
  std::ofstream(cfg) << R"({"experiment": {"nodes": 3, "iters": 400}, "topology": {"kind": "line"}})";
  const auto a = tmp("cli_cfg_a.csv");
  const auto b = tmp("cli_cfg_b.csv");
  ASSERT_EQ(cli("run --seed 5 --config " + cfg + " --out " + a), 0);
  ASSERT_EQ(cli("run --seed 5 --config " + cfg + " --nodes 4 --out " + b), 0);
  EXPECT_NE(slurp(a).find("aet,2,"), std::string::npos);
  EXPECT_EQ(slurp(a).find("aet,3,"), std::string::npos);
  EXPECT_NE(slurp(b).find("aet,3,"), std::string::npos);
}

TEST(Cli, SweepAndCompare) {
  EXPECT_EQ(cli("sweep --seed 1 --iters 500 --axis d --values 0,1,2 --out " + tmp("cli_sweep.csv")), 0);
  EXPECT_EQ(cli("compare --seed 1 --iters 500"), 0);
  EXPECT_EQ(cli("sweep --seed 1 --axis gamma --values 1"), 1);
}
