#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "relaytree/cli.hpp"

namespace fs = std::filesystem;
using relaytree::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string body(const std::string& text) { return text.substr(text.find('\n') + 1); }

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("relaytree_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Cli, EvolveTrajectory) {
  const auto r = invoke({"evolve", "--height", "3", "--schedule", "quadratic:p0=0.1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("# relaytree ", 0), 0u);
  EXPECT_NE(r.out.find("k,alpha,beta,q,L,halfL,starvation,region\n"), std::string::npos);
  EXPECT_NE(r.out.find("\n0,0.1"), std::string::npos);
  int rows = 0;
  for (char c : body(r.out)) rows += c == '\n';
  EXPECT_EQ(rows, 5);
}

TEST(Cli, EvolveWithZeroScheduleMatchesDefault) {
  const auto a = invoke({"evolve", "--height", "6", "--schedule", "constant:p=0"});
  const auto b = invoke({"evolve", "--sensors", "64"});
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, SizeExample) {
  const auto r = invoke({"size", "--epsilon", "0.01", "--l0", "0.1", "--c", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("n_sensors=16\n"), std::string::npos);
  EXPECT_NE(r.out.find("height=4\n"), std::string::npos);
}

TEST(Cli, BoundsBothFormats) {
  const auto kv = invoke({"bounds", "--sensors", "2048", "--schedule", "quadratic:p0=0.1", "--prior0", "0.4"});
  ASSERT_EQ(kv.code, 0) << kv.err;
  EXPECT_NE(kv.out.find("parity=odd\n"), std::string::npos);
  EXPECT_NE(kv.out.find("inside=1\n"), std::string::npos);
  const auto csv = invoke({"bounds", "--height", "10", "--format", "csv"});
  ASSERT_EQ(csv.code, 0) << csv.err;
  EXPECT_NE(csv.out.find("n_sensors,height,parity"), std::string::npos);
}

TEST(Cli, SimulateIsDeterministic) {
  const std::vector<std::string> args{"simulate", "--height", "4", "--schedule", "quadratic:p0=0.1",
                                      "--trials", "3000", "--seed", "7"};
  const auto a = invoke(args);
  const auto b = invoke(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(body(a.out), body(b.out));
  EXPECT_NE(a.out.find("z_type1"), std::string::npos);
}

TEST(Cli, OracleResiduals) {
  const auto r = invoke({"oracle", "--max-height", "4", "--schedule", "constant:p=0.1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("resid_alpha"), std::string::npos);
  EXPECT_EQ(invoke({"oracle", "--max-height", "9"}).code, 2);
}

TEST(Cli, RegionsRatiosScalingDecay) {
  EXPECT_EQ(invoke({"regions", "--q", "0.1", "--step", "0.05"}).code, 0);
  EXPECT_EQ(invoke({"ratios", "--height", "12", "--schedule", "quadratic:p0=0.1"}).code, 0);
  EXPECT_EQ(invoke({"ratios", "--grid", "--c", "1", "--points", "5"}).code, 0);
  const auto s = invoke({"scaling"});
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_NE(s.out.find("\nconstant,20,"), std::string::npos);
  const auto d = invoke({"decay", "--schedule", "quadratic:p0=0.1"});
  ASSERT_EQ(d.code, 0) << d.err;
  EXPECT_NE(d.out.find("verdict=sufficient\n"), std::string::npos);
  EXPECT_NE(d.out.find("surrogate"), std::string::npos);
}

TEST(Cli, ConfigErrors) {
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"evolve"}).code, 2);
  EXPECT_EQ(invoke({"evolve", "--height", "3", "--sensors", "8"}).code, 2);
  EXPECT_EQ(invoke({"evolve", "--sensors", "12"}).code, 2);
  EXPECT_EQ(invoke({"evolve", "--height", "3", "--schedule", "cubic"}).code, 2);
  EXPECT_EQ(invoke({"evolve", "--height", "3", "--alpha0", "0.7", "--beta0", "0.5"}).code, 2);
  EXPECT_EQ(invoke({"bounds", "--height", "3", "--format", "xml"}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({"size"}).code, 2);
  EXPECT_EQ(invoke({"evolve", "--height", "nope"}).code, 2);
}

TEST(Cli, DomainErrors) {
  EXPECT_EQ(invoke({"size", "--epsilon", "0.01", "--l0", "0.3", "--c", "1"}).code, 3);
  EXPECT_EQ(invoke({"evolve", "--height", "2", "--schedule", "explicit:0.5,1,1"}).code, 3);
}

TEST(Cli, WritesFileAtomically) {
  const auto dir = scratch("atomic");
  const auto target = dir / "traj.csv";
  ASSERT_EQ(invoke({"evolve", "--height", "3", "--out", target.string()}).code, 0);
  EXPECT_EQ(slurp(target).rfind("# relaytree ", 0), 0u);

  const auto failed = dir / "bad.csv";
  EXPECT_EQ(invoke({"evolve", "--height", "2", "--schedule", "explicit:0.5,1,1", "--out", failed.string()}).code, 3);
  EXPECT_FALSE(fs::exists(failed));
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_EQ(e.path().filename(), "traj.csv");
}

TEST(Cli, OutputDirectoryFromEnvironment) {
  const auto dir = scratch("env");
  ::setenv(relaytree::cli::kOutputDirEnv, dir.c_str(), 1);
  const auto r = invoke({"size", "--epsilon", "0.25", "--l0", "0.25", "--out", "size.txt"});
  ::unsetenv(relaytree::cli::kOutputDirEnv);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(dir / "size.txt").find("n_sensors=4\n"), std::string::npos);
}

TEST(Cli, ConfigFile) {
  const auto dir = scratch("config");
  const auto cfg = dir / "run.ini";
  {
    std::ofstream f(cfg);
    f << "alpha0=0.05\nbeta0=0.3\nschedule=quadratic:p0=0.2\nheight=5\n";
  }
  const auto from_file = invoke({"evolve", "--config", cfg.string()});
  const auto from_flags =
      invoke({"evolve", "--alpha0", "0.05", "--beta0", "0.3", "--schedule", "quadratic:p0=0.2", "--height", "5"});
  ASSERT_EQ(from_file.code, 0) << from_file.err;
  EXPECT_EQ(from_file.out, from_flags.out);
}
