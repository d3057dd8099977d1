#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "json.hpp"
#include "vaopf/grid.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::path(VAOPF_TMP_DIR) / ::testing::UnitTest::GetInstance()->current_test_info()->name();
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  int run(const std::string& args) const {
    const std::string cmd =
        "cd '" + dir_.string() + "' && '" + std::string(VAOPF_CLI) + "' " + args + " > stdout.txt 2> stderr.txt";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }

  std::string read(const std::string& name) const {
    std::ifstream in(dir_ / name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  json read_json(const std::string& name) const { return json::parse(read(name)); }

  fs::path dir_;
};

TEST_F(Cli, SolveFigure1) {
  ASSERT_EQ(run("gen-fig1"), 0);
  ASSERT_EQ(run("--case fig1.m --stoch fig1.json solve --mode safety --nonnegative"), 0) << read("stderr.txt");
  const json sol = read_json("solution.json");
  EXPECT_EQ(sol["status"], "optimal");
  EXPECT_NEAR(sol["p_bar"][0].get<double>(), 800.0 - 200.0 - 300.0, 1e-4);
  EXPECT_NEAR(sol["expected_cost"].get<double>(), 900.0, 1e-4);
  const double direct = sol["expected_cost"];
  ASSERT_EQ(run("--case fig1.m --stoch fig1.json solve --mode safety-cutting-plane"), 0) << read("stderr.txt");
  EXPECT_NEAR(read_json("solution.json")["expected_cost"].get<double>(), direct, 1e-5 * direct);
  EXPECT_NE(read("stdout.txt").find("tight lines"), std::string::npos);
}

TEST_F(Cli, MissingCaseIsInputError) {
  EXPECT_EQ(run("--case missing.m solve"), 2);
  EXPECT_EQ(run("solve --mode nonsense"), 2);
}

TEST_F(Cli, DcOpfNeedsNoStochasticModel) {
  ASSERT_EQ(run("gen-fig1"), 0);
  ASSERT_EQ(run("--case fig1.m solve --mode dcopf"), 0) << read("stderr.txt");
  EXPECT_EQ(read_json("solution.json")["status"], "optimal");
}

TEST_F(Cli, ShiftWritesTrace) {
  ASSERT_EQ(run("gen-fig1 --variant limited"), 0);
  ASSERT_EQ(run("--case fig1.m --stoch fig1.json --nonnegative shift --metric I,weights=inverse_limit_squared --tau 0.05 --K 2"),
            0)
      << read("stderr.txt");
  std::istringstream lines(read("trace.jsonl"));
  std::string line;
  std::vector<json> recs;
  while (std::getline(lines, line))
    if (!line.empty()) recs.push_back(json::parse(line));
  ASSERT_GE(recs.size(), 2u);
  EXPECT_EQ(recs[0]["k"], 0);
  for (std::size_t i = 1; i < recs.size(); ++i)
    if (recs[i]["stop_reason"].is_null())
      EXPECT_LT(recs[i]["delta"].get<double>(), recs[i - 1]["delta"].get<double>());
  EXPECT_TRUE(fs::exists(dir_ / "shifted_solution.json"));

  ASSERT_EQ(run("--case fig1.m --stoch fig1.json shift --K 0"), 0);
  const std::string trace = read("trace.jsonl");
  EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 1);
}

TEST_F(Cli, ShiftFromSolutionFile) {
  ASSERT_EQ(run("gen-fig1 --variant limited"), 0);
  ASSERT_EQ(run("--case fig1.m --stoch fig1.json --nonnegative solve"), 0);
  ASSERT_EQ(run("--case fig1.m --stoch fig1.json --nonnegative shift --solution solution.json --K 1"), 0) << read("stderr.txt");
  EXPECT_TRUE(fs::exists(dir_ / "trace.jsonl"));
}

TEST_F(Cli, ValidateDeterministicAndFlagsCorruption) {
  ASSERT_EQ(run("gen-fig1 --variant limited"), 0);
  ASSERT_EQ(run("--case fig1.m --stoch fig1.json --nonnegative solve"), 0);
  ASSERT_EQ(run("--case fig1.m --stoch fig1.json --seed 7 validate --solution solution.json --samples 100000"), 0)
      << read("stdout.txt") << read("stderr.txt");
  const std::string first = read("validation.json");
  const std::string csv = read("line_stats.csv");
  ASSERT_EQ(run("--case fig1.m --stoch fig1.json --seed 7 validate --solution solution.json --samples 100000 --threads 1"), 0);
  EXPECT_EQ(read("validation.json"), first);
  EXPECT_EQ(read("line_stats.csv"), csv);
  EXPECT_EQ(read_json("validation.json")["flagged_lines"], 0);

  vaopf::Grid g = vaopf::load_matpower((dir_ / "fig1.m").string());
  for (auto& ln : g.lines) ln.limit *= 0.5;
  std::ofstream((dir_ / "halved.m").string()) << vaopf::write_matpower(g);
  EXPECT_EQ(run("--case halved.m --stoch fig1.json --seed 7 validate --solution solution.json --samples 100000"), 1);
  EXPECT_GT(read_json("validation.json")["flagged_lines"].get<int>(), 0);
}

TEST_F(Cli, StatsCounts) {
  ASSERT_EQ(run("gen-fig1"), 0);
  ASSERT_EQ(run("--case fig1.m --stoch fig1.json stats"), 0);
  const json j = json::parse(read("stdout.txt"));
  EXPECT_EQ(j["alpha_vars"], 11);
  EXPECT_EQ(j["D_vars"], 24);
  EXPECT_EQ(j["gamma_vars"], 23);
}

TEST_F(Cli, SyntheticCase) {
  fs::copy_file(fs::path(VAOPF_DATA_DIR) / "case9.m", dir_ / "case9.m");
  ASSERT_EQ(run("--case case9.m --seed 3 gen-synthetic --sources 2"), 0) << read("stderr.txt");
  ASSERT_TRUE(fs::exists(dir_ / "case9_synthetic.m"));
  ASSERT_EQ(run("--case case9_synthetic.m --stoch case9_synthetic.json solve"), 0) << read("stderr.txt");
}

}  // namespace
