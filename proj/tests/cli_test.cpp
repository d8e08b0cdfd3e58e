#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

namespace {

namespace fs = std::filesystem;

const std::string kCli = CSOS_CLI;
const std::string kData = CSOS_DATA_DIR;

int run(const std::string& args) {
  const int status = std::system((kCli + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root = fs::temp_directory_path() / ("csos_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(root);
    fs::create_directories(root);
  }
  void TearDown() override { fs::remove_all(root); }
  std::string dir(const std::string& name) const { return (root / name).string(); }
  fs::path root;
};

TEST_F(CliTest, SepTableHasEightStatesWithSmallResiduals) {
  ASSERT_EQ(run("sep -s " + kData + "/demo_3machine.json -o " + dir("out")), 0);
  std::istringstream in(slurp(root / "out/models/sep_table.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("# csos ", 0), 0u);
  std::getline(in, line);
  EXPECT_EQ(line, "state,status,delta_1,delta_2,residual,iterations,stable");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 7u);
    EXPECT_EQ(std::stoi(cells[0]), rows);
    EXPECT_LE(std::stod(cells[4]), 1e-10) << line;
    EXPECT_EQ(cells[6], "1");
  }
  EXPECT_EQ(rows, 8);
}

TEST_F(CliTest, CertifyRerunIsByteIdentical) {
  ASSERT_EQ(run("certify -s " + kData + "/smib.json --seed 3 -o " + dir("a")), 0);
  ASSERT_EQ(run("certify -s " + kData + "/smib.json --seed 3 -o " + dir("b")), 0);
  for (const char* f : {"none.chain", "summary.json"}) {
    const auto a = slurp(root / "a/certificates" / f);
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(root / "b/certificates" / f)) << f;
  }
}

TEST_F(CliTest, MissingSystemFileLeavesNoOutput) {
  EXPECT_EQ(run("certify -s " + dir("absent.json") + " -o " + dir("out")), 1);
  EXPECT_FALSE(fs::exists(root / "out"));
}

TEST_F(CliTest, UnknownConfigFieldIsValidationFailure) {
  std::ofstream(root / "cfg.json") << R"({"system": ")" << kData << R"(/smib.json", "grid": {"n3": 4}})";
  const std::string cmd = kCli + " sep -c " + dir("cfg.json") + " -o " + dir("out") + " 2>&1";
  FILE* p = ::popen(cmd.c_str(), "r");
  ASSERT_NE(p, nullptr);
  char buf[512];
  std::string text;
  while (std::fgets(buf, sizeof(buf), p)) text += buf;
  const int status = ::pclose(p);
  EXPECT_EQ(WEXITSTATUS(status), 1);
  EXPECT_NE(text.find("grid.n3"), std::string::npos) << text;
  EXPECT_FALSE(fs::exists(root / "out"));
}

TEST_F(CliTest, NonPositiveToleranceRejected) {
  std::ofstream(root / "cfg.json") << R"({"system": ")" << kData << R"(/smib.json", "tolerances": {"margin": 0}})";
  EXPECT_EQ(run("sep -c " + dir("cfg.json") + " -o " + dir("out")), 1);
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  std::ofstream(root / "cfg.json") << R"({"system": ")" << kData << R"(/smib.json", "seed": 5, "outdir": ")"
                                   << dir("file_out") << R"("})";
  ASSERT_EQ(run("sep -c " + dir("cfg.json") + " --seed 7 -o " + dir("flag_out")), 0);
  EXPECT_FALSE(fs::exists(root / "file_out"));
  EXPECT_NE(slurp(root / "flag_out/models/sep_table.csv").find("seed=7"), std::string::npos);
  ASSERT_EQ(run("sep -c " + dir("cfg.json")), 0);
  EXPECT_NE(slurp(root / "file_out/models/sep_table.csv").find("seed=5"), std::string::npos);
}

TEST_F(CliTest, UncertifiableSequenceExitsTwo) {
  EXPECT_EQ(run("certify -s " + kData + "/stress_smib.json -o " + dir("out")), 2);
  const auto summary = slurp(root / "out/certificates/summary.json");
  EXPECT_NE(summary.find("\"certified\": false"), std::string::npos);
}

TEST_F(CliTest, PipelineWritesEveryArtifactKind) {
  const std::string base = "-s " + kData + "/smib.json -o " + dir("out") + " --grid-points 21";
  ASSERT_EQ(run("reduce " + base), 0);
  ASSERT_EQ(run("risk " + base), 0);
  const auto chain = slurp(root / "out/certificates/none.chain");
  // A different simulate setting changes the config hash but not the
  // certification inputs, so the chain file is reused as is.
  ASSERT_EQ(run("simulate " + base + " --trajectories 3"), 0);
  EXPECT_EQ(slurp(root / "out/certificates/none.chain"), chain);
  ASSERT_EQ(run("report " + base), 0);
  for (const char* f : {"models/state_1.json", "certificates/none.chain", "risk/base.csv", "risk/base.json",
                        "risk/blocking_summary.csv", "trajectories/summary.csv", "trajectories/none_run0.csv",
                        "report/summary.md", "report/summary.json"}) {
    const auto text = slurp(root / "out" / f);
    EXPECT_FALSE(text.empty()) << f;
    EXPECT_NE(text.find("config_hash"), std::string::npos) << f;
  }
  const auto traj = slurp(root / "out/trajectories/summary.csv");
  EXPECT_EQ(traj.find("diverged"), std::string::npos);
}

}  // namespace
