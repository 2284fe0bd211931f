#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "harness.hpp"

namespace cgrom::harness {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

std::string error_of(const std::string& text) {
  try {
    (void)parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, MinimalBurgersGetsDefaults) {
  const auto c = parse_config_text(R"({"model": "burgers", "basis": {"size": 4}, "output": "out"})");
  EXPECT_EQ(c.model, "burgers");
  EXPECT_EQ(c.scheme, "backward_euler");
  EXPECT_EQ(c.steps, 150);
  EXPECT_EQ(c.training.size(), 4u);
  EXPECT_EQ(c.online.size(), 2u);
  EXPECT_EQ(c.projections.size(), 2u);
  EXPECT_EQ(c.reference, ReferencePolicy::initial);
  ASSERT_EQ(c.combinations.size(), 1u);
  EXPECT_TRUE(c.combinations[0].empty());
  EXPECT_EQ(combination_label(c.constraints, c.combinations[0]), "none");
}

TEST(Config, DeclaredConstraintsExpandToPowerSet) {
  const auto c = parse_config_text(
      R"({"model": "burgers", "basis": {"size": 4}, "constraints": {"rsum": {"matrix": "ones"}, "tvd": true},
          "output": "out"})");
  ASSERT_EQ(c.combinations.size(), 4u);
  EXPECT_EQ(combination_label(c.constraints, {}), "rsum0_tvd0");
  EXPECT_EQ(combination_label(c.constraints, {"tvd"}), "rsum0_tvd1");
  EXPECT_EQ(combination_label(c.constraints, {"rsum", "tvd"}), "rsum1_tvd1");
}

TEST(Config, ExplicitCombinationsAreOrdered) {
  const auto c = parse_config_text(
      R"({"model": "burgers", "basis": {"size": 4}, "constraints": {"rsum": true, "tvd": true},
          "combinations": [["tvd", "rsum"], []], "output": "out"})");
  ASSERT_EQ(c.combinations.size(), 2u);
  EXPECT_EQ(c.combinations[0], (std::vector<std::string>{"rsum", "tvd"}));
}

TEST(Config, RejectsUnknownKeysByPath) {
  EXPECT_NE(error_of(R"({"model": "burgers", "basis": {"size": 4}, "output": "o", "colour": 1})").find("colour"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"model": "burgers", "basis": {"size": 4, "rank": 2}, "output": "o"})").find("basis.rank"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"model": "burgers", "basis": {"size": 4}, "solver": {"tol": 1}, "output": "o"})")
                .find("solver.tol"),
            std::string::npos);
}

TEST(Config, RejectsInvalidValues) {
  EXPECT_NE(error_of(R"({"model": "euler", "basis": {"size": 4}, "constraints": {"tvb": {"factor": 0}}, "output": "o"})")
                .find("constraints.tvb.factor"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"model": "euler", "basis": {"size": 4}, "constraints": {"tvb": {"factor": -1.5}}, "output": "o"})"),
            "");
  EXPECT_NE(error_of(R"({"model": "burgers", "basis": {"size": 4}, "constraints": {"ec": true}, "output": "o"})")
                .find("constraints.ec"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"model": "euler", "basis": {"size": 4}, "constraints": {"rsum": true}, "output": "o"})"), "");
  EXPECT_NE(error_of(R"({"model": "burgers", "basis": {"size": 4}, "combinations": [["tvd"]], "output": "o"})")
                .find("not declared"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"model": "burgers", "basis": {"size": 0}, "output": "o"})").find("basis.size"), std::string::npos);
  EXPECT_NE(error_of(R"({"model": "burgers", "output": "o"})").find("basis"), std::string::npos);
  EXPECT_NE(error_of(R"({"model": "burgers", "basis": {"size": 4}})").find("output"), std::string::npos);
  EXPECT_NE(error_of(R"({"model": "heat", "basis": {"size": 4}, "output": "o"})").find("model"), std::string::npos);
  EXPECT_NE(error_of(R"({"model": "burgers", "basis": {"size": 4}, "online": [[1.0]], "output": "o"})")
                .find("online"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"model": "burgers", "basis": {"size": 4}, "snapshot_study": {}, "output": "o"})")
                .find("snapshot_study"),
            std::string::npos);
  EXPECT_NE(error_of("{ not json"), "");
}

TEST(Config, RepositoryConfigsParse) {
  for (const auto& entry : fs::directory_iterator(fs::path(CGROM_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW((void)parse_config(entry.path().string())) << entry.path();
  }
}

class HarnessRun : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("cgrom_harness_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  [[nodiscard]] ExperimentConfig small_burgers(const std::string& extra = "") const {
    return parse_config_text(R"({"model": "burgers", "model_options": {"size": 30}, "scheme": {"steps": 12},
        "training": [[0.8, 0.2], [1.2, 0.6]], "basis": {"size": 4},
        "constraints": {"rsum": {"matrix": "ones"}, "tvd": true}, "online": [[1.0, 0.4]],
        "sweep": {"sizes": [2, 3]}, )" +
                             extra + R"("output": ")" + root_.string() + R"("})");
  }

  static std::map<std::string, std::string> snapshot_tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
      if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
    return out;
  }

  fs::path root_;
};

TEST_F(HarnessRun, OfflineOnlineArtifacts) {
  const auto config = small_burgers();
  const auto offline = run_offline(config);
  EXPECT_TRUE(offline.all_completed);
  for (const char* name : {"basis.bin", "singular_values.csv", "training_tv.csv", "offline.log"})
    EXPECT_TRUE(fs::exists(root_ / name)) << name;

  const auto online = run_online(config);
  ASSERT_EQ(online.runs.size(), 8u);  // 2 projections x 4 combinations
  EXPECT_TRUE(fs::exists(root_ / "online" / "summary.csv"));
  EXPECT_EQ(line_count(root_ / "online" / "summary.csv"), 9u);
  for (const auto& run : online.runs) {
    const fs::path dir(run.directory);
    ASSERT_TRUE(fs::exists(dir / "metrics.csv")) << dir;
    if (run.completed) {
      EXPECT_EQ(line_count(dir / "metrics.csv"), 13u) << dir;  // header + N_T rows
      EXPECT_EQ(line_count(dir / "diagnostics.csv"), 13u) << dir;
      EXPECT_FALSE(fs::exists(dir / "status.txt"));
    } else {
      EXPECT_TRUE(fs::exists(dir / "status.txt")) << dir;
    }
    std::ifstream in(dir / "metrics.csv");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header.rfind("step,time,state_error", 0), 0u) << header;
  }
}

TEST_F(HarnessRun, ArtifactsAreByteIdenticalAcrossRuns) {
  const auto config = small_burgers();
  (void)run_offline(config);
  (void)run_online(config);
  const auto first = snapshot_tree(root_);
  (void)run_offline(config);
  (void)run_online(config);
  const auto second = snapshot_tree(root_);
  ASSERT_FALSE(first.empty());
  EXPECT_EQ(first, second);
}

TEST_F(HarnessRun, FailedRunWritesStatusSidecar) {
  auto config = small_burgers(R"("projections": ["galerkin"], "combinations": [["rsum"]], "hybrid": {"maxfev": 1}, )");
  (void)run_offline(config);
  const auto online = run_online(config);
  ASSERT_EQ(online.runs.size(), 1u);
  EXPECT_FALSE(online.all_completed);
  const auto& run = online.runs[0];
  EXPECT_FALSE(run.completed);
  EXPECT_EQ(run.failed_step, 1);
  EXPECT_TRUE(fs::exists(fs::path(run.directory) / "status.txt"));
  EXPECT_NE(read_file(root_ / "online" / "summary.csv").find(",0,1,"), std::string::npos);
}

TEST_F(HarnessRun, SweepAndFom) {
  const auto config = small_burgers(R"("projections": ["lspg"], "combinations": [[]], )");
  (void)run_offline(config);
  const auto sweep = run_sweep(config);
  EXPECT_TRUE(sweep.all_completed);
  EXPECT_EQ(sweep.runs.size(), 2u);
  EXPECT_TRUE(fs::exists(root_ / "sweep" / "summary.csv"));
  EXPECT_EQ(line_count(root_ / "sweep" / "summary.csv"), 3u);

  const auto fom = run_fom(config);
  EXPECT_TRUE(fom.all_completed);
  EXPECT_EQ(line_count(root_ / "fom" / "mu0" / "states.csv"), 14u);  // header + x^0..x^{N_T}
}

TEST_F(HarnessRun, OnlineWithoutBasisFails) {
  EXPECT_ANY_THROW((void)run_online(small_burgers()));
}

}  // namespace
}  // namespace cgrom::harness
