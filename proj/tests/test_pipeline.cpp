#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "odefit/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

class Workdir : public ::testing::Test {
 protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("odefit_cli_" + std::to_string(rd()) + "_" + std::to_string(rd()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs the fit executable with stdout/stderr captured to files in the workdir.
  int run(const std::string& args) {
    const std::string cmd = std::string("\"") + ODEFIT_FIT_EXE + "\" " + args + " > \"" + (dir_ / "stdout.txt").string() +
                            "\" 2> \"" + (dir_ / "stderr.txt").string() + "\"";
    const int rc = std::system(cmd.c_str());
#ifdef WEXITSTATUS
    return WEXITSTATUS(rc);
#else
    return rc;
#endif
  }

  std::string read(const fs::path& p) const {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  void write(const fs::path& p, const std::string& text) const {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
  }
  std::string stderr_text() const { return read(dir_ / "stderr.txt"); }
  std::string q(const fs::path& p) const { return "\"" + p.string() + "\""; }

  // Materializes the vanderpol benchmark and returns its deck path.
  fs::path vdp() {
    EXPECT_EQ(run("bench vanderpol --dir " + q(dir_)), 0);
    return dir_ / "vanderpol" / "vanderpol.xml";
  }
  void edit(const fs::path& deck, const std::string& from, const std::string& to) const {
    std::string text = read(deck);
    const auto pos = text.find(from);
    ASSERT_NE(pos, std::string::npos) << from;
    text.replace(pos, from.size(), to);
    write(deck, text);
  }
  void shrink_budget(const fs::path& deck) const {
    edit(deck, R"(swarm_size="16" iterations="30")", R"(swarm_size="6" iterations="3")");
    edit(deck, R"(max_iterations="100")", R"(max_iterations="4")");
  }

  fs::path dir_;
};

using Cli = Workdir;

}  // namespace

TEST_F(Cli, SkeletonWritesModelFile) {
  const auto deck = vdp();
  EXPECT_EQ(run("skeleton " + q(deck)), 0);
  const auto text = read(dir_ / "vanderpol" / "vanderpol.model.txt");
  EXPECT_FALSE(text.empty());
  EXPECT_NE(text.find("mu"), std::string::npos);
}

TEST_F(Cli, MissingFileExitsTwo) {
  EXPECT_EQ(run("lint " + q(dir_ / "absent.xml")), 2);
  EXPECT_NE(stderr_text().find("file not found"), std::string::npos);
  EXPECT_EQ(run("fit " + q(dir_ / "absent.xml")), 2);
}

TEST_F(Cli, MalformedXmlExitsThree) {
  write(dir_ / "bad.xml", "<deck name=\"x\"><states>");
  EXPECT_EQ(run("lint " + q(dir_ / "bad.xml")), 3);
  EXPECT_EQ(run("skeleton " + q(dir_ / "bad.xml")), 3);
}

TEST_F(Cli, LintCleanDeck) {
  const auto deck = vdp();
  EXPECT_EQ(run("lint " + q(deck) + " --out-dir " + q(dir_ / "out")), 0);
  const auto report = nlohmann::json::parse(read(dir_ / "out" / "lint_report.json"));
  EXPECT_FALSE(report.is_null());
  EXPECT_FALSE(fs::exists(dir_ / "vanderpol" / "vanderpol.fixed.xml"));
}

TEST_F(Cli, LintFixesInvertedBounds) {
  const auto deck = vdp();
  edit(deck, R"(lower="1" upper="30")", R"(lower="30" upper="1")");
  EXPECT_EQ(run("lint " + q(deck) + " --no-fix"), 1);
  EXPECT_EQ(run("lint " + q(deck) + " --fix"), 0);
  const auto fixed = dir_ / "vanderpol" / "vanderpol.fixed.xml";
  ASSERT_TRUE(fs::exists(fixed));
  EXPECT_TRUE(fs::exists(dir_ / "vanderpol" / "lint_report.json"));
  const auto d = odefit::parse_deck(read(fixed));
  EXPECT_EQ(d.parameters[0].lower, 1.0);
  EXPECT_EQ(d.parameters[0].upper, 30.0);
  // The fixed deck is clean on its own.
  EXPECT_EQ(run("lint " + q(fixed) + " --no-fix"), 0);
}

TEST_F(Cli, LintUndeclaredSymbolStaysCritical) {
  const auto deck = vdp();
  edit(deck, "-x1/mu", "-x1/nu");
  EXPECT_EQ(run("lint " + q(deck)), 1);
  EXPECT_NE(read(dir_ / "stdout.txt").find("nu"), std::string::npos);
}

TEST_F(Cli, FitWritesArtifacts) {
  const auto deck = vdp();
  shrink_budget(deck);
  const auto out = dir_ / "fit";
  ASSERT_EQ(run("fit " + q(deck) + " --out-dir " + q(out) + " --workers 2"), 0) << stderr_text();
  for (const char* f : {"params.json", "loss_history.csv", "trajectory.csv", "fit_report.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto params = nlohmann::json::parse(read(out / "params.json"));
  ASSERT_TRUE(params.contains("mu"));
  for (const char* k : {"value", "lower", "upper", "scale"}) EXPECT_TRUE(params["mu"].contains(k)) << k;
  EXPECT_EQ(params["mu"]["scale"], "linear");
  const double mu = params["mu"]["value"];
  EXPECT_GE(mu, 1.0);
  EXPECT_LE(mu, 30.0);
  const auto history = read(out / "loss_history.csv");
  EXPECT_EQ(history.rfind("stage,iteration,loss\n", 0), 0u);
  EXPECT_NE(history.find("pso,"), std::string::npos);
  const auto report = nlohmann::json::parse(read(out / "fit_report.json"));
  EXPECT_EQ(report["status"], "success");
  EXPECT_LE(report["loss_final"].get<double>(), report["loss_pso"].get<double>());
}

TEST_F(Cli, FitRefusesCriticalDeck) {
  const auto deck = vdp();
  edit(deck, "-x1/mu", "-x1/nu");
  const auto out = dir_ / "fit";
  EXPECT_EQ(run("fit " + q(deck) + " --out-dir " + q(out)), 1);
  EXPECT_FALSE(fs::exists(out / "params.json"));
  EXPECT_FALSE(fs::exists(out / "loss_history.csv"));
}

TEST_F(Cli, SimulateWithParams) {
  const auto deck = vdp();
  write(dir_ / "p.json", R"({"mu": {"value": 10}})");
  EXPECT_EQ(run("simulate " + q(deck) + " --params " + q(dir_ / "p.json") + " --out " + q(dir_ / "traj.csv")), 0);
  const auto csv = read(dir_ / "traj.csv");
  EXPECT_EQ(csv.rfind("t,x1,x2", 0), 0u) << csv.substr(0, 40);
}

TEST_F(Cli, SimulateMissingParamExitsFive) {
  const auto deck = vdp();
  write(dir_ / "p.json", R"({"nu": 3})");
  EXPECT_EQ(run("simulate " + q(deck) + " --params " + q(dir_ / "p.json")), 5);
  EXPECT_NE(stderr_text().find("missing parameter 'mu'"), std::string::npos);
}

TEST_F(Cli, UnknownBenchmarkExitsFive) { EXPECT_EQ(run("bench nosuchcase --dir " + q(dir_)), 5); }

TEST_F(Cli, BenchAllWritesEveryCase) {
  EXPECT_EQ(run("bench all --dir " + q(dir_)), 0);
  for (const auto& name : odefit::list_benchmarks()) {
    const auto& c = odefit::get_benchmark(name);
    EXPECT_TRUE(fs::exists(dir_ / c.name / c.deck_file)) << name;
  }
}
