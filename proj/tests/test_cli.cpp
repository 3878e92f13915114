#include <lindblad.hpp>
#include <lindblad/experiment.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace lindblad;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig = R"(name: small
model:
  zoo: tfim
  n_q: 2
integrator: dilated
total_time: 1.0
grid:
  kind: chebyshev
  n: 3
  interval: 0.01
extrapolation:
  method: interpolation
shots:
  n_shots: 1000
  seed: 5
)";

class Workdir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("lindblad_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
    return dir_ / name;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  int run(const std::string& args) const {
    const std::string cmd = std::string("\"") + LINDBLAD_EXTRAP_BIN + "\" " + args + " > \"" +
                            (dir_ / "stdout.txt").string() + "\" 2> \"" + (dir_ / "stderr.txt").string() + "\"";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Workdir, ParsesConfigAndFillsDefaults) {
  const ExperimentConfig c = load_config(write("c.yaml", kSmallConfig));
  EXPECT_EQ(c.model.zoo, "tfim");
  EXPECT_EQ(c.model.tfim.n_q, 2);
  EXPECT_EQ(c.integrator, IntegratorKind::DilatedHamiltonian);
  ASSERT_EQ(c.grid.kinds.size(), 1u);
  EXPECT_EQ(c.grid.kinds[0], GridKind::Chebyshev);
  EXPECT_EQ(c.extrapolation.degree, 3);
  EXPECT_EQ(c.shots.mode, ShotMode::Born);
  EXPECT_EQ(c.shots.trials, 1);
}

TEST_F(Workdir, UnknownKeyReportsLine) {
  std::string text = kSmallConfig;
  text += "shots_typo: 3\n";
  try {
    load_config(write("c.yaml", text));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(":16:"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("shots_typo"), std::string::npos);
  }
}

TEST_F(Workdir, RejectsInconsistentDegrees) {
  std::string bad = kSmallConfig;
  bad.replace(bad.find("method: interpolation"), 21, "method: interpolation\n  degree: 2");
  EXPECT_THROW(load_config(write("a.yaml", bad)), ConfigError);
  std::string reg = kSmallConfig;
  reg.replace(reg.find("method: interpolation"), 21, "method: regression\n  degree: 3");
  EXPECT_THROW(load_config(write("b.yaml", reg)), ConfigError);
  reg.replace(reg.find("degree: 3"), 9, "degree: 2");
  EXPECT_EQ(load_config(write("c.yaml", reg)).extrapolation.degree, 2);
  EXPECT_THROW(load_config(write("d.yaml", "grid: [1, 2")), ConfigError);
}

TEST_F(Workdir, ConfigRoundTripsThroughMetaJson) {
  const ExperimentConfig c = load_config(write("c.yaml", kSmallConfig));
  const nlohmann::json meta = {{"config", config_to_json(c)}};
  const ExperimentConfig back = load_config(write("meta.json", meta.dump()));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST_F(Workdir, ShippedRecipesParse) {
  for (const char* fig : {"fig1", "fig2", "fig3", "fig4"}) {
    const ExperimentConfig c = load_config(fs::path(LINDBLAD_CONFIG_DIR) / (std::string(fig) + ".yaml"));
    EXPECT_EQ(c.grid.kinds.size(), 2u) << fig;
    EXPECT_GE(c.shots.trials, 10) << fig;
  }
}

TEST_F(Workdir, BinaryExitCodes) {
  const fs::path cfg = write("c.yaml", kSmallConfig);
  EXPECT_EQ(run("curve --config \"" + cfg.string() + "\" --dry-run"), 0);
  EXPECT_EQ(run("verify --scope sequences --l 0.5"), 2);
  EXPECT_EQ(run("verify --scope bogus"), 2);
  EXPECT_EQ(run("curve --config \"" + (dir_ / "missing.yaml").string() + "\""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("verify --scope sequences --l 2 --out \"" + dir_.string() + "\""), 0);
  EXPECT_TRUE(nlohmann::json::parse(slurp(dir_ / "verify.json"))["pass"].get<bool>());
}

TEST_F(Workdir, CurveThenExtrapolate) {
  const fs::path cfg = write("c.yaml", kSmallConfig);
  const fs::path out = dir_ / "run";
  ASSERT_EQ(run("curve --config \"" + cfg.string() + "\" --out \"" + out.string() + "\""), 0) << slurp(dir_ / "stderr.txt");
  const std::string csv = slurp(out / "curve.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "node_index,tau,step_count,n_shots,mean,seed,noiseless,reference");
  const auto meta = nlohmann::json::parse(slurp(out / "meta.json"));
  EXPECT_EQ(meta["library_version"], kLibraryVersion);
  EXPECT_TRUE(meta.contains("generator_bound"));
  const auto res = nlohmann::json::parse(slurp(out / "result.json"));
  EXPECT_TRUE(res.contains("value_at_zero"));

  ASSERT_EQ(run("extrapolate --curve \"" + (out / "curve.csv").string() + "\" --method richardson --out \"" +
                (dir_ / "ex").string() + "\""),
            0);
  const auto ex = nlohmann::json::parse(slurp(dir_ / "ex" / "result.json"));
  EXPECT_NEAR(ex["value_at_zero"].get<double>(), res["value_at_zero"].get<double>(), 1e-12);
  EXPECT_TRUE(ex.contains("best_single_node_error"));
  EXPECT_EQ(run("extrapolate --curve \"" + (out / "curve.csv").string() + "\" --method regression --degree 3"), 2);
}

TEST_F(Workdir, ExtrapolatesConstantCurve) {
  const fs::path curve = write("curve.csv", "tau,mean\n0.1,0.25\n0.2,0.25\n0.3,0.25\n");
  ASSERT_EQ(run("extrapolate --curve \"" + curve.string() + "\" --method regression --degree 1"), 0);
  const auto j = nlohmann::json::parse(slurp(dir_ / "stdout.txt"));
  EXPECT_NEAR(j["value_at_zero"].get<double>(), 0.25, 1e-14);
  EXPECT_EQ(run("extrapolate --curve \"" + write("bad.csv", "tau,value\n0.1,1\n").string() + "\""), 2);
}

TEST_F(Workdir, RerunFromMetaIsByteIdentical) {
  const fs::path cfg = write("c.yaml", kSmallConfig);
  ASSERT_EQ(run("curve --config \"" + cfg.string() + "\" --out \"" + (dir_ / "a").string() + "\" --jobs 1"), 0);
  ASSERT_EQ(run("curve --config \"" + (dir_ / "a" / "meta.json").string() + "\" --out \"" + (dir_ / "b").string() +
                "\" --jobs 3"),
            0);
  EXPECT_EQ(slurp(dir_ / "a" / "curve.csv"), slurp(dir_ / "b" / "curve.csv"));
  ASSERT_EQ(run("curve --config \"" + cfg.string() + "\" --out \"" + (dir_ / "c").string() + "\" --seed 6"), 0);
  EXPECT_NE(slurp(dir_ / "a" / "curve.csv"), slurp(dir_ / "c" / "curve.csv"));
}

TEST_F(Workdir, ReproduceWritesFigureInputs) {
  ASSERT_EQ(run("reproduce fig3 --trials 2 --out \"" + dir_.string() + "\""), 0) << slurp(dir_ / "stderr.txt");
  const fs::path fig = dir_ / "fig3";
  for (const char* f : {"meta.json", "summary.json", "figure_spec.json", "equidistant/curve.csv",
                        "chebyshev/result.json"})
    EXPECT_TRUE(fs::exists(fig / f)) << f;
  const auto spec = nlohmann::json::parse(slurp(fig / "figure_spec.json"));
  ASSERT_EQ(spec["panels"].size(), 2u);
  EXPECT_EQ(spec["panels"][0]["position"], "left");
  EXPECT_TRUE(fs::exists(fig / spec["panels"][1]["result"].get<std::string>()));
  const auto summary = nlohmann::json::parse(slurp(fig / "summary.json"));
  EXPECT_EQ(summary["errors"]["chebyshev"].size(), 2u);
  EXPECT_EQ(summary["config"]["shots"]["trials"], 2);
  EXPECT_EQ(nlohmann::json::parse(slurp(fig / "chebyshev" / "result.json"))["config"]["name"], "fig3");
}
