#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "mflab/error.hpp"
#include "mflab/experiment.hpp"

using namespace mflab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mflab_test_" + name);
  fs::remove_all(p);
  return p;
}

json cfg(const std::string& text) { return parse_config_text(text); }

std::string config_error(const std::string& text) {
  try {
    resolve_config(cfg(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, UnknownKeyNamesPath) {
  EXPECT_NE(config_error(R"({"experiment":"bounds_table","mcmc":{"samplez":3}})").find("mcmc.samplez"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"experiment":"bounds_table","extra":1})").find("extra"), std::string::npos);
}

TEST(Config, TypeAndRangeErrors) {
  EXPECT_NE(config_error(R"({"experiment":"bounds_table","mcmc":{"samples":"many"}})").find("mcmc.samples"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"experiment":"bounds_table","solver":{"damping":1.5}})").find("solver.damping"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"experiment":"unknown"})").find("experiment"), std::string::npos);
  EXPECT_NE(config_error(R"({"seed":1})").find("experiment"), std::string::npos);
  EXPECT_THROW(parse_config_text("{\"experiment\": "), ConfigError);
}

TEST(Config, DefaultsCarryRationale) {
  for (const auto& d : config_defaults()) EXPECT_FALSE(d.rationale.empty()) << d.path;
  const auto c = resolve_config(cfg(R"({"experiment":"chaos_sweep","seed":42})"));
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.at("mcmc.samples").get<int>(), 20000);
}

TEST(Config, ModelBlocks) {
  EXPECT_EQ(model_from_config(cfg(R"({"preset":"quadratic"})")).kind(), ModelKind::QuadraticOracle);
  const auto m = model_from_config(cfg(
      R"({"kind":"example_nn","sigma":1,"lambda":2,"data":[{"x":[1.0],"y":0.5},{"x":[-1.0],"y":0.1}],
          "loss":{"kind":"squared","clip_radius":3},"activation":"tanh"})"));
  EXPECT_EQ(m.data().size(), 2u);
  EXPECT_DOUBLE_EQ(m.data()[0].weight, 0.5);
  EXPECT_THROW(model_from_config(cfg(R"({"kind":"zero","sigma":1,"lambda":1,"kappa":2})")), ConfigError);
  EXPECT_THROW(model_from_config(cfg(R"({"kind":"zero","sigma":-1,"lambda":1})")), ConfigError);
  EXPECT_THROW(model_from_config(cfg(R"({"preset":"nope"})")), ConfigError);
}

TEST(Config, DatasetCsv) {
  const fs::path dir = scratch("dataset");
  fs::create_directories(dir);
  std::ofstream(dir / "data.csv") << "x_1,y,weight\n1.0,0.5,0.25\n-0.5,0.2,0.75\n";
  const auto m = model_from_config(
      cfg(R"({"kind":"example_nn","sigma":1,"lambda":1,"dataset_csv":"data.csv"})"), dir);
  ASSERT_EQ(m.data().size(), 2u);
  EXPECT_DOUBLE_EQ(m.data()[1].weight, 0.75);
}

TEST(Run, BoundsTableTrivial) {
  const fs::path out = scratch("bounds");
  const auto r = run_experiment(
      cfg(R"({"experiment":"bounds_table","bounds":{"beta_hat":[0],"B":[0],"sigma":[1,2],"lambda":[1,4]}})"), out);
  EXPECT_TRUE(r.all_pass);
  EXPECT_TRUE(fs::exists(out / "bounds.csv"));
  EXPECT_TRUE(fs::exists(out / "summary.md"));
  EXPECT_EQ(r.manifest["seed"].get<int>(), 0);
  EXPECT_EQ(r.manifest["config_hash"].get<std::string>().size(), 16u);
}

TEST(Run, ChaosZeroModel) {
  const fs::path out = scratch("chaos_zero");
  const auto r = run_experiment(cfg(R"({"experiment":"chaos_sweep","model":{"preset":"zero"},
      "chaos":{"N":[2,4],"pi_draws":5000},"mcmc":{"samples":2000,"burnin":500}})"),
                                out);
  EXPECT_TRUE(r.all_pass);
  for (const auto& row : r.manifest["results"]["rows"]) EXPECT_NEAR(row["kl"].get<double>(), 0.0, 1e-12);
  const std::string md = render_report(out);
  EXPECT_NE(md.find("| N | KL | CI | poc bound | poc-ii bound | margin |"), std::string::npos);
}

TEST(Run, DeterministicCsv) {
  const std::string text = R"({"experiment":"chaos_sweep","seed":7,"chaos":{"N":[2],"pi_draws":4000},
      "mcmc":{"samples":1000,"burnin":200,"chains":2}})";
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  run_experiment(cfg(text), a);
  RunOverrides ov;
  ov.workers = 2;
  run_experiment(cfg(text), b, ov);
  for (const auto& entry : fs::directory_iterator(a)) {
    if (entry.path().extension() != ".csv") continue;
    std::ifstream fa(entry.path()), fb(b / entry.path().filename());
    const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
    EXPECT_EQ(sa, sb) << entry.path();
  }
}

TEST(Run, TiltProfileReportsThreshold) {
  const fs::path out = scratch("tilt");
  const auto r = run_experiment(cfg(R"({"experiment":"tilt_profile","model":{"preset":"zero"}})"), out);
  EXPECT_TRUE(r.all_pass);
  EXPECT_NE(render_report(out).find("t* = "), std::string::npos);
  EXPECT_THROW(run_experiment(cfg(R"({"experiment":"tilt_profile","model":{"preset":"quadratic"}})"), out),
               ConfigError);
}

TEST(Report, MissingManifest) { EXPECT_THROW(render_report(scratch("empty")), ConfigError); }

#ifdef MFLAB_CLI_PATH
namespace {
int cli(const std::string& args) {
  const int rc = std::system((std::string(MFLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
  return WEXITSTATUS(rc);
}
}  // namespace

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << R"({"experiment":"bounds_table","bogus":true})";
  std::ofstream(dir / "ok.json") << R"({"experiment":"bounds_table"})";
  EXPECT_EQ(cli("run --config " + (dir / "bad.json").string() + " --out " + (dir / "o1").string()), 2);
  EXPECT_EQ(cli("run --config " + (dir / "ok.json").string() + " --out " + (dir / "o2").string()), 0);
  EXPECT_EQ(cli("report " + (dir / "o2").string()), 0);
  EXPECT_EQ(cli("report " + (dir / "nothing").string()), 2);
  EXPECT_EQ(cli("bounds main --sigma 1 --lambda 1 --beta-hat 1"), 0);
  EXPECT_EQ(cli("bounds nonsense"), 2);
}
#endif
