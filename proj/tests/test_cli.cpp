#include "cli.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace liehom;
using namespace liehom::cli;

namespace {

namespace fs = std::filesystem;

std::string config_error(const json& doc, std::optional<ExperimentKind> kind = std::nullopt) {
  try {
    parse_config(doc, kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config_invalid);
    return e.what();
  }
  ADD_FAILURE() << "config accepted: " << doc.dump();
  return "";
}

json small_verify() {
  return {{"experiment", "verify-limit"},
          {"group", "su2-hopf"},
          {"Y0", {1.0, 0.0}},
          {"epsilon", 0.4},
          {"T", 0.8},
          {"n_traj", 200},
          {"mc_samples", 1000},
          {"seed", 42}};
}

/// Numbers may only appear as the value or se of a tagged pair.
void collect_untagged(const json& x, const std::string& path, std::vector<std::string>& out) {
  if (x.is_object()) {
    if (x.size() == 2 && x.contains("value") && x.contains("se")) {
      EXPECT_TRUE(x["se"] == "exact" || x["se"].is_number() || x["se"].is_array()) << path;
      return;
    }
    for (const auto& [k, v] : x.items()) collect_untagged(v, path + "." + k, out);
  } else if (x.is_array()) {
    for (std::size_t i = 0; i < x.size(); ++i) collect_untagged(x[i], path + "[" + std::to_string(i) + "]", out);
  } else if (x.is_number()) {
    out.push_back(path);
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("liehom_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LIEHOM_EXE) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, EmptyListsMissingKeys) {
  const std::string msg = config_error(json::object());
  EXPECT_NE(msg.find("missing required keys"), std::string::npos) << msg;
  EXPECT_NE(msg.find("experiment"), std::string::npos) << msg;
  EXPECT_NE(msg.find("group"), std::string::npos) << msg;
}

TEST(Config, RequiredKeysPerKind) {
  const std::string msg = config_error({{"experiment", "verify-limit"}, {"group", "su2-hopf"}});
  for (const char* key : {"Y0", "epsilon", "T", "n_traj"}) EXPECT_NE(msg.find(key), std::string::npos) << key;
}

TEST(Config, UnknownKeysRejected) {
  json doc = {{"experiment", "decompose"}, {"group", "su2-hopf"}, {"colour", "blue"}};
  EXPECT_NE(config_error(doc).find("unknown key 'colour'"), std::string::npos);
  // A key valid for another kind is still unknown here.
  doc = {{"experiment", "decompose"}, {"group", "su2-hopf"}, {"epsilon", 0.1}};
  EXPECT_NE(config_error(doc).find("unknown key 'epsilon'"), std::string::npos);
  doc = {{"experiment", "decompose"}, {"group", {{"name", "su2-hopf"}, {"size", 3}}}};
  EXPECT_NE(config_error(doc).find("group: unknown key 'size'"), std::string::npos);
}

TEST(Config, ReportsEveryProblem) {
  json doc = small_verify();
  doc["epsilon"] = -1.0;
  doc["n_traj"] = "many";
  doc["fast_start"] = "random";
  const std::string msg = config_error(doc);
  EXPECT_NE(msg.find("epsilon"), std::string::npos);
  EXPECT_NE(msg.find("n_traj"), std::string::npos);
  EXPECT_NE(msg.find("fast_start"), std::string::npos);
}

TEST(Config, GroupDimensionsChecked) {
  json doc = small_verify();
  doc["Y0"] = {1.0, 0.0, 0.0};
  EXPECT_NE(config_error(doc).find("Y0: expected 2"), std::string::npos);
  doc = small_verify();
  doc["generators"] = {3};
  EXPECT_NE(config_error(doc).find("generators"), std::string::npos);
  doc = small_verify();
  doc["group"] = "klein-bottle";
  EXPECT_NE(config_error(doc).find("group"), std::string::npos);
}

TEST(Config, ListsMustDecrease) {
  json doc = {{"experiment", "rate"}, {"group", "su2-hopf"}, {"Y0", {1.0, 0.0}},
              {"epsilon_list", {0.1, 0.2}}, {"T", 1.0}, {"n_traj", 10}};
  EXPECT_NE(config_error(doc).find("epsilon_list"), std::string::npos);
  doc = {{"experiment", "split-test"}, {"group", "su2-hopf"}, {"Y0", {1.0, 0.0}}, {"epsilon", 1.0},
         {"T", 1.0}, {"n_traj", 2}, {"dt_list", {1e-3}}};
  EXPECT_NE(config_error(doc).find("dt_list"), std::string::npos);
}

TEST(Config, SubcommandConflict) {
  EXPECT_NE(config_error(small_verify(), ExperimentKind::rate).find("conflicts"), std::string::npos);
  // The subcommand supplies the kind when the document omits it.
  json doc = small_verify();
  doc.erase("experiment");
  EXPECT_EQ(parse_config(doc, ExperimentKind::verify_limit).kind, ExperimentKind::verify_limit);
}

TEST(Config, ResolvedEchoFillsDefaults) {
  const ExperimentConfig c = parse_config(small_verify());
  EXPECT_EQ(c.resolved["fast_start"], "haar");
  EXPECT_EQ(c.resolved["dt_rule"]["h"], 0.01);
  EXPECT_EQ(c.resolved["generators"], "full");
  EXPECT_EQ(c.resolved["A0"], "zero");
  EXPECT_EQ(c.resolved["record_fractions"], json({0.25, 0.5, 1.0}));
  EXPECT_FALSE(c.resolved.contains("dt_list"));
}

TEST(Run, OffGridComparisonTimes) {
  json doc = small_verify();
  doc["T"] = 0.4;  // a quarter of T/eps is 62.5 slow steps
  try {
    run_experiment(parse_config(doc), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config_invalid);
  }
}

TEST(Run, BudgetGuard) {
  json doc = small_verify();
  doc["epsilon"] = 0.001;
  doc["n_traj"] = 1000;
  const ExperimentConfig c = parse_config(doc);
  EXPECT_GT(projected_steps(c), kMaxTotalSteps);
  try {
    run_experiment(c, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::budget_exceeded);
    EXPECT_EQ(exit_code_for(e.code()), 3);
  }
  EXPECT_EQ(exit_code_for(ErrorCode::horizon_guard), 3);
  EXPECT_EQ(exit_code_for(ErrorCode::config_invalid), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::centring_violation), 1);
}

TEST(Run, ReportIsByteIdenticalAcrossRerunsAndThreads) {
  const ExperimentConfig c = parse_config(small_verify());
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  write_outputs(a.string(), make_manifest(c.resolved, 1), run_experiment(c, 1), 1.0);
  write_outputs(b.string(), make_manifest(c.resolved, 3), run_experiment(c, 3), 2.0);
  const std::string ra = slurp(a / "report.json");
  EXPECT_FALSE(ra.empty());
  EXPECT_EQ(ra, slurp(b / "report.json"));
  EXPECT_NE(slurp(a / "timing.json"), slurp(b / "timing.json"));
  EXPECT_TRUE(fs::exists(a / "moments.csv"));
  EXPECT_TRUE(fs::exists(a / "coeffs.csv"));
}

TEST(Run, EveryNumberIsTagged) {
  std::vector<json> docs{
      small_verify(),
      {{"experiment", "decompose"}, {"group", {{"name", "stiefel"}, {"params", {4, 2}}}}, {"Y0", {0, 1, 0, 0, 0}},
       {"mc_samples", 2000}, {"peter_weyl", true}},
      {{"experiment", "coeffs"}, {"group", "so4-so3"}, {"generators", {0, 1}}, {"Y0", {0, 1, 0}}, {"mc_samples", 2000}},
      {{"experiment", "simulate"}, {"group", "su2-hopf"}, {"Y0", {1, 0}}, {"epsilon", 0.5}, {"T", 0.2},
       {"n_traj", 20}, {"scheme", "split"}},
      {{"experiment", "split-test"}, {"group", "su2-hopf"}, {"Y0", {1, 0}}, {"epsilon", 1.0}, {"T", 0.1},
       {"n_traj", 2}, {"dt_list", {1e-2, 5e-3}}},
      {{"experiment", "rate"}, {"group", "su2-hopf"}, {"Y0", {1, 0}}, {"epsilon_list", {0.5, 0.25}}, {"T", 0.2},
       {"n_traj", 50}, {"test_function", "x0*x1"}},
  };
  for (const auto& doc : docs) {
    const ExperimentResult r = run_experiment(parse_config(doc), 1);
    std::vector<std::string> untagged;
    collect_untagged(r.report, "", untagged);
    EXPECT_TRUE(untagged.empty()) << doc["experiment"] << ": " << untagged.front();
    EXPECT_TRUE(r.report.contains("verdict"));
  }
}

TEST(Run, SimulateSchemesAgreeOnManifold) {
  for (const char* scheme : {"group-sde", "slow-ode", "split", "effective"}) {
    json doc = {{"experiment", "simulate"}, {"group", {{"name", "so_n1-sphere"}, {"params", {3}}}},
                {"Y0", {1, 0, 0}}, {"epsilon", 0.5}, {"T", 0.2}, {"n_traj", 10}, {"scheme", scheme},
                {"store", "group"}, {"mc_samples", 1000}};
    const ExperimentResult r = run_experiment(parse_config(doc), 1);
    EXPECT_TRUE(r.verdict) << scheme;
    EXPECT_EQ(r.report["manifold"], "so_n1-sphere(3)") << scheme;
    ASSERT_EQ(r.tables.size(), 3u) << scheme;
    EXPECT_EQ(r.tables[1].rows.size(), 10u * 3u) << scheme;
  }
}

TEST(Csv, SeventeenSignificantDigitsRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) {
    const std::string s = csv_number(x);
    EXPECT_EQ(std::stod(s), x);
    EXPECT_EQ(s.find(','), std::string::npos);
  }
}

TEST(Presets, CatalogAndUnknownName) {
  for (const auto& name : preset_names()) {
    const Preset p = make_preset(name);
    ASSERT_FALSE(p.steps.empty()) << name;
    for (const auto& step : p.steps) EXPECT_NO_THROW(parse_config(step.config)) << name << "/" << step.name;
  }
  try {
    make_preset("torus");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config_invalid);
  }
}

TEST(Binary, ExitCodes) {
  const fs::path dir = scratch("bin");
  {
    std::ofstream(dir / "empty.json") << "{}";
    std::ofstream(dir / "broken.json") << "{\"group\": ";
  }
  json budget = small_verify();
  budget["epsilon"] = 0.001;
  budget["n_traj"] = 1000;
  std::ofstream(dir / "budget.json") << budget.dump();
  json failing = {{"experiment", "split-test"}, {"group", "su2-hopf"}, {"Y0", {1, 0}}, {"epsilon", 1.0},
                  {"T", 0.1}, {"n_traj", 2}, {"dt_list", {1e-2, 5e-3}}, {"min_ratio", 100.0}};
  std::ofstream(dir / "failing.json") << failing.dump();

  const std::string out = " --out " + (dir / "out").string();
  EXPECT_EQ(run_cli("decompose --config " + (dir / "empty.json").string() + out), 2);
  EXPECT_EQ(run_cli("verify --config " + (dir / "broken.json").string() + out), 2);
  EXPECT_EQ(run_cli("verify --config " + (dir / "missing.json").string() + out), 2);
  EXPECT_EQ(run_cli("verify --config " + (dir / "budget.json").string() + out), 3);
  EXPECT_EQ(run_cli("split-test --config " + (dir / "failing.json").string() + out), 1);
  EXPECT_EQ(run_cli("preset no-such-preset" + out), 2);
  EXPECT_EQ(run_cli("preset sphere-casimir" + out), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "sphere-casimir" / "report.json"));
  EXPECT_TRUE(fs::exists(dir / "out" / "sphere-casimir" / "n4" / "components.csv"));
}

TEST(Binary, OutputDirectoryPrecedence) {
  const fs::path dir = scratch("outdir");
  json doc = {{"experiment", "decompose"}, {"group", "su2-hopf"},
              {"outputs", {{"dir", (dir / "from_config").string()}}}};
  std::ofstream(dir / "c.json") << doc.dump();
  const std::string cfg = " --config " + (dir / "c.json").string();
  EXPECT_EQ(run_cli("decompose" + cfg), 0);
  EXPECT_TRUE(fs::exists(dir / "from_config" / "manifest.json"));
  ASSERT_EQ(setenv("LIEHOM_OUT_DIR", (dir / "from_env").c_str(), 1), 0);
  EXPECT_EQ(run_cli("decompose" + cfg), 0);
  EXPECT_TRUE(fs::exists(dir / "from_env" / "report.json"));
  EXPECT_EQ(run_cli("decompose" + cfg + " --out " + (dir / "from_flag").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "from_flag" / "report.json"));
  unsetenv("LIEHOM_OUT_DIR");

  const json manifest = json::parse(slurp(dir / "from_flag" / "manifest.json"));
  EXPECT_EQ(manifest["software"]["name"], kSoftwareName);
  EXPECT_EQ(manifest["software"]["version"], kSoftwareVersion);
  EXPECT_EQ(manifest["config"]["outputs"]["dir"], (dir / "from_flag").string());
}

TEST(Binary, SeedFlagOverridesConfig) {
  const fs::path dir = scratch("seed");
  json doc = {{"experiment", "coeffs"}, {"group", "so4-so3"}, {"generators", {0, 1}}, {"Y0", {1, 0, 0}},
              {"mc_samples", 5000}, {"seed", 1}};
  std::ofstream(dir / "c.json") << doc.dump();
  const std::string cfg = " --config " + (dir / "c.json").string();
  ASSERT_EQ(run_cli("coeffs" + cfg + " --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli("coeffs" + cfg + " --seed 2 --out " + (dir / "b").string()), 0);
  ASSERT_EQ(run_cli("coeffs" + cfg + " --seed 2 --threads 2 --out " + (dir / "c").string()), 0);
  EXPECT_NE(slurp(dir / "a" / "report.json"), slurp(dir / "b" / "report.json"));
  EXPECT_EQ(slurp(dir / "b" / "report.json"), slurp(dir / "c" / "report.json"));
  EXPECT_EQ(json::parse(slurp(dir / "b" / "manifest.json"))["config"]["seed"], 2);
}
