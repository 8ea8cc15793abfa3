#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace liehom;
using namespace liehom::cli;

namespace {

constexpr const char* kOutEnv = "LIEHOM_OUT_DIR";

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string out;
};

json load_json(const std::string& path) {
  if (path.empty()) throw Error(ErrorCode::config_invalid, "no configuration given (use --config <path>)");
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::config_invalid, "cannot read configuration file '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::config_invalid, "'" + path + "' is not valid JSON: " + e.what());
  }
}

/// --out, then the environment override, then the config, then "results".
std::string output_dir(const Flags& flags, const ExperimentConfig& c, bool config_has_dir) {
  if (!flags.out.empty()) return flags.out;
  if (const char* env = std::getenv(kOutEnv); env && *env) return env;
  if (config_has_dir) return c.out_dir;
  return "results";
}

void apply_overrides(ExperimentConfig& c, const Flags& flags, const std::string& dir) {
  if (flags.seed) {
    c.seed = *flags.seed;
    c.resolved["seed"] = c.seed;
  }
  c.out_dir = dir;
  c.resolved["outputs"]["dir"] = dir;
}

int effective_threads(const Flags& flags) { return flags.threads > 0 ? flags.threads : default_threads(); }

void print_summary(const std::vector<std::string>& lines) {
  for (const auto& l : lines) std::cout << "  " << l << "\n";
}

int run_single(ExperimentKind kind, const Flags& flags) {
  const json doc = load_json(flags.config);
  ExperimentConfig c = parse_config(doc, kind);
  const bool has_dir = doc.contains("outputs") && doc["outputs"].contains("dir");
  apply_overrides(c, flags, output_dir(flags, c, has_dir));
  const int threads = effective_threads(flags);

  const auto start = std::chrono::steady_clock::now();
  const ExperimentResult result = run_experiment(c, threads);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_outputs(c.out_dir, make_manifest(c.resolved, threads), result, seconds);

  std::cout << to_string(kind) << " on " << c.group << "\n";
  print_summary(result.summary);
  std::cout << "verdict: " << (result.verdict ? "PASS" : "FAIL") << " (outputs in " << c.out_dir << ")\n";
  return result.verdict ? 0 : 1;
}

int run_preset(const std::string& name, const Flags& flags) {
  const Preset preset = make_preset(name);
  std::string root = flags.out;
  if (root.empty())
    if (const char* env = std::getenv(kOutEnv); env && *env) root = env;
  if (root.empty()) root = "results";
  const std::filesystem::path base = std::filesystem::path(root) / preset.name;
  const int threads = effective_threads(flags);

  std::cout << "preset " << preset.name << ": " << preset.description << "\n";
  std::vector<ExperimentResult> results;
  json steps = json::object();
  const auto start = std::chrono::steady_clock::now();
  for (const auto& step : preset.steps) {
    ExperimentConfig c = parse_config(step.config);
    apply_overrides(c, flags, (base / step.name).string());
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentResult r = run_experiment(c, threads);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_outputs(c.out_dir, make_manifest(c.resolved, threads), r, seconds);
    std::cout << "[" << step.name << "] " << to_string(c.kind) << (r.verdict ? " pass" : " FAIL") << "\n";
    print_summary(r.summary);
    steps[step.name] = c.resolved;
    results.push_back(std::move(r));
  }
  const PresetOutcome outcome = evaluate_preset(preset, results);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ExperimentResult aggregate;
  aggregate.report = outcome.report;
  aggregate.verdict = outcome.verdict;
  json manifest = {{"software", {{"name", kSoftwareName}, {"version", kSoftwareVersion}}},
                   {"threads", threads},
                   {"preset", preset.name},
                   {"steps", steps},
                   {"config", {{"outputs", {{"dir", base.string()}, {"formats", json::array({"json"})}}}}}};
  write_outputs(base.string(), manifest, aggregate, seconds);
  print_summary(outcome.summary);
  std::cout << "verdict: " << (outcome.verdict ? "PASS" : "FAIL") << " (outputs in " << base.string() << ")\n";
  return outcome.verdict ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale SDEs on matrix Lie groups: effective generators and homogenization checks", "liehom"};
  app.set_version_flag("--version", std::string(kSoftwareVersion));
  app.require_subcommand(1);

  Flags flags;
  app.add_option("--config", flags.config, "Experiment configuration (JSON)");
  app.add_option("--seed", flags.seed, "Override the root seed");
  app.add_option("--threads", flags.threads, "Worker threads (0 = hardware concurrency)")->check(CLI::NonNegativeNumber);
  app.add_option("--out", flags.out, "Output directory (overrides config and environment)");

  struct Entry {
    const char* name;
    ExperimentKind kind;
    const char* help;
  };
  const Entry entries[] = {
      {"decompose", ExperimentKind::decompose, "Casimir operator and isotypic components of m"},
      {"coeffs", ExperimentKind::coeffs, "Coefficients of the effective generator for Y0"},
      {"simulate", ExperimentKind::simulate, "Simulate an ensemble (group SDE, slow ODE, split or effective)"},
      {"verify", ExperimentKind::verify_limit, "Compare the slow motion with the effective diffusion"},
      {"split-test", ExperimentKind::split_test, "Pathwise check of the slow/fast splitting under dt refinement"},
      {"rate", ExperimentKind::rate, "Moment gap against the limit over a decreasing epsilon list"},
  };
  std::optional<ExperimentKind> chosen;
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    sub->fallthrough();
    sub->callback([&chosen, kind = e.kind] { chosen = kind; });
  }
  std::string preset_name;
  auto* preset = app.add_subcommand("preset", "Run a bundled experiment");
  preset->fallthrough();
  std::string preset_help = "One of:";
  for (const auto& n : preset_names()) preset_help += " " + n;
  preset->add_option("name", preset_name, preset_help)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (chosen) return run_single(*chosen, flags);
    return run_preset(preset_name, flags);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
