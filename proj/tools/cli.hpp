#pragma once

#include "liehom/verify.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace liehom::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* kSoftwareName = "liehom";
inline constexpr const char* kSoftwareVersion = "0.1.0";
inline constexpr double kMaxTotalSteps = 1e9;

enum class ExperimentKind { decompose, coeffs, simulate, verify_limit, split_test, rate };

std::string_view to_string(ExperimentKind k);
std::optional<ExperimentKind> parse_kind(std::string_view s);

enum class Scheme { group_sde, slow_ode, split, effective };

/// Validated experiment description. `resolved` echoes every key with defaults filled in.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::decompose;
  std::string group;
  std::vector<int> params;
  std::optional<std::vector<int>> generators;  // h-basis indices; nullopt is the full basis
  Vector a0;                                   // h-coordinates; empty is zero
  std::optional<Vector> y0;                    // m-coordinates
  std::optional<double> epsilon;
  std::vector<double> epsilon_list;
  double T = 1.0;
  StepRule dt_rule;
  std::size_t n_traj = 0;
  std::size_t n_effective = 0;
  std::uint64_t seed = 1;
  std::string out_dir = "results";
  std::vector<std::string> formats{"json", "csv"};

  Scheme scheme = Scheme::group_sde;
  StoreMode store = StoreMode::projected;
  std::vector<double> record_fractions{0.25, 0.5, 1.0};
  std::size_t mc_samples = 100000;
  FastStart fast_start = FastStart::identity;
  double effective_dt = 1e-3;
  std::vector<double> dt_list;
  double min_ratio = 1.0;
  std::string test_function = "x0";
  bool peter_weyl = false;

  json resolved;
};

/// Throws Error(config_invalid) listing every problem found (missing keys,
/// unknown keys, wrong types, out-of-range values). `forced` is the kind named
/// by a subcommand; a conflicting "experiment" key is an error.
ExperimentConfig parse_config(const json& doc, std::optional<ExperimentKind> forced = std::nullopt);

struct CsvTable {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct ExperimentResult {
  json report;
  std::vector<CsvTable> tables;
  bool verdict = false;
  std::vector<std::string> summary;  // human-readable lines for stdout
};

/// Builds the group, fields and system of a config.
GroupSpec config_group(const ExperimentConfig& c);
MultiscaleSystem config_system(const ExperimentConfig& c, const GroupSpec& spec, double epsilon);

/// Projected total step count of the simulation work in a config.
double projected_steps(const ExperimentConfig& c);

/// Runs one experiment. Throws Error(budget_exceeded) above 1e9 projected steps.
ExperimentResult run_experiment(const ExperimentConfig& c, int threads);

/// {"value": v, "se": s} and {"value": v, "se": "exact"}.
json with_se(const json& value, const json& se);
json exact(const json& value);
json matrix_json(const RealMatrix& m);
json vector_json(const Vector& v);

/// 17 significant digits, '.' decimal separator.
std::string csv_number(double x);

/// Writes manifest.json, report.json, timing.json and the CSV tables into `dir`.
void write_outputs(const std::string& dir, const json& manifest, const ExperimentResult& result,
                   double seconds);

json make_manifest(const json& resolved, int threads);

/// Exit status for a library error: 3 for budget guards, 2 for invalid input, 1 otherwise.
int exit_code_for(ErrorCode code);

struct PresetStep {
  std::string name;
  json config;
};

struct Preset {
  std::string name;
  std::string description;
  std::vector<PresetStep> steps;
};

std::vector<std::string> preset_names();
/// Throws Error(config_invalid) for an unknown name.
Preset make_preset(std::string_view name);

/// Extra checks a preset applies to its step results (on top of the step verdicts).
struct PresetOutcome {
  bool verdict = false;
  json report;
  std::vector<std::string> summary;
};

PresetOutcome evaluate_preset(const Preset& preset, const std::vector<ExperimentResult>& results);

}  // namespace liehom::cli
