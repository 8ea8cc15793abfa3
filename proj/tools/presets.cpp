#include "cli.hpp"

#include <cmath>

namespace liehom::cli {

namespace {

constexpr std::uint64_t kPresetSeed = 20261016;

json limit_config(const std::string& group, std::vector<int> params, std::vector<double> y0, double eps) {
  return {{"experiment", "verify-limit"},
          {"group", {{"name", group}, {"params", params}}},
          {"Y0", y0},
          {"epsilon", eps},
          {"T", 1.0},
          {"n_traj", 2000},
          {"dt_rule", {{"h", 0.01}}},
          {"fast_start", "haar"},
          {"seed", kPresetSeed}};
}

double value_of(const json& tagged) { return tagged.at("value").get<double>(); }

/// Limit presets also check the projected scale of the effective generator.
void check_scale(const ExperimentResult& r, double expected, PresetOutcome& out) {
  const json& s = r.report.at("generator").at("projected_scale");
  const bool ok = s.is_object() && std::abs(value_of(s) - expected) <= 1e-12;
  out.report["projected_scale"] = {{"expected", exact(expected)}, {"found", s}, {"pass", ok}};
  out.summary.push_back("projected scale " + (s.is_object() ? fmt(value_of(s)) : std::string("undefined")) +
                        ", expected " + fmt(expected) + (ok ? " (pass)" : " (FAIL)"));
  out.verdict = out.verdict && ok;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"hopf-limit", "sphere-casimir", "so4-subset", "hyperbolic-limit", "stiefel-centring", "peter-weyl"};
}

Preset make_preset(std::string_view name) {
  Preset p;
  p.name = std::string(name);
  if (name == "hopf-limit") {
    p.description = "Hopf fibration SU(2) -> S^2(1/2): slow random ODE at eps = 0.05 against the effective diffusion";
    p.steps.push_back({"limit", limit_config("su2-hopf", {}, {1.0, 0.0}, 0.05)});
  } else if (name == "sphere-casimir") {
    p.description = "Casimir eigenvalue of SO(n+1)/SO(n) for n = 2..6";
    for (int n = 2; n <= 6; ++n)
      p.steps.push_back({"n" + std::to_string(n),
                         {{"experiment", "decompose"},
                          {"group", {{"name", "so_n1-sphere"}, {"params", {n}}}},
                          {"seed", kPresetSeed}}});
  } else if (name == "so4-subset") {
    p.description = "SO(4)/SO(3) driven by A12, A13 only: eigenvalues and Monte Carlo coefficients";
    p.steps.push_back({"decompose",
                       {{"experiment", "decompose"}, {"group", "so4-so3"}, {"generators", {0, 1}}, {"seed", kPresetSeed}}});
    for (int k = 0; k < 3; ++k) {
      std::vector<double> y0(3, 0.0);
      y0[static_cast<std::size_t>(k)] = 1.0;
      p.steps.push_back({"coeffs_Y" + std::to_string(k + 1),
                         {{"experiment", "coeffs"},
                          {"group", "so4-so3"},
                          {"generators", {0, 1}},
                          {"Y0", y0},
                          {"mc_samples", 1000000},
                          {"seed", kPresetSeed + static_cast<std::uint64_t>(k)}}});
    }
  } else if (name == "hyperbolic-limit") {
    p.description = "Hyperbolic space SO(1,3)/SO(3): slow random ODE at eps = 0.1 against the effective diffusion";
    p.steps.push_back({"limit", limit_config("hyperbolic", {3}, {1.0, 0.0, 0.0}, 0.1)});
  } else if (name == "stiefel-centring") {
    p.description = "Stiefel V(4,2): the fixed vector is its own Haar average, a transverse vector averages to zero";
    const GroupSpec spec = make_group("stiefel", std::vector<int>{4, 2});
    const RealMatrix m0 = fixed_space_basis(spec);
    const Vector fixed = m0.col(0);
    // First m-basis vector orthogonal to the fixed space.
    Vector transverse;
    for (int j = 0; j < spec.m_dim(); ++j) {
      const Vector e = Vector::Unit(spec.m_dim(), j);
      if ((m0.transpose() * e).norm() < 1e-12) {
        transverse = e;
        break;
      }
    }
    auto cfg = [&](const Vector& y) {
      return json{{"experiment", "decompose"},
                  {"group", {{"name", "stiefel"}, {"params", {4, 2}}}},
                  {"Y0", vector_json(y)},
                  {"mc_samples", 100000},
                  {"seed", kPresetSeed}};
    };
    p.steps.push_back({"fixed", cfg(fixed)});
    p.steps.push_back({"transverse", cfg(transverse)});
  } else if (name == "peter-weyl") {
    p.description = "Haar orthogonality of matrix coefficients on the 3-dimensional component of SO(4)/SO(3)";
    p.steps.push_back({"sphere3",
                       {{"experiment", "decompose"},
                        {"group", {{"name", "so_n1-sphere"}, {"params", {3}}}},
                        {"peter_weyl", true},
                        {"mc_samples", 1000000},
                        {"seed", kPresetSeed}}});
  } else {
    std::string list;
    for (const auto& n : preset_names()) list += (list.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::config_invalid, "unknown preset '" + std::string(name) + "'; available: " + list);
  }
  return p;
}

PresetOutcome evaluate_preset(const Preset& preset, const std::vector<ExperimentResult>& results) {
  PresetOutcome out;
  out.verdict = true;
  out.report["preset"] = preset.name;
  json steps = json::object();
  for (std::size_t i = 0; i < results.size(); ++i) {
    steps[preset.steps[i].name] = results[i].verdict;
    out.verdict = out.verdict && results[i].verdict;
  }
  out.report["step_verdicts"] = steps;

  if (preset.name == "hopf-limit") {
    check_scale(results.at(0), 0.5, out);
  } else if (preset.name == "hyperbolic-limit") {
    const int n = 3;
    check_scale(results.at(0), 8.0 / (n * (n - 1)), out);
  } else if (preset.name == "sphere-casimir") {
    json table = json::array();
    out.summary.push_back("  n   lambda        (n-1)/4   bilinear-form lambda");
    for (std::size_t i = 0; i < results.size(); ++i) {
      const int n = static_cast<int>(i) + 2;
      const json& comps = results[i].report.at("components");
      const bool single = comps.size() == 1;
      const double lambda = value_of(comps.at(0).at("lambda"));
      const double bilinear = value_of(comps.at(0).at("lambda_bilinear_form"));
      const double expected = (n - 1) / 4.0;
      const bool ok = single && std::abs(lambda - expected) <= 1e-12 && std::abs(bilinear - expected) <= 1e-12;
      out.verdict = out.verdict && ok;
      table.push_back({{"n", exact(n)},
                       {"lambda", exact(lambda)},
                       {"lambda_bilinear_form", exact(bilinear)},
                       {"expected", exact(expected)},
                       {"pass", ok}});
      char line[96];
      std::snprintf(line, sizeof line, "  %d   %.12f  %.4f    %.12f%s", n, lambda, expected, bilinear,
                    ok ? "" : "  FAIL");
      out.summary.push_back(line);
    }
    out.report["lambda_table"] = std::move(table);
  } else if (preset.name == "so4-subset") {
    // Y1 spans the lambda = 1/2 component, Y2 and Y3 the lambda = 1/4 one.
    const double lambdas[] = {0.5, 0.25, 0.25};
    const json& comps = results.at(0).report.at("components");
    const bool spectrum_ok = comps.size() == 2 && std::abs(value_of(comps[0]["lambda"]) - 0.25) <= 1e-12 &&
                             std::abs(value_of(comps[1]["lambda"]) - 0.5) <= 1e-12 &&
                             comps[0]["dim"]["value"] == 2 && comps[1]["dim"]["value"] == 1;
    out.verdict = out.verdict && spectrum_ok;
    out.summary.push_back(std::string("Casimir spectrum {1/4 (dim 2), 1/2 (dim 1)}: ") +
                          (spectrum_ok ? "pass" : "FAIL"));
    json checks = json::array();
    for (int k = 0; k < 3; ++k) {
      const json& g = results.at(static_cast<std::size_t>(k) + 1).report.at("generator");
      const json& a = g.at("a").at("value");
      const json& se = g.at("a").at("se");
      const double expected = 1.0 / (3.0 * lambdas[k]);
      // a = Id / (3 lambda) is basis independent, so the target basis does not matter.
      double worst = 0.0;
      bool ok = true;
      for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.size(); ++j) {
          const double target = i == j ? expected : 0.0;
          const double s = se.is_array() ? se[i][j].get<double>() : 0.0;
          const double dev = std::abs(a[i][j].get<double>() - target);
          worst = std::max(worst, s > 0.0 ? dev / s : (dev == 0.0 ? 0.0 : HUGE_VAL));
          ok = ok && dev <= 4.0 * s;
        }
      out.verdict = out.verdict && ok;
      checks.push_back({{"Y", "Y" + std::to_string(k + 1)},
                        {"expected_diagonal", exact(expected)},
                        {"max_deviation_in_se", exact(worst)},
                        {"pass", ok}});
      out.summary.push_back("Y" + std::to_string(k + 1) + ": a = Id/(3 lambda) = " + fmt(expected) +
                            " Id, worst entry " + fmt(worst) + " SE" + (ok ? " (pass)" : " (FAIL)"));
    }
    out.report["coefficient_checks"] = std::move(checks);
  } else if (preset.name == "stiefel-centring") {
    const json& fixed = results.at(0).report.at("centring");
    const bool exact_ok = fixed.at("mean").at("se") == "exact" && fixed.at("pass").get<bool>();
    out.verdict = out.verdict && exact_ok;
    out.report["fixed_vector_exact"] = exact_ok;
    out.summary.push_back(std::string("fixed vector returned exactly: ") + (exact_ok ? "pass" : "FAIL"));
    const json& tr = results.at(1).report.at("centring");
    out.summary.push_back("transverse vector: |mean| = " + fmt(value_of(tr.at("deviation"))) + ", 4 |SE| = " +
                          fmt(4.0 * value_of(tr.at("se_norm"))) + (tr.at("pass").get<bool>() ? " (pass)" : " (FAIL)"));
  }
  out.report["verdict"] = out.verdict;
  return out;
}

}  // namespace liehom::cli
