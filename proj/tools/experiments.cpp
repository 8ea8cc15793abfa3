#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

namespace liehom::cli {

json with_se(const json& value, const json& se) { return json{{"value", value}, {"se", se}}; }
json exact(const json& value) { return with_se(value, "exact"); }

json matrix_json(const RealMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::string csv_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::budget_exceeded:
    case ErrorCode::horizon_guard:
      return 3;
    case ErrorCode::config_invalid:
    case ErrorCode::unknown_name:
    case ErrorCode::unsupported_dimension:
    case ErrorCode::input_not_in_h:
    case ErrorCode::closure_violation:
    case ErrorCode::step_too_large:
    case ErrorCode::invalid_argument:
      return 2;
    default:
      return 1;
  }
}

namespace {

McOptions mc_of(const ExperimentConfig& c, int threads) { return McOptions{c.mc_samples, c.seed, threads}; }

double slow_time(const ExperimentConfig& c, double eps) { return c.T / eps; }

std::string scheme_label(Scheme s) {
  switch (s) {
    case Scheme::group_sde: return "group-sde";
    case Scheme::slow_ode: return "slow-ode";
    case Scheme::split: return "split";
    case Scheme::effective: return "effective";
  }
  return "";
}

std::vector<AlgebraVector> driving_fields(const ExperimentConfig& c, const GroupSpec& spec) {
  return c.generators ? h_generators(spec, *c.generators) : h_basis_vectors(spec);
}

std::optional<AlgebraVector> drift_of(const ExperimentConfig& c, const GroupSpec& spec) {
  if (c.a0.size() == 0) return std::nullopt;
  return AlgebraVector::from_h(spec, c.a0);
}

/// "const", "xI" or "xI*xJ" on a projected point.
std::function<double(const Vector&)> parse_test_function(const std::string& s, Eigen::Index dim) {
  static const std::regex single(R"(x(\d+))"), product(R"(x(\d+)\*x(\d+))");
  std::smatch m;
  auto index = [&](const std::string& d) {
    const long i = std::stol(d);
    if (i >= dim)
      throw Error(ErrorCode::config_invalid,
                  "test_function: coordinate " + d + " is not below the projected dimension " + std::to_string(dim));
    return static_cast<Eigen::Index>(i);
  };
  if (s == "const") return [](const Vector&) { return 1.0; };
  if (std::regex_match(s, m, single)) {
    const auto i = index(m[1]);
    return [i](const Vector& x) { return x[i]; };
  }
  if (std::regex_match(s, m, product)) {
    const auto i = index(m[1]), j = index(m[2]);
    return [i, j](const Vector& x) { return x[i] * x[j]; };
  }
  throw Error(ErrorCode::config_invalid, "test_function: expected \"const\", \"xI\" or \"xI*xJ\", got '" + s + "'");
}

json component_json(const GroupSpec& spec, const IsotypicComponent& comp, bool full_basis) {
  json j;
  j["lambda"] = exact(comp.lambda);
  j["dim"] = exact(comp.dim());
  j["is_fixed_space"] = comp.is_fixed_space;
  j["basis"] = exact(matrix_json(comp.basis));
  if (full_basis && !comp.is_fixed_space) {
    const auto onb = h_basis_vectors(spec);
    j["lambda_bilinear_form"] = exact(lambda_via_bilinear_form(spec, onb, comp));
    j["symmetric_commutant_dim"] = exact(symmetric_commutant_dim(spec, comp));
    const ProjectionValidity v = check_projection_validity(spec, comp);
    j["projection_validity"] = {{"trace_ad_zero", v.trace_ad_zero},
                                {"naturally_reductive", v.naturally_reductive},
                                {"u_trace_zero", v.u_trace_zero},
                                {"trace_ad_defect", exact(v.trace_ad_defect)},
                                {"natural_defect", exact(v.natural_defect)},
                                {"u_trace_defect", exact(v.u_trace_defect)}};
  }
  return j;
}

json centring_json(const CentringResult& r) {
  return {{"pass", r.pass},
          {"mean", r.estimate.exact ? exact(vector_json(r.estimate.mean))
                                    : with_se(vector_json(r.estimate.mean), vector_json(r.estimate.se))},
          {"fixed_part", exact(vector_json(r.fixed_part))},
          {"deviation", exact(r.deviation)},
          {"se_norm", exact(r.se_norm)}};
}

std::string vec_text(const Vector& v) {
  std::ostringstream os;
  os << "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << fmt(v[i]);
  os << "]";
  return os.str();
}

ExperimentResult run_decompose(const ExperimentConfig& c, int threads) {
  const GroupSpec spec = config_group(c);
  const auto gens = driving_fields(c, spec);
  const auto comps = isotypic_decompose(casimir(spec, gens, drift_of(c, spec)));
  const bool full = !c.generators && c.a0.size() == 0;

  ExperimentResult out;
  out.verdict = true;
  json& r = out.report;
  r["experiment"] = "decompose";
  r["manifold"] = manifold_id(spec);
  r["generators"] = c.generators ? exact(*c.generators) : json("full");
  json list = json::array();
  CsvTable table{"components", {"component", "lambda", "dim", "is_fixed_space"}, {}};
  for (std::size_t k = 0; k < comps.size(); ++k) {
    list.push_back(component_json(spec, comps[k], full));
    table.rows.push_back({std::to_string(k), csv_number(comps[k].lambda), std::to_string(comps[k].dim()),
                          comps[k].is_fixed_space ? "true" : "false"});
    out.summary.push_back("component " + std::to_string(k) + ": lambda = " + fmt(comps[k].lambda) +
                          ", dim = " + std::to_string(comps[k].dim()) +
                          (comps[k].is_fixed_space ? " (fixed space)" : ""));
  }
  r["components"] = std::move(list);
  out.tables.push_back(std::move(table));

  if (c.y0) {
    const CentringResult cr = centring_check(spec, AlgebraVector::from_m(spec, *c.y0), mc_of(c, threads));
    r["centring"] = centring_json(cr);
    out.verdict = out.verdict && cr.pass;
    out.summary.push_back(std::string("centring: ") + (cr.pass ? "pass" : "FAIL") + ", mean = " +
                          vec_text(cr.estimate.mean) + ", fixed part = " + vec_text(cr.fixed_part));
  }

  if (c.peter_weyl) {
    // The component carrying Y0, else the first non-fixed one.
    std::optional<IsotypicComponent> target;
    if (c.y0) {
      for (const auto& comp : comps)
        if (!comp.is_fixed_space && (comp.basis.transpose() * *c.y0).norm() > 1e-12) target = comp;
    }
    if (!target)
      for (const auto& comp : comps)
        if (!comp.is_fixed_space) {
          target = comp;
          break;
        }
    if (!target) throw Error(ErrorCode::invalid_argument, "peter_weyl: no non-fixed component");
    const PeterWeylResult pw = peter_weyl_check(spec, *target, mc_of(c, threads));
    const double tol = 4.0 / std::sqrt(static_cast<double>(pw.samples));
    const int d = target->dim();
    CsvTable pwt{"peter_weyl", {"i", "j", "k", "l", "estimate", "se", "expected"}, {}};
    json entries = json::array();
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
          for (int l = 0; l < d; ++l) {
            const std::size_t idx = static_cast<std::size_t>(((i * d + j) * d + k) * d + l);
            const double expected = (i == j && k == l) ? 1.0 / d : 0.0;
            entries.push_back({{"index", exact(json::array({i, j, k, l}))},
                               {"estimate", with_se(pw.estimates[idx], pw.se[idx])},
                               {"expected", exact(expected)}});
            pwt.rows.push_back({std::to_string(i), std::to_string(j), std::to_string(k), std::to_string(l),
                                csv_number(pw.estimates[idx]), csv_number(pw.se[idx]), csv_number(expected)});
          }
    const bool pass = pw.max_deviation <= tol;
    r["peter_weyl"] = {{"component_lambda", exact(target->lambda)},
                       {"dim", exact(d)},
                       {"samples", exact(pw.samples)},
                       {"max_deviation", exact(pw.max_deviation)},
                       {"tolerance", exact(tol)},
                       {"pass", pass},
                       {"entries", std::move(entries)}};
    out.tables.push_back(std::move(pwt));
    out.verdict = out.verdict && pass;
    out.summary.push_back("peter-weyl: " + std::to_string(d * d * d * d) + " integrals, max deviation " +
                          fmt(pw.max_deviation) + " vs 4/sqrt(N) = " + fmt(tol) + (pass ? " (pass)" : " (FAIL)"));
  }
  r["verdict"] = out.verdict;
  return out;
}

json generator_json(const EffectiveGenerator& gen, const GroupSpec& spec, bool& verdict) {
  json j;
  j["route"] = std::string(to_string(gen.route));
  j["classification"] = std::string(to_string(gen.classification));
  j["basis"] = exact(matrix_json(gen.basis));
  j["a"] = gen.exact() ? exact(matrix_json(gen.a)) : with_se(matrix_json(gen.a), matrix_json(gen.se));
  if (gen.classification == Classification::isotropic) j["isotropic_c"] = gen.exact() ? exact(gen.isotropic_c)
                                                                                        : with_se(gen.isotropic_c, gen.se.maxCoeff());
  j["trace_target"] = exact(gen.trace_target);
  // Trace identity: tr a = sum_m c_m^2 / lambda_m.
  const double trace = gen.a.trace();
  const double trace_se = std::sqrt(gen.se.diagonal().squaredNorm());
  const bool trace_ok = gen.exact() ? std::abs(trace - gen.trace_target) <= 1e-12 * std::max(1.0, gen.trace_target)
                                    : std::abs(trace - gen.trace_target) <= 4.0 * trace_se + 1e-12;
  j["trace"] = gen.exact() ? exact(trace) : with_se(trace, trace_se);
  j["trace_identity"] = trace_ok;
  verdict = verdict && trace_ok;
  try {
    j["projected_scale"] = gen.exact() ? exact(projected_scale(gen, spec))
                                       : with_se(projected_scale(gen, spec), 2.0 * gen.se.maxCoeff());
  } catch (const Error& e) {
    j["projected_scale"] = nullptr;
    j["projected_scale_reason"] = std::string(to_string(e.code()));
  }
  json comps = json::array();
  for (const auto& comp : gen.components) {
    const ProjectionValidity v = check_projection_validity(spec, comp);
    comps.push_back({{"lambda", exact(comp.lambda)},
                     {"dim", exact(comp.dim())},
                     {"validity",
                      {{"trace_ad_zero", v.trace_ad_zero},
                       {"naturally_reductive", v.naturally_reductive},
                       {"u_trace_zero", v.u_trace_zero}}}});
  }
  j["components"] = std::move(comps);
  return j;
}

CsvTable coeff_table(const EffectiveGenerator& gen) {
  CsvTable t{"coeffs", {"i", "j", "a", "se"}, {}};
  for (int i = 0; i < gen.dim(); ++i)
    for (int j = 0; j < gen.dim(); ++j)
      t.rows.push_back({std::to_string(i), std::to_string(j), csv_number(gen.a(i, j)), csv_number(gen.se(i, j))});
  return t;
}

ExperimentResult run_coeffs(const ExperimentConfig& c, int threads) {
  const GroupSpec spec = config_group(c);
  const MultiscaleSystem sys = config_system(c, spec, 1.0);
  const EffectiveGenerator gen = effective_generator_for(sys, mc_of(c, threads));

  ExperimentResult out;
  out.verdict = true;
  // PSD up to noise: eigenvalues of the symmetric part above -4 SE.
  const RealMatrix sym = 0.5 * (gen.a + gen.a.transpose());
  const double min_eig = Eigen::SelfAdjointEigenSolver<RealMatrix>(sym).eigenvalues().minCoeff();
  const double psd_tol = gen.exact() ? 1e-12 : 4.0 * gen.se.maxCoeff();
  const bool psd = min_eig >= -psd_tol;
  out.verdict = psd;

  json& r = out.report;
  r["experiment"] = "coeffs";
  r["manifold"] = manifold_id(spec);
  r["Y0"] = exact(vector_json(*c.y0));
  r["generator"] = generator_json(gen, spec, out.verdict);
  r["min_eigenvalue"] = gen.exact() ? exact(min_eig) : with_se(min_eig, gen.se.maxCoeff());
  r["positive_semidefinite"] = psd;
  r["verdict"] = out.verdict;
  out.tables.push_back(coeff_table(gen));
  out.summary.push_back("route " + std::string(to_string(gen.route)) + ", classification " +
                        std::string(to_string(gen.classification)));
  for (int i = 0; i < gen.dim(); ++i) {
    std::string line = "a[" + std::to_string(i) + "] =";
    for (int j = 0; j < gen.dim(); ++j) line += " " + fmt(gen.a(i, j));
    out.summary.push_back(line);
  }
  if (r["generator"]["projected_scale"].is_object())
    out.summary.push_back("projected scale " + fmt(r["generator"]["projected_scale"]["value"].get<double>()));
  return out;
}

json moments_json(const TrajectoryBatch& b, CsvTable& table) {
  json rows = json::array();
  if (b.size() == 0) return rows;
  const Eigen::Index dim = b.points.front().front().size();
  const auto names = battery_names(dim);
  for (std::size_t s = 0; s < b.times.size(); ++s) {
    Accumulator acc(static_cast<Eigen::Index>(names.size()));
    for (const auto& path : b.points) acc.add(battery_values(path[s]));
    const Vector se = acc.standard_error();
    json fs;
    for (std::size_t k = 0; k < names.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      fs[names[k]] = with_se(acc.mean[i], se[i]);
      table.rows.push_back({csv_number(b.times[s]), names[k], csv_number(acc.mean[i]), csv_number(se[i])});
    }
    rows.push_back({{"t", exact(b.times[s])}, {"moments", std::move(fs)}});
  }
  return rows;
}

double max_manifold_residual(const GroupSpec& spec, const TrajectoryBatch& b) {
  double m = 0.0;
  for (const auto& path : b.points)
    for (const auto& x : path) m = std::max(m, manifold_residual(spec, x));
  return m;
}

std::vector<double> record_times(const ExperimentConfig& c, double horizon) {
  std::vector<double> ts;
  for (double f : c.record_fractions) ts.push_back(f * horizon);
  return ts;
}

ExperimentResult run_simulate(const ExperimentConfig& c, int threads) {
  const GroupSpec spec = config_group(c);
  const double eps = *c.epsilon;
  const MultiscaleSystem sys = config_system(c, spec, eps);
  SimOptions so;
  so.n_traj = c.n_traj;
  so.seed = c.seed;
  so.threads = threads;
  so.store = c.store;
  so.fast_start = c.fast_start;

  TrajectoryBatch batch;
  TrajectoryBatch split_a;
  double split_dev = -1.0;
  double dt = c.dt_rule.dt(eps);
  json extra;
  switch (c.scheme) {
    case Scheme::group_sde:
      so.record_times = record_times(c, c.T);
      batch = integrate_group_sde(sys, dt, c.T, so);
      break;
    case Scheme::slow_ode: {
      // T is the slow-time horizon; the ODE runs to T/eps and times are reported as t = s eps.
      so.record_times = record_times(c, slow_time(c, eps));
      batch = simulate_slow_batch(sys, dt, slow_time(c, eps), so);
      for (double& t : batch.times) t *= eps;
      break;
    }
    case Scheme::split: {
      so.record_times = record_times(c, c.T);
      SplitResult sr = integrate_split(sys, dt, c.T, so);
      batch = std::move(sr.g);
      split_dev = sr.max_deviation;
      break;
    }
    case Scheme::effective: {
      const EffectiveGenerator gen = effective_generator_for(sys, mc_of(c, threads));
      const EffectiveSde sde = build_effective_sde(gen, spec);
      so.record_times = record_times(c, c.T);
      dt = c.effective_dt;
      batch = simulate_effective(spec, sde.fields, sys.g0.matrix, dt, c.T, so);
      bool trace_ok = true;
      extra["generator"] = generator_json(gen, spec, trace_ok);
      break;
    }
  }

  const double man_res = max_manifold_residual(spec, batch);
  ExperimentResult out;
  out.verdict = batch.max_residual <= kBatchResidualTol && man_res <= kBatchResidualTol;
  json& r = out.report;
  r["experiment"] = "simulate";
  r["manifold"] = batch.manifold;
  r["scheme"] = scheme_label(c.scheme);
  r["epsilon"] = exact(eps);
  r["dt"] = exact(batch.dt);
  r["n_traj"] = exact(batch.size());
  r["max_group_residual"] = exact(batch.max_residual);
  r["max_manifold_residual"] = exact(man_res);
  if (split_dev >= 0.0) r["max_split_deviation"] = exact(split_dev);
  for (auto& [k, v] : extra.items()) r[k] = v;
  CsvTable moments{"moments", {"t", "function", "mean", "se"}, {}};
  r["moments"] = moments_json(batch, moments);
  r["verdict"] = out.verdict;
  out.tables.push_back(std::move(moments));

  if (c.store != StoreMode::summary) {
    CsvTable traj{"trajectories", {"traj", "t"}, {}};
    const Eigen::Index dim = batch.size() ? batch.points.front().front().size() : 0;
    for (Eigen::Index i = 0; i < dim; ++i) traj.header.push_back("x" + std::to_string(i));
    for (std::size_t p = 0; p < batch.size(); ++p)
      for (std::size_t s = 0; s < batch.times.size(); ++s) {
        std::vector<std::string> row{std::to_string(p), csv_number(batch.times[s])};
        for (Eigen::Index i = 0; i < dim; ++i) row.push_back(csv_number(batch.points[p][s][i]));
        traj.rows.push_back(std::move(row));
      }
    out.tables.push_back(std::move(traj));
  }
  if (c.store == StoreMode::group) {
    CsvTable g{"group", {"traj", "t", "row", "col", "re", "im"}, {}};
    for (std::size_t p = 0; p < batch.group.size(); ++p)
      for (std::size_t s = 0; s < batch.times.size(); ++s) {
        const Matrix& m = batch.group[p][s];
        for (Eigen::Index i = 0; i < m.rows(); ++i)
          for (Eigen::Index j = 0; j < m.cols(); ++j)
            g.rows.push_back({std::to_string(p), csv_number(batch.times[s]), std::to_string(i), std::to_string(j),
                              csv_number(m(i, j).real()), csv_number(m(i, j).imag())});
      }
    out.tables.push_back(std::move(g));
  }
  out.summary.push_back(scheme_label(c.scheme) + ": " + std::to_string(batch.size()) + " paths on " +
                        batch.manifold + ", dt " + fmt(batch.dt) + ", max group residual " +
                        fmt(batch.max_residual) + ", max manifold residual " + fmt(man_res));
  return out;
}

json stat_report_json(const StatReport& s, CsvTable& table) {
  json rows = json::array();
  const std::size_t nf = s.test_functions.size();
  for (std::size_t ti = 0; ti < s.times.size(); ++ti)
    for (std::size_t f = 0; f < nf; ++f) {
      const std::size_t k = ti * nf + f;
      const auto& a = s.estimates_a[k];
      const auto& b = s.estimates_b[k];
      rows.push_back({{"t", exact(s.times[ti])},
                      {"function", s.test_functions[f]},
                      {"slow", with_se(a.mean, a.se)},
                      {"effective", with_se(b.mean, b.se)},
                      {"z", exact(s.z_scores[k])}});
      table.rows.push_back({csv_number(s.times[ti]), s.test_functions[f], csv_number(a.mean), csv_number(a.se),
                            csv_number(b.mean), csv_number(b.se), csv_number(s.z_scores[k])});
    }
  auto meta = [](const BatchMeta& m) {
    return json{{"scheme", m.scheme}, {"seed", exact(m.seed)}, {"n", exact(m.n)}, {"dt", exact(m.dt)}};
  };
  return {{"manifold", s.manifold},
          {"threshold", exact(s.threshold)},
          {"max_abs_z", exact(s.max_abs_z())},
          {"verdict", s.verdict},
          {"batch_slow", meta(s.meta_a)},
          {"batch_effective", meta(s.meta_b)},
          {"rows", std::move(rows)}};
}

ExperimentResult run_verify(const ExperimentConfig& c, int threads) {
  const GroupSpec spec = config_group(c);
  const MultiscaleSystem sys = config_system(c, spec, *c.epsilon);
  LimitOptions lo;
  lo.T = c.T;
  lo.n_traj = c.n_traj;
  lo.n_effective = c.n_effective;
  lo.seed = c.seed;
  lo.threads = threads;
  lo.fractions = c.record_fractions;
  lo.step = c.dt_rule;
  lo.effective_dt = c.effective_dt;
  lo.fast_start = c.fast_start;
  lo.coeff_mc = mc_of(c, threads);
  for (double f : c.record_fractions) {
    const double steps = f * slow_time(c, *c.epsilon) / c.dt_rule.dt(*c.epsilon);
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps))
      throw Error(ErrorCode::config_invalid,
                  "record fraction " + fmt(f) + " of T/epsilon is not on the slow step grid (dt = " +
                      fmt(c.dt_rule.dt(*c.epsilon)) + ")");
  }
  const LimitResult res = limit_experiment(sys, lo);

  ExperimentResult out;
  const bool residual_ok = res.max_group_residual <= kBatchResidualTol && res.max_manifold_residual <= kBatchResidualTol;
  out.verdict = res.report.verdict && residual_ok;
  json& r = out.report;
  bool gen_ok = true;
  r["experiment"] = "verify-limit";
  r["epsilon"] = exact(*c.epsilon);
  r["T"] = exact(c.T);
  r["slow_dt"] = exact(res.slow_dt);
  r["effective_dt"] = exact(c.effective_dt);
  r["fast_start"] = c.fast_start == FastStart::haar ? "haar" : "identity";
  r["generator"] = generator_json(res.generator, spec, gen_ok);
  r["max_group_residual"] = exact(res.max_group_residual);
  r["max_manifold_residual"] = exact(res.max_manifold_residual);
  r["residuals_within_tolerance"] = residual_ok;
  CsvTable table{"moments", {"t", "function", "mean_slow", "se_slow", "mean_effective", "se_effective", "z"}, {}};
  r["comparison"] = stat_report_json(res.report, table);
  r["verdict"] = out.verdict;
  out.tables.push_back(std::move(table));
  out.tables.push_back(coeff_table(res.generator));

  std::size_t worst = 0;
  for (std::size_t k = 0; k < res.report.z_scores.size(); ++k)
    if (std::abs(res.report.z_scores[k]) > std::abs(res.report.z_scores[worst])) worst = k;
  const std::size_t nf = res.report.test_functions.size();
  out.summary.push_back("effective generator: " + std::string(to_string(res.generator.route)) + ", " +
                        std::string(to_string(res.generator.classification)));
  out.summary.push_back(std::to_string(res.report.z_scores.size()) + " moment tests, max |z| = " +
                        fmt(res.report.max_abs_z()) + " (" + res.report.test_functions[worst % nf] + " at t = " +
                        fmt(res.report.times[worst / nf]) + "), threshold " + fmt(res.report.threshold));
  out.summary.push_back("max group residual " + fmt(res.max_group_residual) + ", max manifold residual " +
                        fmt(res.max_manifold_residual));
  return out;
}

ExperimentResult run_split(const ExperimentConfig& c, int threads) {
  const GroupSpec spec = config_group(c);
  const MultiscaleSystem sys = config_system(c, spec, *c.epsilon);
  const SplitTable t = pathwise_split_test(sys, c.dt_list, c.T, c.n_traj, c.seed, threads);

  ExperimentResult out;
  out.verdict = t.decreasing(c.min_ratio);
  json& r = out.report;
  r["experiment"] = "split-test";
  r["manifold"] = manifold_id(spec);
  r["epsilon"] = exact(*c.epsilon);
  r["n_traj"] = exact(t.n_traj);
  r["noise_dt"] = exact(t.noise_dt);
  r["min_ratio"] = exact(c.min_ratio);
  json rows = json::array();
  CsvTable table{"split", {"dt", "max_deviation", "ratio"}, {}};
  for (const auto& row : t.rows) {
    rows.push_back({{"dt", exact(row.dt)}, {"max_deviation", exact(row.max_deviation)}, {"ratio", exact(row.ratio)}});
    table.rows.push_back({csv_number(row.dt), csv_number(row.max_deviation), csv_number(row.ratio)});
    out.summary.push_back("dt " + fmt(row.dt) + ": max |g - u a| = " + fmt(row.max_deviation) +
                          (row.ratio > 0.0 ? ", ratio " + fmt(row.ratio) : ""));
  }
  r["rows"] = std::move(rows);
  r["verdict"] = out.verdict;
  out.tables.push_back(std::move(table));
  return out;
}

ExperimentResult run_rate(const ExperimentConfig& c, int threads) {
  const GroupSpec spec = config_group(c);
  const MultiscaleSystem sys = config_system(c, spec, c.epsilon_list.front());
  const auto f = parse_test_function(c.test_function, spec.projected_dim());
  RateOptions ro;
  ro.T = c.T;
  ro.n_traj = c.n_traj;
  ro.seed = c.seed;
  ro.threads = threads;
  ro.step = c.dt_rule;
  ro.effective_dt = c.effective_dt;
  ro.fast_start = c.fast_start;
  ro.coeff_mc = mc_of(c, threads);
  const RateTable t = rate_sweep(sys, c.epsilon_list, f, ro);

  ExperimentResult out;
  out.verdict = t.non_increasing;
  json& r = out.report;
  r["experiment"] = "rate";
  r["manifold"] = manifold_id(spec);
  r["test_function"] = c.test_function;
  r["limit"] = with_se(t.limit.mean, t.limit.se);
  json rows = json::array();
  CsvTable table{"rate", {"epsilon", "mean_slow", "gap", "se"}, {}};
  for (const auto& row : t.rows) {
    rows.push_back({{"epsilon", exact(row.epsilon)}, {"mean_slow", with_se(row.mean_slow, std::sqrt(std::max(
                                                                                        0.0, row.se * row.se - t.limit.se * t.limit.se)))},
                    {"gap", with_se(row.gap, row.se)}});
    table.rows.push_back({csv_number(row.epsilon), csv_number(row.mean_slow), csv_number(row.gap), csv_number(row.se)});
    out.summary.push_back("epsilon " + fmt(row.epsilon) + ": gap " + fmt(row.gap) + " +- " + fmt(row.se));
  }
  r["rows"] = std::move(rows);
  r["non_increasing_within_2se"] = t.non_increasing;
  // Reported only, never part of the verdict.
  r["log_log_slope"] = t.slope ? exact(*t.slope) : json(nullptr);
  r["verdict"] = out.verdict;
  out.tables.push_back(std::move(table));
  out.summary.push_back("limit " + fmt(t.limit.mean) + " +- " + fmt(t.limit.se) +
                        (t.slope ? ", fitted log-log slope " + fmt(*t.slope) + " (not asserted)" : ""));
  return out;
}

}  // namespace

double projected_steps(const ExperimentConfig& c) {
  const double n = static_cast<double>(c.n_traj);
  switch (c.kind) {
    case ExperimentKind::decompose:
    case ExperimentKind::coeffs:
      return 0.0;
    case ExperimentKind::simulate: {
      const double eps = *c.epsilon;
      switch (c.scheme) {
        case Scheme::group_sde:
        case Scheme::split:
          return n * c.T / c.dt_rule.dt(eps);
        case Scheme::slow_ode:
          return n * slow_time(c, eps) / c.dt_rule.dt(eps);
        case Scheme::effective:
          return n * c.T / c.effective_dt;
      }
      return 0.0;
    }
    case ExperimentKind::verify_limit: {
      const double eps = *c.epsilon;
      const double ne = static_cast<double>(c.n_effective ? c.n_effective : c.n_traj);
      return n * slow_time(c, eps) / c.dt_rule.dt(eps) + ne * c.T / c.effective_dt;
    }
    case ExperimentKind::split_test: {
      double s = 0.0;
      for (double dt : c.dt_list) s += n * c.T / dt;
      return s;
    }
    case ExperimentKind::rate: {
      double s = n * c.T / c.effective_dt;
      for (double eps : c.epsilon_list) s += n * slow_time(c, eps) / c.dt_rule.dt(eps);
      return s;
    }
  }
  return 0.0;
}

ExperimentResult run_experiment(const ExperimentConfig& c, int threads) {
  const double steps = projected_steps(c);
  if (steps > kMaxTotalSteps)
    throw Error(ErrorCode::budget_exceeded,
                "projected " + fmt(steps) + " integration steps exceed the budget of " + fmt(kMaxTotalSteps));
  switch (c.kind) {
    case ExperimentKind::decompose: return run_decompose(c, threads);
    case ExperimentKind::coeffs: return run_coeffs(c, threads);
    case ExperimentKind::simulate: return run_simulate(c, threads);
    case ExperimentKind::verify_limit: return run_verify(c, threads);
    case ExperimentKind::split_test: return run_split(c, threads);
    case ExperimentKind::rate: return run_rate(c, threads);
  }
  throw Error(ErrorCode::invalid_argument, "unknown experiment kind");
}

json make_manifest(const json& resolved, int threads) {
  return {{"software", {{"name", kSoftwareName}, {"version", kSoftwareVersion}}},
          {"threads", threads},
          {"config", resolved}};
}

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorCode::invalid_argument, "cannot write " + p.string());
  f << text;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

}  // namespace

void write_outputs(const std::string& dir, const json& manifest, const ExperimentResult& result, double seconds) {
  const std::filesystem::path root(dir);
  std::filesystem::create_directories(root);
  const auto& formats = manifest.contains("config") && manifest["config"].contains("outputs")
                            ? manifest["config"]["outputs"]["formats"]
                            : json::array({"json", "csv"});
  auto wants = [&](const char* f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };
  write_file(root / "manifest.json", manifest.dump(2) + "\n");
  // report.json is always written; it carries the verdict.
  write_file(root / "report.json", result.report.dump(2) + "\n");
  write_file(root / "timing.json", json{{"wall_seconds", seconds}}.dump(2) + "\n");
  if (!wants("csv")) return;
  for (const auto& t : result.tables) {
    std::string text;
    for (std::size_t i = 0; i < t.header.size(); ++i) text += (i ? "," : "") + csv_field(t.header[i]);
    text += "\n";
    for (const auto& row : t.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) text += (i ? "," : "") + csv_field(row[i]);
      text += "\n";
    }
    write_file(root / (t.name + ".csv"), text);
  }
}

}  // namespace liehom::cli
