#include "liehom/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace liehom {

namespace {

constexpr double kTimeMatchTol = 1e-9;

std::size_t find_slot(const TrajectoryBatch& batch, double t) {
  for (std::size_t s = 0; s < batch.times.size(); ++s)
    if (std::abs(batch.times[s] - t) <= kTimeMatchTol * std::max(1.0, std::abs(t))) return s;
  throw Error(ErrorCode::invalid_argument, "time " + fmt(t) + " not recorded in batch");
}

std::vector<Estimate> battery_estimates(const TrajectoryBatch& batch, std::size_t slot) {
  const Eigen::Index n = batch.points.front()[slot].size();
  Accumulator acc(n + n * (n + 1) / 2);
  for (const auto& path : batch.points) acc.add(battery_values(path[slot]));
  const Vector se = acc.standard_error();
  std::vector<Estimate> out(static_cast<std::size_t>(acc.mean.size()));
  for (Eigen::Index i = 0; i < acc.mean.size(); ++i) out[static_cast<std::size_t>(i)] = {acc.mean[i], se[i]};
  return out;
}

BatchMeta meta_of(const TrajectoryBatch& b) { return {b.seed, b.size(), b.dt, b.scheme}; }

bool same_generators(const GroupSpec& spec, std::span<const AlgebraVector> a) {
  const auto full = h_basis_vectors(spec);
  const RealMatrix c_full = casimir(spec, full).matrix;
  const RealMatrix c_sys = casimir(spec, a).matrix;
  return (c_full - c_sys).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, c_full.cwiseAbs().maxCoeff());
}

}  // namespace

double z_score(const Estimate& a, const Estimate& b) {
  const double se = std::hypot(a.se, b.se);
  const double diff = a.mean - b.mean;
  if (se == 0.0) return diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  return diff / se;
}

std::vector<std::string> battery_names(Eigen::Index n) {
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < n; ++i) names.push_back("x" + std::to_string(i));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) names.push_back("x" + std::to_string(i) + "*x" + std::to_string(j));
  return names;
}

Vector battery_values(const Vector& x) {
  const Eigen::Index n = x.size();
  Vector v(n + n * (n + 1) / 2);
  v.head(n) = x;
  Eigen::Index k = n;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) v[k++] = x[i] * x[j];
  return v;
}

double StatReport::max_abs_z() const {
  double m = 0.0;
  for (double z : z_scores) m = std::max(m, std::abs(z));
  return m;
}

bool StatReport::recompute_verdict() const {
  for (std::size_t k = 0; k < estimates_a.size(); ++k)
    if (!(std::abs(z_score(estimates_a[k], estimates_b[k])) <= threshold)) return false;
  return true;
}

StatReport moment_compare(const TrajectoryBatch& a, const TrajectoryBatch& b,
                          const std::vector<double>& t_list, double threshold) {
  if (a.manifold != b.manifold)
    throw Error(ErrorCode::mismatched_manifold, "batches live on " + a.manifold + " and " + b.manifold);
  if (a.size() == 0 || b.size() == 0) throw Error(ErrorCode::invalid_argument, "empty batch");
  const Eigen::Index dim = a.points.front().front().size();
  if (b.points.front().front().size() != dim)
    throw Error(ErrorCode::mismatched_manifold, "projected dimensions differ");

  StatReport r;
  r.manifold = a.manifold;
  r.test_functions = battery_names(dim);
  r.times = t_list;
  r.threshold = threshold;
  r.meta_a = meta_of(a);
  r.meta_b = meta_of(b);
  for (double t : t_list) {
    const auto ea = battery_estimates(a, find_slot(a, t));
    const auto eb = battery_estimates(b, find_slot(b, t));
    for (std::size_t k = 0; k < ea.size(); ++k) {
      r.estimates_a.push_back(ea[k]);
      r.estimates_b.push_back(eb[k]);
      r.z_scores.push_back(z_score(ea[k], eb[k]));
    }
  }
  r.verdict = r.recompute_verdict();
  return r;
}

bool SplitTable::decreasing(double min_ratio) const {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].max_deviation < rows[i - 1].max_deviation)) return false;
    if (rows[i].ratio < min_ratio) return false;
  }
  return true;
}

SplitTable pathwise_split_test(const MultiscaleSystem& sys, const std::vector<double>& dt_list,
                               double T, std::size_t n_traj, std::uint64_t seed, int threads) {
  if (dt_list.size() < 2) throw Error(ErrorCode::invalid_argument, "need at least two dt levels");
  for (std::size_t i = 1; i < dt_list.size(); ++i)
    if (!(dt_list[i] < dt_list[i - 1])) throw Error(ErrorCode::invalid_argument, "dt list must decrease");
  SplitTable table;
  table.n_traj = n_traj;
  table.seed = seed;
  table.noise_dt = dt_list.back();
  SimOptions opt;
  opt.n_traj = n_traj;
  opt.seed = seed;
  opt.threads = threads;
  opt.store = StoreMode::summary;
  opt.noise_dt = table.noise_dt;
  for (double dt : dt_list) {
    SplitRow row;
    row.dt = dt;
    row.max_deviation = integrate_split(sys, dt, T, opt).max_deviation;
    if (!table.rows.empty()) row.ratio = table.rows.back().max_deviation / row.max_deviation;
    table.rows.push_back(row);
  }
  return table;
}

CentringResult centring_check(const GroupSpec& spec, const AlgebraVector& y0, const McOptions& options) {
  CentringResult r;
  const RealMatrix m0 = fixed_space_basis(spec);
  const Vector y = y0.m_part(spec);
  r.fixed_part = m0.cols() > 0 ? Vector(m0 * (m0.transpose() * y)) : Vector(Vector::Zero(y.size()));
  r.estimate = mean_Ad(spec, y0, options);
  r.deviation = (r.estimate.mean - r.fixed_part).norm();
  r.se_norm = r.estimate.se.norm();
  r.pass = r.estimate.exact ? r.deviation <= 1e-12 * std::max(1.0, y.norm())
                            : r.deviation <= 4.0 * r.se_norm;
  return r;
}

Estimate haar_integral_oracle(const GroupSpec& spec, const std::function<double(const GroupElement&)>& f,
                              const McOptions& options) {
  const auto m = haar_average(spec, 1, options, [&](const GroupElement& h, Vector& out) { out[0] = f(h); });
  return {m.mean[0], m.se[0]};
}

EffectiveGenerator effective_generator_for(const MultiscaleSystem& sys, const McOptions& options) {
  if (sys.a0.coeffs().norm() != 0.0)
    throw Error(ErrorCode::invalid_argument, "effective coefficients need a driftless fast process");
  if (same_generators(sys.spec, sys.a)) {
    try {
      return coeffs_closed_form(sys.spec, sys.y0);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::mixed_component_input) throw;
    }
  }
  return coeffs_spectral(sys.spec, sys.y0, sys.a, options);
}

LimitResult limit_experiment(const MultiscaleSystem& sys, const LimitOptions& o) {
  LimitResult out;
  out.generator = effective_generator_for(sys, o.coeff_mc);
  const EffectiveSde sde = build_effective_sde(out.generator, sys.spec);

  const double eps = sys.epsilon;
  const double horizon = o.T / eps;
  out.slow_dt = o.step.dt(eps);
  std::vector<double> compare, slow_times, eff_times;
  for (double f : o.fractions) compare.push_back(f * o.T);
  for (int k = 1; k <= o.monitor_points; ++k) {
    const double f = static_cast<double>(k) / o.monitor_points;
    slow_times.push_back(f * horizon);
    eff_times.push_back(f * o.T);
  }
  for (double f : o.fractions) {
    slow_times.push_back(f * horizon);
    eff_times.push_back(f * o.T);
  }

  SimOptions so;
  so.n_traj = o.n_traj;
  so.seed = o.seed;
  so.threads = o.threads;
  so.record_times = slow_times;
  so.fast_start = o.fast_start;
  TrajectoryBatch slow = simulate_slow_batch(sys, out.slow_dt, horizon, so);
  for (double& t : slow.times) t *= eps;

  SimOptions eo = so;
  eo.n_traj = o.n_effective ? o.n_effective : o.n_traj;
  eo.record_times = eff_times;
  const TrajectoryBatch eff = simulate_effective(sys.spec, sde.fields, sys.g0.matrix, o.effective_dt, o.T, eo);

  out.max_group_residual = std::max(slow.max_residual, eff.max_residual);
  for (const TrajectoryBatch* b : {static_cast<const TrajectoryBatch*>(&slow), &eff})
    for (const auto& path : b->points)
      for (const auto& x : path)
        out.max_manifold_residual = std::max(out.max_manifold_residual, manifold_residual(sys.spec, x));

  out.report = moment_compare(slow, eff, compare);
  out.report.epsilon = eps;
  return out;
}

RateTable rate_sweep(const MultiscaleSystem& tmpl, const std::vector<double>& epsilon_list,
                     const std::function<double(const Vector&)>& f, const RateOptions& o) {
  if (epsilon_list.empty()) throw Error(ErrorCode::invalid_argument, "empty epsilon list");
  for (std::size_t i = 1; i < epsilon_list.size(); ++i)
    if (!(epsilon_list[i] < epsilon_list[i - 1]))
      throw Error(ErrorCode::invalid_argument, "epsilon list must decrease");
  for (double eps : epsilon_list) {
    const double steps = o.T / eps / o.step.dt(eps);
    if (steps * static_cast<double>(o.n_traj) > kMaxStepsPerPath)
      throw Error(ErrorCode::budget_exceeded,
                  "epsilon = " + std::to_string(eps) + " needs " +
                      fmt(steps * static_cast<double>(o.n_traj)) + " steps");
  }

  auto mean_of = [&](const TrajectoryBatch& b) {
    Accumulator acc(1);
    Vector v(1);
    for (const auto& path : b.points) {
      v[0] = f(path.back());
      acc.add(v);
    }
    return Estimate{acc.mean[0], acc.standard_error()[0]};
  };

  RateTable table;
  const EffectiveGenerator gen = effective_generator_for(tmpl, o.coeff_mc);
  const EffectiveSde sde = build_effective_sde(gen, tmpl.spec);
  SimOptions so;
  so.n_traj = o.n_traj;
  so.seed = o.seed;
  so.threads = o.threads;
  table.limit = mean_of(simulate_effective(tmpl.spec, sde.fields, tmpl.g0.matrix, o.effective_dt, o.T, so));

  for (std::size_t i = 0; i < epsilon_list.size(); ++i) {
    MultiscaleSystem sys = tmpl;
    sys.epsilon = epsilon_list[i];
    SimOptions level = so;
    level.seed = o.seed + 1 + i;
    level.fast_start = o.fast_start;
    const Estimate e = mean_of(simulate_slow_batch(sys, o.step.dt(sys.epsilon), o.T / sys.epsilon, level));
    table.rows.push_back({sys.epsilon, std::abs(e.mean - table.limit.mean), std::hypot(e.se, table.limit.se), e.mean});
  }

  table.non_increasing = true;
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    const auto& prev = table.rows[i - 1];
    const auto& cur = table.rows[i];
    if (cur.gap > prev.gap + 2.0 * std::hypot(prev.se, cur.se)) table.non_increasing = false;
  }

  if (table.rows.size() >= 2 &&
      std::all_of(table.rows.begin(), table.rows.end(), [](const RateRow& r) { return r.gap > 0.0; })) {
    RealMatrix x(static_cast<Eigen::Index>(table.rows.size()), 2);
    Vector y(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      x(i, 0) = std::log(table.rows[static_cast<std::size_t>(i)].epsilon);
      x(i, 1) = 1.0;
      y[i] = std::log(table.rows[static_cast<std::size_t>(i)].gap);
    }
    table.slope = x.colPivHouseholderQr().solve(y)[0];
  }
  return table;
}

}  // namespace liehom
