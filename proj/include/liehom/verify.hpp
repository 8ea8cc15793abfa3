#pragma once

#include "liehom/effective.hpp"
#include "liehom/sim.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace liehom {

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

/// Two-sample z-statistic; a zero combined SE gives 0 for equal means and
/// +-infinity otherwise.
double z_score(const Estimate& a, const Estimate& b);

/// Moment battery on a projected point in R^n: the n coordinates followed by the
/// monomials x_i x_j, i <= j.
std::vector<std::string> battery_names(Eigen::Index ambient_dim);
Vector battery_values(const Vector& x);

struct BatchMeta {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  double dt = 0.0;
  std::string scheme;
};

struct StatReport {
  std::string manifold;
  std::vector<std::string> test_functions;
  std::vector<double> times;
  /// Indexed [time * test_functions.size() + function].
  std::vector<Estimate> estimates_a, estimates_b;
  std::vector<double> z_scores;
  double threshold = 3.0;
  bool verdict = false;
  BatchMeta meta_a, meta_b;
  std::optional<double> epsilon;

  double max_abs_z() const;
  /// Recomputes the verdict from the stored estimates.
  bool recompute_verdict() const;
};

/// Per test function and time, the z-statistic between the batch means.
/// Batch times are matched to `t_list` within 1e-9 relative. Throws
/// mismatched_manifold when the batches live on different model manifolds and
/// invalid_argument when a time is missing from either batch.
StatReport moment_compare(const TrajectoryBatch& a, const TrajectoryBatch& b,
                          const std::vector<double>& t_list, double threshold = 3.0);

struct SplitRow {
  double dt = 0.0;
  double max_deviation = 0.0;
  double ratio = 0.0;  // previous max_deviation / this one; 0 for the first row
};

struct SplitTable {
  std::vector<SplitRow> rows;
  std::size_t n_traj = 0;
  std::uint64_t seed = 0;
  double noise_dt = 0.0;

  /// Strictly decreasing with every consecutive ratio >= min_ratio.
  bool decreasing(double min_ratio = 1.0) const;
};

/// Coupled split runs over decreasing dt levels sharing base increments at the
/// finest level.
SplitTable pathwise_split_test(const MultiscaleSystem& sys, const std::vector<double>& dt_list,
                               double T, std::size_t n_traj, std::uint64_t seed, int threads = 0);

struct CentringResult {
  bool pass = false;
  MeanEstimate estimate;
  Vector fixed_part;       // projection of Y0 onto m0
  double deviation = 0.0;  // |mean - fixed_part|
  double se_norm = 0.0;    // |se|
};

/// Pass iff the Haar mean of Ad(h) Y0 equals the m0 part of Y0: within 4 |SE|
/// for the Monte Carlo part, within 1e-12 when the estimate is exact.
CentringResult centring_check(const GroupSpec& spec, const AlgebraVector& y0,
                              const McOptions& options);

/// Haar average of a scalar function of H.
Estimate haar_integral_oracle(const GroupSpec& spec, const std::function<double(const GroupElement&)>& f,
                              const McOptions& options);

/// Fields and coefficients of the averaged system: closed form when Y0 sits in
/// one irreducible component of the full-h decomposition, Monte Carlo otherwise.
EffectiveGenerator effective_generator_for(const MultiscaleSystem& sys, const McOptions& options);

struct LimitOptions {
  double T = 1.0;
  std::size_t n_traj = 2000;
  /// Ensemble size of the effective diffusion; 0 means n_traj.
  std::size_t n_effective = 0;
  std::uint64_t seed = 1;
  int threads = 0;
  std::vector<double> fractions{0.25, 0.5, 1.0};
  StepRule step;
  double effective_dt = 1e-3;
  /// Additional record times (fractions of T) for constraint monitoring only.
  int monitor_points = 20;
  FastStart fast_start = FastStart::haar;
  McOptions coeff_mc;
};

struct LimitResult {
  StatReport report;
  EffectiveGenerator generator;
  double slow_dt = 0.0;
  double max_group_residual = 0.0;
  double max_manifold_residual = 0.0;  // projected points, slow and effective batches
};

/// Slow random ODE u^eps observed at t/eps against the effective diffusion at t.
LimitResult limit_experiment(const MultiscaleSystem& sys, const LimitOptions& options);

struct RateRow {
  double epsilon = 0.0;
  double gap = 0.0;
  double se = 0.0;
  double mean_slow = 0.0;
};

struct RateTable {
  std::vector<RateRow> rows;
  Estimate limit;
  bool non_increasing = false;
  /// Least-squares slope of log gap against log eps (reported only); absent
  /// when any gap is zero.
  std::optional<double> slope;
};

struct RateOptions {
  double T = 1.0;
  std::size_t n_traj = 20000;
  std::uint64_t seed = 1;
  int threads = 0;
  StepRule step;
  double effective_dt = 1e-3;
  FastStart fast_start = FastStart::identity;
  McOptions coeff_mc;
};

/// |E f(pi(u^eps_{T/eps})) - E f(xbar_T)| over a decreasing epsilon list. The
/// template's epsilon is ignored. Throws budget_exceeded when a level needs more
/// than 1e9 steps in total.
RateTable rate_sweep(const MultiscaleSystem& sys_template, const std::vector<double>& epsilon_list,
                     const std::function<double(const Vector&)>& f, const RateOptions& options);

}  // namespace liehom
