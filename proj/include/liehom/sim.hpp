#pragma once

#include "liehom/lie/group.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace liehom {

/// Data of the multiscale system
///   dg = (1/sqrt(eps)) sum_k A_k*(g) o dW^k + (1/eps) A0*(g) dt + Y0*(g) dt.
struct MultiscaleSystem {
  GroupSpec spec;
  double epsilon = 1.0;
  AlgebraVector a0;
  std::vector<AlgebraVector> a;
  AlgebraVector y0;
  GroupElement g0;

  MultiscaleSystem(GroupSpec spec_, double epsilon_, AlgebraVector a0_,
                   std::vector<AlgebraVector> a_, AlgebraVector y0_, GroupElement g0_);
  /// Throws input_not_in_h / invalid_argument when the fields leave h or m.
  void validate() const;
};

/// dt = min(h eps, h).
struct StepRule {
  double h = 1e-2;
  double dt(double epsilon) const { return std::min(h * epsilon, h); }
};

inline constexpr double kMaxStepsPerPath = 1e9;
inline constexpr double kStepFractionOfEps = 0.05;
inline constexpr double kBatchResidualTol = 1e-8;

enum class StoreMode { projected, group, summary };

/// Initial state of the fast process in the slow random ODE: the identity, or a
/// Haar sample of H (the fast process in equilibrium; the projected start point
/// is unchanged).
enum class FastStart { identity, haar };

struct SimOptions {
  std::size_t n_traj = 1000;
  std::uint64_t seed = 1;
  int threads = 0;
  /// Times at which points are stored; empty means {T}. Rounded to the step grid.
  std::vector<double> record_times;
  StoreMode store = StoreMode::projected;
  /// Base resolution of the Brownian increments; each step sums dt / noise_dt
  /// base increments. Zero means noise_dt = dt.
  double noise_dt = 0.0;
  /// Slow random ODE: sample h at the step midpoint.
  bool midpoint = true;
  FastStart fast_start = FastStart::identity;
};

/// Ensemble of discretized paths sampled on a common time grid.
struct TrajectoryBatch {
  std::vector<double> times;
  std::vector<std::vector<Vector>> points;  // [trajectory][time] projected points
  std::vector<std::vector<Matrix>> group;   // [trajectory][time], filled for StoreMode::group
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::string scheme;
  std::string manifold;  // catalog name and parameters of the model manifold
  double max_residual = 0.0;

  std::size_t size() const { return points.size(); }
};

std::string manifold_id(const GroupSpec& spec);

/// Exponential Euler for the full system:
///   g <- g exp(sqrt(dt/eps) sum_k xi_k A_k + dt (A0/eps + Y0)).
/// Throws step_too_large when dt > 0.05 eps and horizon_guard when T/dt > 1e9.
TrajectoryBatch integrate_group_sde(const MultiscaleSystem& sys, double dt, double T,
                                    const SimOptions& options);

/// Fast process on H with eps = 1, stored at every step.
struct FastPath {
  double dt = 0.0;
  std::vector<Matrix> h;
  /// Brownian path b_t for the exact single-generator circle case, empty otherwise.
  std::vector<double> b;
};

/// dh = sum_k A_k*(h) o db^k + A0*(h) dt. For a single circle generator the exact
/// solution h_t = exp((b_t + t c0) A_1) is used (A0 = c0 A_1).
FastPath integrate_fast_H(const GroupSpec& spec, std::span<const AlgebraVector> a,
                          const AlgebraVector& a0, double dt, double T, std::uint64_t seed,
                          std::uint64_t trajectory = 0);

/// u <- u exp(dt Ad(h_{s/eps}) Y0), s = t_n (or t_n + dt/2 with midpoint sampling).
/// Throws insufficient_h_resolution when the fast path does not contain the
/// needed fast times.
TrajectoryBatch integrate_slow_ode(const GroupSpec& spec, const AlgebraVector& y0,
                                   const FastPath& h_path, double epsilon, double dt, double T,
                                   const Matrix& u0, const SimOptions& options);

/// Slow random ODE for an ensemble, generating each fast path on the fly at
/// step dt/eps (dt/(2 eps) with midpoint sampling). Uses the driving fields and
/// drift of `sys`; the h paths start as set by options.fast_start.
TrajectoryBatch simulate_slow_batch(const MultiscaleSystem& sys, double dt, double T,
                                    const SimOptions& options);

/// Coupled split system with shared noise. `deviation[traj]` is the maximum of
/// ||g_t - u_t a_t||_F over the step grid.
struct SplitResult {
  TrajectoryBatch u, a, g;
  std::vector<double> deviation;
  double max_deviation = 0.0;
};

SplitResult integrate_split(const MultiscaleSystem& sys, double dt, double T,
                            const SimOptions& options);

/// u <- u exp(sqrt(dt) sum_k xi_k V_k).
TrajectoryBatch simulate_effective(const GroupSpec& spec, std::span<const AlgebraVector> fields,
                                   const Matrix& u0, double dt, double T,
                                   const SimOptions& options);

}  // namespace liehom
