#include "liehom/sim.hpp"

#include "liehom/lie/exp.hpp"
#include "liehom/parallel.hpp"

#include <cmath>
#include <type_traits>

namespace liehom {

namespace {

constexpr double kLeakTol = 1e-12;
constexpr double kGridTol = 1e-9;

struct Grid {
  std::size_t steps = 0;
  std::vector<std::size_t> record_steps;  // ascending
  std::vector<double> times;
};

std::size_t checked_steps(double span, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::invalid_argument, "dt must be positive");
  if (!(span >= 0.0) || !std::isfinite(span))
    throw Error(ErrorCode::invalid_argument, "time horizon must be non-negative");
  const double n = span / dt;
  if (n > kMaxStepsPerPath)
    throw Error(ErrorCode::horizon_guard,
                "horizon needs " + fmt(n) + " steps, above the 1e9 guard");
  const auto steps = static_cast<std::size_t>(std::llround(n));
  if (std::abs(static_cast<double>(steps) * dt - span) > kGridTol * std::max(1.0, span))
    throw Error(ErrorCode::invalid_argument, "time horizon is not a multiple of dt");
  return steps;
}

Grid make_grid(double dt, double T, const std::vector<double>& record_times) {
  Grid grid;
  grid.steps = checked_steps(T, dt);
  std::vector<double> wanted = record_times.empty() ? std::vector<double>{T} : record_times;
  std::sort(wanted.begin(), wanted.end());
  for (double tau : wanted) {
    if (!(tau >= 0.0) || !std::isfinite(tau))
      throw Error(ErrorCode::invalid_argument, "record times must be non-negative");
    const auto k = static_cast<std::size_t>(std::llround(tau / dt));
    if (k > grid.steps) throw Error(ErrorCode::invalid_argument, "record time beyond the horizon");
    if (!grid.record_steps.empty() && grid.record_steps.back() == k) continue;
    grid.record_steps.push_back(k);
    grid.times.push_back(static_cast<double>(k) * dt);
  }
  return grid;
}

void require_resolved(double dt, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::invalid_argument, "epsilon must be positive");
  if (dt > kStepFractionOfEps * epsilon * (1.0 + 1e-12))
    throw Error(ErrorCode::step_too_large,
                "dt = " + fmt(dt) + " exceeds 0.05 eps = " +
                    fmt(kStepFractionOfEps * epsilon));
}

/// Brownian increments for one trajectory: one stream per driver, each step
/// the sum of dt / noise_dt base increments.
class Increments {
 public:
  Increments(std::uint64_t seed, std::uint64_t trajectory, std::size_t drivers,
             StreamPurpose purpose, double dt, double noise_dt)
      : scale_(std::sqrt(noise_dt > 0.0 ? noise_dt : dt)) {
    if (noise_dt > 0.0) {
      const double r = dt / noise_dt;
      ratio_ = static_cast<int>(std::llround(r));
      if (ratio_ < 1 || std::abs(r - ratio_) > kGridTol * r)
        throw Error(ErrorCode::invalid_argument, "dt must be an integer multiple of noise_dt");
    }
    streams_.reserve(drivers);
    for (std::size_t k = 0; k < drivers; ++k) streams_.emplace_back(seed, trajectory, k, purpose);
  }

  void next(Vector& out) {
    for (std::size_t k = 0; k < streams_.size(); ++k) {
      double s = 0.0;
      for (int r = 0; r < ratio_; ++r) s += streams_[k].normal();
      out[static_cast<Eigen::Index>(k)] = scale_ * s;
    }
  }

 private:
  std::vector<RandomStream> streams_;
  double scale_;
  int ratio_ = 1;
};

template <typename S>
inline constexpr bool is_complex_v = !std::is_same_v<S, double>;

/// Fixed-size matrix operations for one group.
template <typename S, int N>
struct Ops {
  using Mat = Eigen::Matrix<S, N, N>;

  const GroupSpec* spec;
  int n;

  explicit Ops(const GroupSpec& s)
      : spec(&s), n(s.ambient_dim()) {}

  Mat convert(const Matrix& m) const {
    if constexpr (is_complex_v<S>) {
      return m;
    } else {
      return m.real();
    }
  }
  Matrix back(const Mat& m) const { return m.template cast<Complex>(); }
  Mat identity() const { return Mat::Identity(n, n); }

  /// h e h^-1 with the true inverse: when h has drifted off H by eta the
  /// result stays within O(eta |e - 1|) of G rather than O(eta).
  Mat conjugate(const Mat& h, const Mat& e) const { return h * e * h.inverse(); }

  std::vector<Mat> convert_all(std::span<const AlgebraVector> xs) const {
    std::vector<Mat> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(convert(x.matrix()));
    return out;
  }

  Mat combine(const std::vector<Mat>& mats, const Vector& w, const Mat& base) const {
    Mat x = base;
    for (std::size_t k = 0; k < mats.size(); ++k) x += w[static_cast<Eigen::Index>(k)] * mats[k];
    return x;
  }
};

template <typename F>
decltype(auto) dispatch(const GroupSpec& spec, F&& f) {
  const int n = spec.ambient_dim();
  if (spec.relation() == Relation::special_unitary) {
    if (n == 2) return f.template operator()<Complex, 2>();
    return f.template operator()<Complex, Eigen::Dynamic>();
  }
  switch (n) {
    case 3: return f.template operator()<double, 3>();
    case 4: return f.template operator()<double, 4>();
    case 5: return f.template operator()<double, 5>();
    case 6: return f.template operator()<double, 6>();
    case 7: return f.template operator()<double, 7>();
    case 8: return f.template operator()<double, 8>();
    case 9: return f.template operator()<double, 9>();
    default: return f.template operator()<double, Eigen::Dynamic>();
  }
}

/// Storage helper: writes projected points (and group matrices) at record steps.
class Recorder {
 public:
  Recorder(const GroupSpec& spec, const Grid& grid, std::size_t n_traj, StoreMode store,
           TrajectoryBatch& batch)
      : spec_(spec), grid_(grid), store_(store), batch_(batch) {
    batch.times = grid.times;
    batch.manifold = manifold_id(spec);
    batch.points.assign(n_traj, std::vector<Vector>(grid.times.size()));
    if (store == StoreMode::group)
      batch.group.assign(n_traj, std::vector<Matrix>(grid.times.size()));
    residuals_.assign(n_traj, 0.0);
  }

  void store(std::size_t traj, std::size_t slot, const Matrix& g) {
    const double r = spec_.membership_residual(g);
    // NaN must survive the max so that an overflowed path is reported.
    if (std::isnan(r) || r > residuals_[traj]) residuals_[traj] = r;
    batch_.points[traj][slot] = project(spec_, g);
    if (store_ == StoreMode::group) batch_.group[traj][slot] = g;
  }

  void finish() {
    for (double r : residuals_)
      if (std::isnan(r) || r > batch_.max_residual) batch_.max_residual = r;
    if (!(batch_.max_residual <= kBatchResidualTol))
      throw Error(ErrorCode::membership_violation,
                  "stored point has membership residual " + fmt(batch_.max_residual));
  }

  const Grid& grid() const { return grid_; }

 private:
  const GroupSpec& spec_;
  const Grid& grid_;
  StoreMode store_;
  TrajectoryBatch& batch_;
  std::vector<double> residuals_;
};

/// Runs step(n) for n = 1..steps and stores the state at every record step
/// (including n = 0).
template <typename Mat, typename Ops, typename StepFn>
void run_path(const Ops& ops, Recorder& rec, std::size_t traj, Mat& state, StepFn&& step) {
  const Grid& grid = rec.grid();
  std::size_t slot = 0;
  auto record_due = [&](std::size_t n) {
    while (slot < grid.record_steps.size() && grid.record_steps[slot] == n) {
      rec.store(traj, slot, ops.back(state));
      ++slot;
    }
  };
  record_due(0);
  for (std::size_t n = 1; n <= grid.steps; ++n) {
    step(n);
    record_due(n);
  }
}

bool single_circle(const GroupSpec& spec, std::span<const AlgebraVector> a, const AlgebraVector& a0) {
  if (spec.subgroup().size() != 1 || spec.subgroup().front().kind != SubgroupFactor::Kind::circle)
    return false;
  // h is one-dimensional, so A0 is parallel to A_1 and the two commute.
  return a.size() == 1 && a0.coeffs().size() == spec.dim();
}

void require_in_h(const GroupSpec& spec, const AlgebraVector& x, const char* what) {
  if (x.coeffs().size() != spec.dim())
    throw Error(ErrorCode::invalid_argument, std::string(what) + " has the wrong coordinate length");
  if (spec.m_dim() > 0 && x.m_part(spec).cwiseAbs().maxCoeff() > kLeakTol)
    throw Error(ErrorCode::input_not_in_h, std::string(what) + " has a component outside h");
}

}  // namespace

std::string manifold_id(const GroupSpec& spec) {
  std::string id = spec.name();
  for (std::size_t i = 0; i < spec.params().size(); ++i)
    id += (i == 0 ? "(" : ",") + std::to_string(spec.params()[i]);
  if (!spec.params().empty()) id += ")";
  return id;
}

MultiscaleSystem::MultiscaleSystem(GroupSpec spec_, double epsilon_, AlgebraVector a0_,
                                   std::vector<AlgebraVector> a_, AlgebraVector y0_,
                                   GroupElement g0_)
    : spec(std::move(spec_)),
      epsilon(epsilon_),
      a0(std::move(a0_)),
      a(std::move(a_)),
      y0(std::move(y0_)),
      g0(std::move(g0_)) {
  validate();
}

void MultiscaleSystem::validate() const {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::invalid_argument, "epsilon must be positive");
  require_in_h(spec, a0, "A0");
  for (const auto& ak : a) require_in_h(spec, ak, "A_k");
  if (y0.coeffs().size() != spec.dim())
    throw Error(ErrorCode::invalid_argument, "Y0 has the wrong coordinate length");
  if (spec.h_dim() > 0 && y0.h_part(spec).cwiseAbs().maxCoeff() > kLeakTol)
    throw Error(ErrorCode::invalid_argument, "Y0 must lie in m");
  if (!(spec.membership_residual(g0.matrix) <= spec.membership_tolerance()))
    throw Error(ErrorCode::membership_violation, "initial point is not in the group");
}

TrajectoryBatch integrate_group_sde(const MultiscaleSystem& sys, double dt, double T,
                                    const SimOptions& options) {
  require_resolved(dt, sys.epsilon);
  const Grid grid = make_grid(dt, T, options.record_times);
  TrajectoryBatch batch;
  batch.dt = dt;
  batch.seed = options.seed;
  batch.scheme = "group-sde";
  Recorder rec(sys.spec, grid, options.n_traj, options.store, batch);

  dispatch(sys.spec, [&]<typename S, int N>() {
    using O = Ops<S, N>;
    using Mat = typename O::Mat;
    const O ops(sys.spec);
    const std::vector<Mat> fields = ops.convert_all(sys.a);
    const double inv_sqrt_eps = 1.0 / std::sqrt(sys.epsilon);
    std::vector<Mat> scaled;
    for (const auto& f : fields) scaled.push_back(inv_sqrt_eps * f);
    const Mat drift = ops.convert(dt * (sys.a0.matrix() / sys.epsilon + sys.y0.matrix()));
    const Mat g0 = ops.convert(sys.g0.matrix);

    parallel_for(options.n_traj, options.threads, [&](std::size_t i) {
      Increments inc(options.seed, i, fields.size(), StreamPurpose::driving, dt, options.noise_dt);
      Vector w(static_cast<Eigen::Index>(fields.size()));
      Mat g = g0;
      run_path(ops, rec, i, g, [&](std::size_t) {
        inc.next(w);
        g = (g * expm(ops.combine(scaled, w, drift))).eval();
      });
    });
  });
  rec.finish();
  return batch;
}

FastPath integrate_fast_H(const GroupSpec& spec, std::span<const AlgebraVector> a,
                          const AlgebraVector& a0, double dt, double T, std::uint64_t seed,
                          std::uint64_t trajectory) {
  for (const auto& ak : a) require_in_h(spec, ak, "A_k");
  require_in_h(spec, a0, "A0");
  const std::size_t steps = checked_steps(T, dt);
  FastPath path;
  path.dt = dt;
  path.h.reserve(steps + 1);
  Increments inc(seed, trajectory, a.size(), StreamPurpose::fast, dt, 0.0);
  Vector w(static_cast<Eigen::Index>(a.size()));
  const Matrix id = Matrix::Identity(spec.ambient_dim(), spec.ambient_dim());
  path.h.push_back(id);

  if (single_circle(spec, a, a0)) {
    path.b.reserve(steps + 1);
    double b = 0.0;
    path.b.push_back(b);
    for (std::size_t n = 1; n <= steps; ++n) {
      inc.next(w);
      b += w[0];
      path.b.push_back(b);
      const double t = static_cast<double>(n) * dt;
      path.h.push_back(expm(Matrix(b * a.front().matrix() + t * a0.matrix())));
    }
    return path;
  }

  Matrix h = id;
  for (std::size_t n = 1; n <= steps; ++n) {
    inc.next(w);
    Matrix x = dt * a0.matrix();
    for (std::size_t k = 0; k < a.size(); ++k) x += w[static_cast<Eigen::Index>(k)] * a[k].matrix();
    h = h * expm(x);
    path.h.push_back(h);
  }
  return path;
}

TrajectoryBatch integrate_slow_ode(const GroupSpec& spec, const AlgebraVector& y0,
                                   const FastPath& h_path, double epsilon, double dt, double T,
                                   const Matrix& u0, const SimOptions& options) {
  require_resolved(dt, epsilon);
  const Grid grid = make_grid(dt, T, options.record_times);
  if (!(h_path.dt > 0.0) || h_path.h.empty())
    throw Error(ErrorCode::insufficient_h_resolution, "empty fast path");

  // Fast index of s = t_n / eps (+ dt / (2 eps)).
  const double offset = options.midpoint ? 0.5 * dt / epsilon : 0.0;
  const double stride = dt / epsilon / h_path.dt;
  const double shift = offset / h_path.dt;
  auto integral = [](double x) {
    return std::abs(x - std::round(x)) <= kGridTol * std::max(1.0, std::abs(x));
  };
  if (!integral(stride) || !integral(shift))
    throw Error(ErrorCode::insufficient_h_resolution,
                "fast path step does not resolve the slow grid at t/eps");
  const auto s = static_cast<std::size_t>(std::llround(stride));
  const auto o = static_cast<std::size_t>(std::llround(shift));
  if (grid.steps > 0 && (grid.steps - 1) * s + o >= h_path.h.size())
    throw Error(ErrorCode::insufficient_h_resolution, "fast path is too short for the horizon");

  TrajectoryBatch batch;
  batch.dt = dt;
  batch.seed = options.seed;
  batch.scheme = options.midpoint ? "slow-ode-midpoint" : "slow-ode";
  Recorder rec(spec, grid, 1, options.store, batch);
  dispatch(spec, [&]<typename S, int N>() {
    using O = Ops<S, N>;
    using Mat = typename O::Mat;
    const O ops(spec);
    const Mat e = ops.convert(expm(Matrix(dt * y0.matrix())));
    Mat u = ops.convert(u0);
    run_path(ops, rec, 0, u, [&](std::size_t n) {
      const Mat h = ops.convert(h_path.h[(n - 1) * s + o]);
      u = (u * ops.conjugate(h, e)).eval();
    });
  });
  rec.finish();
  return batch;
}

TrajectoryBatch simulate_slow_batch(const MultiscaleSystem& sys, double dt, double T,
                                    const SimOptions& options) {
  require_resolved(dt, sys.epsilon);
  const Grid grid = make_grid(dt, T, options.record_times);
  TrajectoryBatch batch;
  batch.dt = dt;
  batch.seed = options.seed;
  batch.scheme = options.midpoint ? "slow-ode-midpoint" : "slow-ode";
  Recorder rec(sys.spec, grid, options.n_traj, options.store, batch);
  const bool circle = single_circle(sys.spec, sys.a, sys.a0);
  const double fast_dt = dt / sys.epsilon / (options.midpoint ? 2.0 : 1.0);

  dispatch(sys.spec, [&]<typename S, int N>() {
    using O = Ops<S, N>;
    using Mat = typename O::Mat;
    const O ops(sys.spec);
    const Mat e = ops.convert(expm(Matrix(dt * sys.y0.matrix())));
    const Mat u0 = ops.convert(sys.g0.matrix);
    const std::vector<Mat> fields = ops.convert_all(sys.a);
    const Mat fast_drift = ops.convert(fast_dt * sys.a0.matrix());
    const Mat a1 = circle ? ops.convert(sys.a.front().matrix()) : ops.identity();
    const Mat c0 = circle ? ops.convert(sys.a0.matrix()) : ops.identity();

    parallel_for(options.n_traj, options.threads, [&](std::size_t i) {
      Increments inc(options.seed, i, fields.size(), StreamPurpose::fast, fast_dt, 0.0);
      Vector w(static_cast<Eigen::Index>(fields.size()));
      Mat h0 = ops.identity();
      if (options.fast_start == FastStart::haar) {
        RandomStream rng(options.seed, i, 0, StreamPurpose::initial);
        h0 = ops.convert(haar_sample(sys.spec, rng).matrix);
      }
      Mat h = h0;
      double b = 0.0;
      double fast_time = 0.0;
      auto advance = [&] {
        inc.next(w);
        fast_time += fast_dt;
        if (circle) {
          b += w[0];
          h = (h0 * expm((b * a1 + fast_time * c0).eval())).eval();
        } else {
          h = (h * expm(ops.combine(fields, w, fast_drift))).eval();
        }
      };
      Mat u = u0;
      run_path(ops, rec, i, u, [&](std::size_t) {
        if (options.midpoint) advance();
        u = (u * ops.conjugate(h, e)).eval();
        advance();
      });
    });
  });
  rec.finish();
  return batch;
}

SplitResult integrate_split(const MultiscaleSystem& sys, double dt, double T,
                            const SimOptions& options) {
  require_resolved(dt, sys.epsilon);
  const Grid grid = make_grid(dt, T, options.record_times);
  SplitResult out;
  for (auto* b : {&out.u, &out.a, &out.g}) {
    b->dt = dt;
    b->seed = options.seed;
  }
  out.u.scheme = "split-u";
  out.a.scheme = "split-a";
  out.g.scheme = "split-g";
  Recorder rec_u(sys.spec, grid, options.n_traj, options.store, out.u);
  Recorder rec_a(sys.spec, grid, options.n_traj, options.store, out.a);
  Recorder rec_g(sys.spec, grid, options.n_traj, options.store, out.g);
  out.deviation.assign(options.n_traj, 0.0);

  dispatch(sys.spec, [&]<typename S, int N>() {
    using O = Ops<S, N>;
    using Mat = typename O::Mat;
    const O ops(sys.spec);
    const double inv_sqrt_eps = 1.0 / std::sqrt(sys.epsilon);
    std::vector<Mat> scaled;
    for (const auto& f : ops.convert_all(sys.a)) scaled.push_back(inv_sqrt_eps * f);
    const Mat drift_g = ops.convert(dt * (sys.a0.matrix() / sys.epsilon + sys.y0.matrix()));
    const Mat drift_a = ops.convert(dt * sys.a0.matrix() / sys.epsilon);
    const Mat e = ops.convert(expm(Matrix(dt * sys.y0.matrix())));
    const Mat g0 = ops.convert(sys.g0.matrix);

    parallel_for(options.n_traj, options.threads, [&](std::size_t i) {
      Increments inc(options.seed, i, scaled.size(), StreamPurpose::driving, dt, options.noise_dt);
      Vector w(static_cast<Eigen::Index>(scaled.size()));
      Mat g = g0, u = g0, a = ops.identity();
      std::size_t slot = 0;
      double dev = 0.0;
      auto record_due = [&](std::size_t n) {
        while (slot < grid.record_steps.size() && grid.record_steps[slot] == n) {
          rec_u.store(i, slot, ops.back(u));
          rec_a.store(i, slot, ops.back(a));
          rec_g.store(i, slot, ops.back(g));
          ++slot;
        }
      };
      record_due(0);
      for (std::size_t n = 1; n <= grid.steps; ++n) {
        inc.next(w);
        g = (g * expm(ops.combine(scaled, w, drift_g))).eval();
        u = (u * ops.conjugate(a, e)).eval();
        a = (a * expm(ops.combine(scaled, w, drift_a))).eval();
        dev = std::max(dev, (g - u * a).norm());
        record_due(n);
      }
      out.deviation[i] = dev;
    });
  });
  rec_u.finish();
  rec_a.finish();
  rec_g.finish();
  for (double d : out.deviation) out.max_deviation = std::max(out.max_deviation, d);
  return out;
}

TrajectoryBatch simulate_effective(const GroupSpec& spec, std::span<const AlgebraVector> fields,
                                   const Matrix& u0, double dt, double T,
                                   const SimOptions& options) {
  const Grid grid = make_grid(dt, T, options.record_times);
  TrajectoryBatch batch;
  batch.dt = dt;
  batch.seed = options.seed;
  batch.scheme = "effective";
  Recorder rec(spec, grid, options.n_traj, options.store, batch);

  dispatch(spec, [&]<typename S, int N>() {
    using O = Ops<S, N>;
    using Mat = typename O::Mat;
    const O ops(spec);
    const std::vector<Mat> v = ops.convert_all(fields);
    const Mat zero = Mat::Zero(ops.n, ops.n);
    const Mat start = ops.convert(u0);
    parallel_for(options.n_traj, options.threads, [&](std::size_t i) {
      Increments inc(options.seed, i, v.size(), StreamPurpose::effective, dt, options.noise_dt);
      Vector w(static_cast<Eigen::Index>(v.size()));
      Mat u = start;
      run_path(ops, rec, i, u, [&](std::size_t) {
        inc.next(w);
        u = (u * expm(ops.combine(v, w, zero))).eval();
      });
    });
  });
  rec.finish();
  return batch;
}

}  // namespace liehom
