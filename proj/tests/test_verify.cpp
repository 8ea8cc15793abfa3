#include "liehom/verify.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace liehom;
using liehom::testing::batch_moments;
using liehom::testing::group;

namespace {

MultiscaleSystem full_system(const GroupSpec& spec, double eps, const Vector& y) {
  return MultiscaleSystem(spec, eps, AlgebraVector::zero(spec), h_basis_vectors(spec),
                          AlgebraVector::from_m(spec, y), GroupElement::identity(spec));
}

TrajectoryBatch effective_batch(const GroupSpec& spec, const Vector& y, std::size_t n, std::uint64_t seed,
                                std::vector<double> times, double dt = 0.01) {
  const auto gen = coeffs_closed_form(spec, AlgebraVector::from_m(spec, y));
  const auto sde = build_effective_sde(gen, spec);
  SimOptions o;
  o.n_traj = n;
  o.seed = seed;
  o.record_times = std::move(times);
  return simulate_effective(spec, sde.fields, Matrix::Identity(spec.ambient_dim(), spec.ambient_dim()), dt,
                            1.0, o);
}

template <typename F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::invalid_argument;
}

}  // namespace

TEST(ZScore, ZeroStandardError) {
  EXPECT_EQ(z_score({1.0, 0.0}, {1.0, 0.0}), 0.0);
  EXPECT_EQ(z_score({1.0, 0.0}, {2.0, 0.0}), -std::numeric_limits<double>::infinity());
  EXPECT_DOUBLE_EQ(z_score({1.0, 0.3}, {0.5, 0.4}), 1.0);
}

TEST(Battery, NamesAndValues) {
  const auto names = battery_names(3);
  ASSERT_EQ(names.size(), 9u);
  EXPECT_EQ(names[4], "x0*x1");
  Vector x(3);
  x << 1.0, 2.0, 3.0;
  const Vector v = battery_values(x);
  EXPECT_EQ(v[4], 2.0);
  EXPECT_EQ(v[8], 9.0);
  EXPECT_EQ(battery_names(4).size(), 14u);
}

TEST(MomentCompare, BatchAgainstItself) {
  const GroupSpec spec = group("su2-hopf");
  const auto b = effective_batch(spec, Vector::Unit(2, 0), 200, 1, {0.5, 1.0});
  const auto r = moment_compare(b, b, {0.5, 1.0});
  EXPECT_EQ(r.z_scores.size(), 18u);
  for (double z : r.z_scores) EXPECT_EQ(z, 0.0);
  EXPECT_TRUE(r.verdict);
  EXPECT_EQ(r.recompute_verdict(), r.verdict);
}

TEST(MomentCompare, Errors) {
  const GroupSpec s2 = group("so_n1-sphere", {2});
  const GroupSpec s3 = group("so_n1-sphere", {3});
  const GroupSpec h3 = group("hyperbolic", {3});
  const auto a = effective_batch(s3, Vector::Unit(3, 0), 10, 1, {});
  const auto b = effective_batch(h3, Vector::Unit(3, 0), 10, 1, {}, 0.001);
  const auto c = effective_batch(s2, Vector::Unit(2, 0), 10, 1, {});
  EXPECT_EQ(error_of([&] { moment_compare(a, b, {1.0}); }), ErrorCode::mismatched_manifold);
  EXPECT_EQ(error_of([&] { moment_compare(a, c, {1.0}); }), ErrorCode::mismatched_manifold);
  EXPECT_EQ(error_of([&] { moment_compare(a, a, {0.5}); }), ErrorCode::invalid_argument);
}

TEST(MomentCompare, VerdictFollowsEstimates) {
  const GroupSpec spec = group("su2-hopf");
  const auto a = effective_batch(spec, Vector::Unit(2, 0), 400, 1, {1.0});
  const auto b = effective_batch(spec, Vector::Unit(2, 0), 400, 2, {1.0});
  auto r = moment_compare(a, b, {1.0});
  for (std::size_t k = 0; k < r.z_scores.size(); ++k)
    EXPECT_EQ(r.z_scores[k], z_score(r.estimates_a[k], r.estimates_b[k]));
  EXPECT_EQ(r.recompute_verdict(), r.verdict);
  r.estimates_a[0].mean += 10.0;
  EXPECT_FALSE(r.recompute_verdict());
}

TEST(MomentCompare, NullPassRate) {
  // Two batches from the same law with different seeds.
  const GroupSpec spec = group("su2-hopf");
  int passes = 0;
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    const auto a = effective_batch(spec, Vector::Unit(2, 0), 500, 1000 + 2 * rep, {1.0});
    const auto b = effective_batch(spec, Vector::Unit(2, 0), 500, 1001 + 2 * rep, {1.0});
    passes += moment_compare(a, b, {1.0}).verdict ? 1 : 0;
  }
  EXPECT_GE(passes, 95);
}

TEST(MomentCompare, HopfEffectiveAgainstSphericalHarmonics) {
  // Degree-one harmonics on the sphere of radius 1/2 decay at rate 2 |Y0|^2.
  const GroupSpec spec = group("su2-hopf");
  const auto b = effective_batch(spec, Vector::Unit(2, 1), 20000, 3, {0.25, 0.5, 1.0}, 0.001);
  for (std::size_t t = 0; t < 3; ++t) {
    const auto m = batch_moments(b, t);
    EXPECT_LE(std::abs(m.mean[0] + 0.5 * std::exp(-2.0 * b.times[t])), 3.0 * m.se[0]);
  }
}

TEST(Centring, TransitiveAndFixedCases) {
  McOptions mc;
  mc.samples = 100000;
  mc.seed = 4;
  const GroupSpec s3 = group("so_n1-sphere", {3});
  Vector y(3);
  y << 0.3, -1.2, 0.5;
  auto r = centring_check(s3, AlgebraVector::from_m(s3, y), mc);
  EXPECT_TRUE(r.pass);
  EXPECT_FALSE(r.estimate.exact);

  const GroupSpec hopf = group("su2-hopf");
  r = centring_check(hopf, AlgebraVector::basis_vector(hopf, 1), mc);
  EXPECT_TRUE(r.pass);

  const GroupSpec st = group("stiefel", {4, 2});
  const RealMatrix m0 = fixed_space_basis(st);
  ASSERT_EQ(m0.cols(), 1);
  r = centring_check(st, AlgebraVector::from_m(st, m0.col(0)), mc);
  EXPECT_TRUE(r.pass);
  EXPECT_TRUE(r.estimate.exact);
  EXPECT_LE((r.estimate.mean - m0.col(0)).norm(), 1e-15);

  // A mixed vector keeps exactly its fixed part.
  Vector moving = Vector::Unit(m0.rows(), m0.rows() - 1);
  moving -= m0.col(0) * m0.col(0).dot(moving);
  const Vector mixed = 2.0 * m0.col(0) + moving;
  r = centring_check(st, AlgebraVector::from_m(st, mixed), mc);
  EXPECT_TRUE(r.pass);
  EXPECT_LE((r.fixed_part - 2.0 * m0.col(0)).norm(), 1e-14);
}

TEST(HaarOracle, KnownIntegrals) {
  McOptions mc;
  mc.samples = 1000000;
  mc.seed = 5;
  const GroupSpec s3 = group("so_n1-sphere", {3});
  const Estimate one = haar_integral_oracle(s3, [](const GroupElement&) { return 1.0; }, mc);
  EXPECT_EQ(one.mean, 1.0);
  EXPECT_EQ(one.se, 0.0);

  const Estimate e11 = haar_integral_oracle(
      s3, [](const GroupElement& h) { return std::norm(h.matrix(0, 0)); }, mc);
  EXPECT_LE(std::abs(e11.mean - 1.0 / 3.0), 4.0 * e11.se);

  const AlgebraVector y0 = AlgebraVector::from_m(s3, Vector::Unit(3, 0));
  const AlgebraVector y1 = AlgebraVector::from_m(s3, Vector::Unit(3, 1));
  const AlgebraVector y2 = AlgebraVector::from_m(s3, Vector::Unit(3, 2));
  const Estimate cross = haar_integral_oracle(
      s3, [&](const GroupElement& h) { return alpha(s3, y0, y1, h) * alpha(s3, y0, y2, h); }, mc);
  EXPECT_LE(std::abs(cross.mean), 4.0 * cross.se);
}

TEST(HaarOracle, StandardErrorScaling) {
  const GroupSpec s3 = group("so_n1-sphere", {3});
  auto f = [](const GroupElement& h) { return std::norm(h.matrix(0, 0)); };
  double previous = 0.0;
  for (std::size_t n : {10000u, 100000u, 1000000u}) {
    McOptions mc;
    mc.samples = n;
    mc.seed = 6;
    const double se = haar_integral_oracle(s3, f, mc).se;
    if (previous > 0.0) {
      const double ratio = previous / se / std::sqrt(10.0);
      EXPECT_GT(ratio, 1.0 / 1.5);
      EXPECT_LT(ratio, 1.5);
    }
    previous = se;
  }
}

TEST(HaarOracle, Deterministic) {
  McOptions a;
  a.samples = 50000;
  a.seed = 8;
  a.threads = 1;
  McOptions b = a;
  b.threads = 3;
  const GroupSpec hopf = group("su2-hopf");
  auto f = [](const GroupElement& h) { return h.matrix(0, 0).real(); };
  const Estimate x = haar_integral_oracle(hopf, f, a);
  const Estimate y = haar_integral_oracle(hopf, f, b);
  EXPECT_EQ(x.mean, y.mean);
  EXPECT_EQ(x.se, y.se);
}

TEST(SplitTest, NoDrivingFields) {
  const GroupSpec spec = group("so_n1-sphere", {3});
  const MultiscaleSystem sys(spec, 1.0, AlgebraVector::zero(spec), {},
                             AlgebraVector::from_m(spec, Vector::Unit(3, 0)), GroupElement::identity(spec));
  const auto t = pathwise_split_test(sys, {1e-3, 5e-4}, 1.0, 4, 1);
  for (const auto& row : t.rows) EXPECT_LE(row.max_deviation, 1e-13);
  EXPECT_EQ(error_of([&] { pathwise_split_test(sys, {1e-3}, 1.0, 4, 1); }), ErrorCode::invalid_argument);
  EXPECT_EQ(error_of([&] { pathwise_split_test(sys, {1e-3, 2e-3}, 1.0, 4, 1); }),
            ErrorCode::invalid_argument);
}

TEST(SplitTest, MonotoneOverSevenHalvings) {
  std::vector<double> dts;
  for (int k = 0; k < 7; ++k) dts.push_back(1e-3 / std::pow(2.0, k));
  const GroupSpec hopf = group("su2-hopf");
  const auto th = pathwise_split_test(full_system(hopf, 1.0, Vector::Unit(2, 0)), dts, 1.0, 8, 2);
  EXPECT_TRUE(th.decreasing()) << th.rows.back().max_deviation;
  const GroupSpec s3 = group("so_n1-sphere", {3});
  const auto ts = pathwise_split_test(full_system(s3, 1.0, Vector::Unit(3, 0)), dts, 1.0, 8, 3);
  EXPECT_TRUE(ts.decreasing()) << ts.rows.back().max_deviation;
}

TEST(SlowRoute, BoundaryLayerAgainstExactMean) {
  // With h0 = e the slow route carries an O(eps) offset along Y0; a Haar start
  // averages it out. Both agree with the exact mean of the full system.
  const GroupSpec spec = group("su2-hopf");
  const liehom::testing::HopfMeanOracle oracle(spec);
  const double eps = 0.2, t = 0.25;
  const MultiscaleSystem sys = full_system(spec, eps, Vector::Unit(2, 0));
  SimOptions o;
  o.n_traj = 20000;
  o.seed = 9;
  o.record_times = {t / eps};
  for (FastStart start : {FastStart::identity, FastStart::haar}) {
    o.fast_start = start;
    const auto m = batch_moments(simulate_slow_batch(sys, 0.002, t / eps, o), 0);
    Vector exact = Vector::Zero(3);
    const int angles = 64;
    for (int k = 0; k < angles; ++k) {
      MultiscaleSystem lifted = sys;
      if (start == FastStart::haar)
        lifted.g0 = exp_matrix(spec, AlgebraVector::basis_vector(spec, 0), 2.0 * std::numbers::pi * k / angles);
      exact += oracle.mean(lifted, t / eps) / angles;
    }
    for (int i = 0; i < 3; ++i) EXPECT_LE(std::abs(m.mean[i] - exact[i]), 4.0 * m.se[i]) << i;
    const double offset = exact[1];  // the limit has E x1 = 0
    if (start == FastStart::identity) EXPECT_LT(offset, -0.05);
    else EXPECT_LE(std::abs(offset), 1e-12);
  }
}

TEST(LimitExperiment, DeterministicAcrossThreads) {
  const GroupSpec spec = group("su2-hopf");
  const MultiscaleSystem sys = full_system(spec, 0.2, Vector::Unit(2, 0));
  LimitOptions o;
  o.n_traj = 64;
  o.seed = 10;
  o.threads = 1;
  const auto a = limit_experiment(sys, o);
  o.threads = 3;
  const auto b = limit_experiment(sys, o);
  ASSERT_EQ(a.report.z_scores.size(), 27u);
  for (std::size_t k = 0; k < a.report.z_scores.size(); ++k) {
    EXPECT_EQ(a.report.estimates_a[k].mean, b.report.estimates_a[k].mean);
    EXPECT_EQ(a.report.estimates_b[k].se, b.report.estimates_b[k].se);
  }
  EXPECT_EQ(a.generator.route, CoeffRoute::closed_form);
  EXPECT_LE(a.max_manifold_residual, 1e-12);
}

TEST(RateSweep, ConstantFunctionAndGuards) {
  const GroupSpec spec = group("su2-hopf");
  const MultiscaleSystem sys = full_system(spec, 1.0, Vector::Unit(2, 0));
  RateOptions o;
  o.n_traj = 50;
  const auto t = rate_sweep(sys, {0.4, 0.2}, [](const Vector&) { return 0.7; }, o);
  for (const auto& row : t.rows) {
    EXPECT_EQ(row.gap, 0.0);
    EXPECT_EQ(row.se, 0.0);
  }
  EXPECT_TRUE(t.non_increasing);
  EXPECT_FALSE(t.slope.has_value());

  o.n_traj = 1000000;
  EXPECT_EQ(error_of([&] { rate_sweep(sys, {0.4, 0.001}, [](const Vector&) { return 0.0; }, o); }),
            ErrorCode::budget_exceeded);
  EXPECT_EQ(error_of([&] { rate_sweep(sys, {0.1, 0.2}, [](const Vector&) { return 0.0; }, o); }),
            ErrorCode::invalid_argument);
}

TEST(RateSweep, NoSeparationLeavesAGap) {
  const GroupSpec spec = group("su2-hopf");
  const MultiscaleSystem sys = full_system(spec, 1.0, Vector::Unit(2, 0));
  RateOptions o;
  o.n_traj = 2000;
  const auto t = rate_sweep(sys, {5.0}, [](const Vector& x) { return x[1]; }, o);
  EXPECT_GT(t.rows[0].gap, 10.0 * t.rows[0].se);
}
