#include "liehom/lie/exp.hpp"
#include "liehom/lie/group.hpp"
#include "liehom/montecarlo.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace liehom;

namespace {

Matrix series_exp(const Matrix& x) {
  Matrix result = Matrix::Identity(x.rows(), x.cols());
  Matrix term = result;
  for (int k = 1; k <= 30; ++k) {
    term = term * x / static_cast<double>(k);
    result += term;
  }
  return result;
}

RealMatrix series_exp(const RealMatrix& x) {
  RealMatrix result = RealMatrix::Identity(x.rows(), x.cols());
  RealMatrix term = result;
  for (int k = 1; k <= 40; ++k) {
    term = term * x / static_cast<double>(k);
    result += term;
  }
  return result;
}

AlgebraVector random_element(const GroupSpec& spec, RandomStream& rng, double scale = 1.0) {
  Vector c(spec.dim());
  for (int i = 0; i < spec.dim(); ++i) c[i] = scale * rng.normal();
  return AlgebraVector(spec, c);
}

GroupSpec sphere(int n) {
  const int p[] = {n};
  return make_group("so_n1-sphere", p);
}

GroupSpec hyperbolic(int n) {
  const int p[] = {n};
  return make_group("hyperbolic", p);
}

GroupSpec stiefel(int n, int k) {
  const int p[] = {n, k};
  return make_group("stiefel", p);
}

}  // namespace

TEST(Philox, KnownAnswer) {
  const auto out = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, SubstreamsDiffer) {
  RandomStream a(7, 0, 0, StreamPurpose::driving);
  RandomStream b(7, 1, 0, StreamPurpose::driving);
  RandomStream c(7, 0, 1, StreamPurpose::driving);
  const double x = a.normal();
  EXPECT_NE(x, b.normal());
  EXPECT_NE(x, c.normal());
  RandomStream a2(7, 0, 0, StreamPurpose::driving);
  EXPECT_EQ(x, a2.normal());
}

TEST(Catalog, AllGroupsSatisfyInvariants) {
  std::vector<GroupSpec> specs{make_group("su2-hopf"), make_group("so4-so3")};
  for (int n = 2; n <= 8; ++n) specs.push_back(sphere(n));
  for (int n = 2; n <= 8; ++n) specs.push_back(hyperbolic(n));
  specs.push_back(stiefel(4, 2));
  specs.push_back(stiefel(5, 2));
  specs.push_back(stiefel(5, 1));
  for (const auto& spec : specs) {
    SCOPED_TRACE(spec.name());
    RealMatrix gram(spec.dim(), spec.dim());
    for (int i = 0; i < spec.dim(); ++i)
      for (int j = 0; j < spec.dim(); ++j) gram(i, j) = spec.inner(spec.basis(i), spec.basis(j));
    EXPECT_LE((gram - RealMatrix::Identity(spec.dim(), spec.dim())).cwiseAbs().maxCoeff(), 1e-12);
    for (int z = 0; z < spec.h_dim(); ++z) {
      const RealMatrix& ad = spec.ad(z);
      EXPECT_LE((ad + ad.transpose()).cwiseAbs().maxCoeff(), 1e-12);
      if (spec.m_dim() > 0)
        EXPECT_LE(ad.topRightCorner(spec.h_dim(), spec.m_dim()).cwiseAbs().maxCoeff(), 1e-12);
    }
    const Vector o = project(spec, GroupElement::identity(spec));
    EXPECT_LE(manifold_residual(spec, o), 1e-12);
  }
}

TEST(Catalog, Errors) {
  try {
    make_group("e8");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unknown_name);
  }
  try {
    sphere(9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unsupported_dimension);
  }
  try {
    make_group("so_n1-sphere");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unsupported_dimension);
  }
}

TEST(Catalog, HopfShape) {
  const GroupSpec spec = make_group("su2-hopf");
  EXPECT_EQ(spec.h_dim(), 1);
  EXPECT_EQ(spec.m_dim(), 2);
  const Vector x = project(spec, GroupElement::identity(spec));
  EXPECT_NEAR(x[0], -0.5, 1e-15);
  EXPECT_NEAR(x[1], 0.0, 1e-15);
  EXPECT_NEAR(x[2], 0.0, 1e-15);
}

TEST(Catalog, SphereAndHyperbolicBasePoints) {
  const GroupSpec s3 = sphere(3);
  EXPECT_EQ(s3.ambient_dim(), 4);
  EXPECT_EQ(s3.m_dim(), 3);
  Vector o = Vector::Zero(4);
  o[3] = 1.0;
  EXPECT_EQ(project(s3, GroupElement::identity(s3)), o);

  const GroupSpec h3 = hyperbolic(3);
  const Vector e0 = project(h3, GroupElement::identity(h3));
  EXPECT_NEAR(-e0[0] * e0[0] + e0.tail(3).squaredNorm(), -1.0, 1e-15);
}

TEST(Exp, ZeroAndDiagonal) {
  const GroupSpec spec = make_group("su2-hopf");
  const auto id = exp_matrix(spec, AlgebraVector::zero(spec), 1.3);
  EXPECT_LE((id.matrix - Matrix::Identity(2, 2)).norm(), 0.0);
  const double t = 0.77;
  const auto g = exp_matrix(spec, AlgebraVector::basis_vector(spec, 0), t);
  EXPECT_NEAR(std::abs(g.matrix(0, 0) - std::polar(1.0, t)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(g.matrix(1, 1) - std::polar(1.0, -t)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(g.matrix(0, 1)), 0.0, 1e-15);
}

TEST(Exp, MatchesSeriesOracle) {
  RandomStream rng(11, 0, 0, StreamPurpose::test);
  for (const auto& spec : {sphere(3), make_group("su2-hopf"), sphere(2), hyperbolic(3), sphere(5)}) {
    for (int rep = 0; rep < 20; ++rep) {
      const AlgebraVector x = random_element(spec, rng);
      const Matrix expected = series_exp(Matrix(0.7 * x.matrix()));
      const GroupElement g = exp_matrix(spec, x, 0.7);
      EXPECT_LE((g.matrix - expected).cwiseAbs().maxCoeff(), 1e-12) << spec.name();
      EXPECT_LE(g.residual, 1e-11);
    }
  }
}

TEST(Exp, SingleGeneratorClosedForms) {
  const GroupSpec h = hyperbolic(4);
  const AlgebraVector boost = AlgebraVector::from_m(h, Vector::Unit(4, 2));
  const Matrix expected = series_exp(Matrix(2.5 * boost.matrix()));
  const Matrix got = expm(Matrix(2.5 * boost.matrix()));
  EXPECT_LE((got - expected).cwiseAbs().maxCoeff(), 1e-12 * expected.cwiseAbs().maxCoeff());
}

TEST(Exp, LargeArgumentStaysInGroup) {
  RandomStream rng(12, 0, 0, StreamPurpose::test);
  const GroupSpec spec = sphere(6);
  const AlgebraVector x = random_element(spec, rng, 10.0);
  EXPECT_LE(exp_matrix(spec, x, 1.0).residual, 1e-11);
}

TEST(Bracket, HopfSignAndAntisymmetry) {
  const GroupSpec spec = make_group("su2-hopf");
  const auto x1 = AlgebraVector::basis_vector(spec, 0);
  const auto x2 = AlgebraVector::basis_vector(spec, 1);
  const auto x3 = AlgebraVector::basis_vector(spec, 2);
  EXPECT_LE(bracket(spec, x1, x1).norm(), 1e-15);
  EXPECT_LE((bracket(spec, x1, x2).coeffs() - 2.0 * x3.coeffs()).norm(), 1e-14);
  EXPECT_LE((bracket(spec, x2, x3).coeffs() - 2.0 * x1.coeffs()).norm(), 1e-14);
}

TEST(Bracket, So4Example) {
  const GroupSpec spec = sphere(3);
  // h-basis order: A12, A13, A23 (one-based labels).
  const auto a12 = AlgebraVector::basis_vector(spec, 0);
  const auto a13 = AlgebraVector::basis_vector(spec, 1);
  const auto a23 = AlgebraVector::basis_vector(spec, 2);
  const AlgebraVector c = bracket(spec, a12, a13);
  EXPECT_LE((c.coeffs() + a23.coeffs() / std::numbers::sqrt2).norm(), 1e-14);
}

TEST(Bracket, ClosureViolation) {
  const GroupSpec spec = sphere(3);
  Matrix x = Matrix::Zero(4, 4);
  x(0, 0) = 1.0;
  EXPECT_THROW(AlgebraVector::from_matrix(spec, x), Error);
}

TEST(Adjoint, IdentityAndSeriesOracle) {
  RandomStream rng(13, 0, 0, StreamPurpose::test);
  for (const auto& spec : {sphere(3), make_group("su2-hopf"), hyperbolic(3), stiefel(4, 2)}) {
    SCOPED_TRACE(spec.name());
    const AlgebraVector y = random_element(spec, rng);
    EXPECT_LE((Ad(spec, GroupElement::identity(spec), y).coeffs() - y.coeffs()).norm(), 1e-14);
    for (int rep = 0; rep < 10; ++rep) {
      const AlgebraVector z = random_element(spec, rng);
      const double s = 0.3;
      const GroupElement g = exp_matrix(spec, z, s);
      const Vector expected = series_exp(RealMatrix(s * spec.ad_of(z.coeffs()))) * y.coeffs();
      EXPECT_LE((Ad(spec, g, y).coeffs() - expected).norm(), 1e-10);
      // Ad(exp X) = exp(ad X) as linear maps.
      for (int i = 0; i < spec.dim(); ++i) {
        const AlgebraVector b = AlgebraVector::basis_vector(spec, i);
        const Vector col = series_exp(RealMatrix(s * spec.ad_of(z.coeffs()))).col(i);
        EXPECT_LE((Ad(spec, g, b).coeffs() - col).norm(), 1e-9);
      }
    }
  }
}

TEST(Adjoint, HPreservesMAndNorm) {
  RandomStream rng(14, 0, 0, StreamPurpose::test);
  for (const auto& spec : {sphere(4), make_group("su2-hopf"), hyperbolic(3), stiefel(5, 2)}) {
    for (int rep = 0; rep < 50; ++rep) {
      const GroupElement h = haar_sample(spec, rng);
      Vector m = Vector::Zero(spec.m_dim());
      for (int j = 0; j < spec.m_dim(); ++j) m[j] = rng.normal();
      const AlgebraVector y = AlgebraVector::from_m(spec, m);
      const AlgebraVector moved = Ad(spec, h, y);
      EXPECT_LE(moved.h_part(spec).norm(), 1e-11);
      EXPECT_NEAR(moved.norm(), y.norm(), 1e-11);
      EXPECT_LE((Ad_on_m(spec, h.matrix) * m - moved.m_part(spec)).norm(), 1e-12);
    }
  }
}

TEST(Adjoint, SphereBlockRotatesLastColumn) {
  const GroupSpec spec = sphere(3);
  RandomStream rng(15, 0, 0, StreamPurpose::test);
  const RealMatrix b = haar_rotation(3, rng);
  Matrix g = Matrix::Identity(4, 4);
  g.topLeftCorner(3, 3) = b.cast<Complex>();
  const Vector c(Vector::Unit(3, 0) * 0.4 + Vector::Unit(3, 2) * 0.9);
  const AlgebraVector moved = Ad(spec, GroupElement{g, 0.0}, AlgebraVector::from_m(spec, c));
  EXPECT_LE((moved.m_part(spec) - b * c).norm(), 1e-14);
}

TEST(Haar, DeterminantAndMoments) {
  McOptions opt;
  opt.samples = 1000000;
  opt.seed = 21;
  const GroupSpec spec = sphere(3);  // H = SO(3) in the top-left block
  const SampleMoments m = haar_average(spec, 11, opt, [](const GroupElement& h, Vector& v) {
    const Eigen::Matrix3d r = h.matrix.topLeftCorner(3, 3).real();
    v.head(9) = Eigen::Map<const Vector>(r.data(), 9);
    v[9] = r(0, 0) * r(0, 0);
    v[10] = r.determinant();
  });
  const double bound = 4.0 / std::sqrt(static_cast<double>(opt.samples));
  for (int i = 0; i < 9; ++i) EXPECT_LE(std::abs(m.mean[i]), bound);
  EXPECT_LE(std::abs(m.mean[9] - 1.0 / 3.0), 4.0 * m.se[9]);
  EXPECT_NEAR(m.mean[10], 1.0, 1e-12);
  EXPECT_LE(m.se[10], 1e-12);
}

TEST(Haar, LeftInvariance) {
  const GroupSpec spec = sphere(3);
  RandomStream fixed(31, 0, 0, StreamPurpose::test);
  const Matrix h0 = haar_sample(spec, fixed).matrix;
  McOptions a;
  a.samples = 200000;
  a.seed = 32;
  McOptions b = a;
  b.seed = 33;
  auto entries = [](const Matrix& h, Vector& v) {
    const RealMatrix r = h.topLeftCorner(3, 3).real();
    for (int i = 0; i < 9; ++i) v[i] = r(i % 3, i / 3);
    for (int i = 0; i < 9; ++i) v[9 + i] = v[i] * v[i];
  };
  const SampleMoments plain =
      haar_average(spec, 18, a, [&](const GroupElement& h, Vector& v) { entries(h.matrix, v); });
  const SampleMoments shifted =
      haar_average(spec, 18, b, [&](const GroupElement& h, Vector& v) { entries(h0 * h.matrix, v); });
  for (int i = 0; i < 18; ++i) {
    const double se = std::hypot(plain.se[i], shifted.se[i]);
    EXPECT_LE(std::abs(plain.mean[i] - shifted.mean[i]), 4.0 * se) << i;
  }
}

TEST(Haar, DeterministicAcrossThreads) {
  const GroupSpec spec = sphere(4);
  McOptions one;
  one.samples = 20000;
  one.seed = 5;
  one.threads = 1;
  McOptions four = one;
  four.threads = 4;
  auto f = [](const GroupElement& h, Vector& v) { v[0] = h.matrix(0, 1).real(); };
  const auto a = haar_average(spec, 1, one, f);
  const auto b = haar_average(spec, 1, four, f);
  EXPECT_EQ(a.mean[0], b.mean[0]);
  EXPECT_EQ(a.se[0], b.se[0]);
}

TEST(Project, IsotropyAndManifold) {
  RandomStream rng(41, 0, 0, StreamPurpose::test);
  for (const auto& spec : {sphere(3), make_group("su2-hopf"), hyperbolic(3), stiefel(5, 2)}) {
    SCOPED_TRACE(spec.name());
    for (int rep = 0; rep < 20; ++rep) {
      const GroupElement g = exp_matrix(spec, random_element(spec, rng), 1.0);
      const GroupElement h = haar_sample(spec, rng);
      const Vector x = project(spec, g);
      EXPECT_LE(manifold_residual(spec, x), 1e-9);
      EXPECT_LE((project(spec, g.matrix * h.matrix) - x).norm(), 1e-12 * std::max(1.0, x.norm()));
    }
  }
}

TEST(Project, HopfGreatCircle) {
  const GroupSpec spec = make_group("su2-hopf");
  const AlgebraVector x2 = AlgebraVector::basis_vector(spec, 1);
  for (double t = 0.0; t < 3.2; t += 0.1) {
    const Vector x = project(spec, exp_matrix(spec, x2, t));
    EXPECT_NEAR(x.norm(), 0.5, 1e-10);
    // exp(t X2) e1 = (cos t, -sin t): height -cos(2t)/2, Re(z w) = -sin(2t)/2, Im = 0.
    EXPECT_NEAR(x[0], -0.5 * std::cos(2 * t), 1e-14);
    EXPECT_NEAR(x[1], -0.5 * std::sin(2 * t), 1e-14);
    EXPECT_NEAR(x[2], 0.0, 1e-14);
  }
}
