#include "liehom/lie/group.hpp"
#include "liehom/lie/exp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

namespace liehom {

namespace {

constexpr double kBasisTol = 1e-12;
constexpr int kMaxAmbient = 9;

Matrix lorentz_metric(int n) {
  Matrix s = Matrix::Identity(n, n);
  s(0, 0) = -1.0;
  return s;
}

// (E_ij - E_ji) / sqrt(2), zero-based indices.
Matrix rotation_generator(int n, int i, int j) {
  Matrix a = Matrix::Zero(n, n);
  a(i, j) = std::numbers::sqrt2 / 2.0;
  a(j, i) = -std::numbers::sqrt2 / 2.0;
  return a;
}

// (E_0k + E_k0) / sqrt(2).
Matrix boost_generator(int n, int k) {
  Matrix b = Matrix::Zero(n, n);
  b(0, k) = std::numbers::sqrt2 / 2.0;
  b(k, 0) = std::numbers::sqrt2 / 2.0;
  return b;
}

void require_param_count(std::string_view name, std::span<const int> params, std::size_t count) {
  if (params.size() != count) {
    throw Error(ErrorCode::unsupported_dimension,
                std::string(name) + " expects " + std::to_string(count) + " integer parameter(s)");
  }
}

GroupSpec make_hopf() {
  const Complex i{0.0, 1.0};
  Matrix x1(2, 2), x2(2, 2), x3(2, 2);
  x1 << i, 0, 0, -i;
  x2 << 0, 1, -1, 0;
  x3 << 0, i, i, 0;
  Matrix o = Matrix::Zero(2, 1);
  o(0, 0) = 1.0;
  SubgroupFactor circle{SubgroupFactor::Kind::circle, 0, 1, x1};
  return GroupSpec("su2-hopf", {}, 2, Relation::special_unitary, {x1}, {x2, x3}, 0.5, o,
                   ProjectionKind::hopf, {circle});
}

GroupSpec make_sphere(std::string name, int n) {
  if (n < 2 || n + 1 > kMaxAmbient) {
    throw Error(ErrorCode::unsupported_dimension, "sphere dimension must lie in [2, 8]");
  }
  const int size = n + 1;
  std::vector<Matrix> h, m;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) h.push_back(rotation_generator(size, i, j));
  for (int k = 0; k < n; ++k) m.push_back(rotation_generator(size, k, n));
  Matrix o = Matrix::Zero(size, 1);
  o(n, 0) = 1.0;
  SubgroupFactor block{SubgroupFactor::Kind::rotation, 0, n, {}};
  std::vector<int> params;
  if (name != "so4-so3") params.push_back(n);
  return GroupSpec(std::move(name), params, size, Relation::special_orthogonal, std::move(h),
                   std::move(m), 1.0, o, ProjectionKind::action, {block});
}

GroupSpec make_stiefel(int n, int k) {
  if (n > kMaxAmbient || k < 1 || n - k < 2) {
    throw Error(ErrorCode::unsupported_dimension, "stiefel(n, k) needs n <= 9, k >= 1, n - k >= 2");
  }
  std::vector<Matrix> h, m;
  for (int i = k; i < n; ++i)
    for (int j = i + 1; j < n; ++j) h.push_back(rotation_generator(n, i, j));
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) m.push_back(rotation_generator(n, i, j));
  for (int i = 0; i < k; ++i)
    for (int j = k; j < n; ++j) m.push_back(rotation_generator(n, i, j));
  Matrix o = Matrix::Identity(n, n).leftCols(k);
  SubgroupFactor block{SubgroupFactor::Kind::rotation, k, n - k, {}};
  return GroupSpec("stiefel", {n, k}, n, Relation::special_orthogonal, std::move(h), std::move(m),
                   1.0, o, ProjectionKind::action, {block});
}

GroupSpec make_hyperbolic(int n) {
  if (n < 2 || n + 1 > kMaxAmbient) {
    throw Error(ErrorCode::unsupported_dimension, "hyperbolic dimension must lie in [2, 8]");
  }
  const int size = n + 1;
  std::vector<Matrix> h, m;
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j) h.push_back(rotation_generator(size, i, j));
  for (int k = 1; k <= n; ++k) m.push_back(boost_generator(size, k));
  Matrix o = Matrix::Zero(size, 1);
  o(0, 0) = 1.0;
  SubgroupFactor block{SubgroupFactor::Kind::rotation, 1, n, {}};
  return GroupSpec("hyperbolic", {n}, size, Relation::lorentz, std::move(h), std::move(m), 1.0, o,
                   ProjectionKind::action, {block});
}

}  // namespace

GroupSpec::GroupSpec(std::string name, std::vector<int> params, int ambient_dim, Relation relation,
                     std::vector<Matrix> h_basis, std::vector<Matrix> m_basis, double kappa,
                     Matrix base_point, ProjectionKind projection,
                     std::vector<SubgroupFactor> subgroup)
    : name_(std::move(name)),
      params_(std::move(params)),
      ambient_dim_(ambient_dim),
      relation_(relation),
      h_dim_(static_cast<int>(h_basis.size())),
      kappa_(kappa),
      base_point_(std::move(base_point)),
      projection_(projection),
      subgroup_(std::move(subgroup)) {
  basis_ = std::move(h_basis);
  for (auto& y : m_basis) basis_.push_back(std::move(y));

  const int d = dim();
  for (const auto& b : basis_) {
    if (algebra_residual(b) > kBasisTol)
      throw Error(ErrorCode::invalid_argument, name_ + ": basis matrix violates the algebra relation");
  }
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (std::abs(inner(basis_[i], basis_[j]) - (i == j ? 1.0 : 0.0)) > kBasisTol)
        throw Error(ErrorCode::invalid_argument, name_ + ": basis is not orthonormal");

  ad_.reserve(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    RealMatrix adi(d, d);
    for (int k = 0; k < d; ++k) {
      const Matrix c = basis_[i] * basis_[k] - basis_[k] * basis_[i];
      double residual = 0.0;
      adi.col(k) = coordinates(c, &residual);
      if (residual > kBasisTol)
        throw Error(ErrorCode::closure_violation, name_ + ": basis does not close under brackets");
    }
    ad_.push_back(std::move(adi));
  }

  // ad(h) is skew on g and preserves m.
  for (int z = 0; z < h_dim_; ++z) {
    if ((ad_[z] + ad_[z].transpose()).cwiseAbs().maxCoeff() > kBasisTol)
      throw Error(ErrorCode::invalid_argument, name_ + ": inner product is not ad_h-invariant");
    if (m_dim() > 0 && ad_[z].block(0, h_dim_, h_dim_, m_dim()).cwiseAbs().maxCoeff() > kBasisTol)
      throw Error(ErrorCode::invalid_argument, name_ + ": decomposition is not reductive");
  }
}

int GroupSpec::projected_dim() const {
  if (projection_ == ProjectionKind::hopf) return 3;
  return static_cast<int>(base_point_.size());
}

RealMatrix GroupSpec::ad_of(const Vector& coords) const {
  RealMatrix out = RealMatrix::Zero(dim(), dim());
  for (int i = 0; i < dim(); ++i)
    if (coords[i] != 0.0) out += coords[i] * ad_[static_cast<std::size_t>(i)];
  return out;
}

double GroupSpec::inner(const Matrix& a, const Matrix& b) const {
  return kappa_ * (a.cwiseProduct(b.conjugate())).sum().real();
}

Vector GroupSpec::coordinates(const Matrix& x, double* residual) const {
  Vector c(dim());
  for (int i = 0; i < dim(); ++i) c[i] = inner(x, basis_[static_cast<std::size_t>(i)]);
  if (residual != nullptr) *residual = (x - matrix(c)).norm();
  return c;
}

Matrix GroupSpec::matrix(const Vector& coords) const {
  Matrix out = Matrix::Zero(ambient_dim_, ambient_dim_);
  for (int i = 0; i < dim(); ++i)
    if (coords[i] != 0.0) out += coords[i] * basis_[static_cast<std::size_t>(i)];
  return out;
}

Matrix GroupSpec::inverse(const Matrix& g) const {
  switch (relation_) {
    case Relation::special_orthogonal: return g.transpose();
    case Relation::special_unitary: return g.adjoint();
    case Relation::lorentz: {
      const Matrix s = lorentz_metric(ambient_dim_);
      return s * g.transpose() * s;
    }
  }
  return g.inverse();
}

double GroupSpec::membership_residual(const Matrix& g) const {
  const int n = ambient_dim_;
  const Matrix id = Matrix::Identity(n, n);
  const double det_defect = std::abs(g.determinant() - Complex(1.0));
  switch (relation_) {
    case Relation::special_orthogonal:
      return (g.transpose() * g - id).norm() + det_defect + g.imag().norm();
    case Relation::special_unitary:
      return (g.adjoint() * g - id).norm() + det_defect;
    case Relation::lorentz: {
      const Matrix s = lorentz_metric(n);
      return (g.transpose() * s * g - s).norm() + det_defect + g.imag().norm() +
             std::max(0.0, 1.0 - g(0, 0).real());
    }
  }
  return 0.0;
}

double GroupSpec::algebra_residual(const Matrix& x) const {
  switch (relation_) {
    case Relation::special_orthogonal: return (x.transpose() + x).norm() + x.imag().norm();
    case Relation::special_unitary: return (x.adjoint() + x).norm() + std::abs(x.trace());
    case Relation::lorentz: {
      const Matrix s = lorentz_metric(ambient_dim_);
      return (x.transpose() * s + s * x).norm() + x.imag().norm();
    }
  }
  return 0.0;
}

AlgebraVector::AlgebraVector(const GroupSpec& spec, Vector coeffs)
    : coeffs_(std::move(coeffs)), matrix_(spec.matrix(coeffs_)) {
  if (coeffs_.size() != spec.dim())
    throw Error(ErrorCode::invalid_argument, "coordinate vector has the wrong length");
}

AlgebraVector AlgebraVector::from_matrix(const GroupSpec& spec, const Matrix& x, double tol) {
  double residual = 0.0;
  Vector c = spec.coordinates(x, &residual);
  if (residual > tol * std::max(1.0, x.norm()))
    throw Error(ErrorCode::closure_violation,
                "matrix is not in the span of the basis (residual " + fmt(residual) + ")");
  return AlgebraVector(spec, std::move(c));
}

AlgebraVector AlgebraVector::zero(const GroupSpec& spec) {
  return AlgebraVector(spec, Vector::Zero(spec.dim()));
}

AlgebraVector AlgebraVector::basis_vector(const GroupSpec& spec, int i) {
  return AlgebraVector(spec, Vector::Unit(spec.dim(), i));
}

AlgebraVector AlgebraVector::from_m(const GroupSpec& spec, const Vector& m_coords) {
  if (m_coords.size() != spec.m_dim())
    throw Error(ErrorCode::invalid_argument, "m-coordinate vector has the wrong length");
  Vector c = Vector::Zero(spec.dim());
  c.tail(spec.m_dim()) = m_coords;
  return AlgebraVector(spec, std::move(c));
}

AlgebraVector AlgebraVector::from_h(const GroupSpec& spec, const Vector& h_coords) {
  if (h_coords.size() != spec.h_dim())
    throw Error(ErrorCode::invalid_argument, "h-coordinate vector has the wrong length");
  Vector c = Vector::Zero(spec.dim());
  c.head(spec.h_dim()) = h_coords;
  return AlgebraVector(spec, std::move(c));
}

GroupElement GroupElement::checked(const GroupSpec& spec, Matrix m) {
  const double residual = spec.membership_residual(m);
  if (!(residual <= spec.membership_tolerance()))
    throw Error(ErrorCode::membership_violation,
                spec.name() + ": membership residual " + fmt(residual));
  return GroupElement{std::move(m), residual};
}

GroupElement GroupElement::identity(const GroupSpec& spec) {
  return GroupElement{Matrix::Identity(spec.ambient_dim(), spec.ambient_dim()), 0.0};
}

GroupSpec make_group(std::string_view name, std::span<const int> params) {
  if (name == "su2-hopf") {
    require_param_count(name, params, 0);
    return make_hopf();
  }
  if (name == "so_n1-sphere") {
    require_param_count(name, params, 1);
    return make_sphere("so_n1-sphere", params[0]);
  }
  if (name == "so4-so3") {
    require_param_count(name, params, 0);
    return make_sphere("so4-so3", 3);
  }
  if (name == "stiefel") {
    require_param_count(name, params, 2);
    return make_stiefel(params[0], params[1]);
  }
  if (name == "hyperbolic") {
    require_param_count(name, params, 1);
    return make_hyperbolic(params[0]);
  }
  throw Error(ErrorCode::unknown_name, "no catalog group named '" + std::string(name) + "'");
}

std::vector<std::string> catalog_names() {
  return {"su2-hopf", "so_n1-sphere", "so4-so3", "stiefel", "hyperbolic"};
}

GroupElement exp_matrix(const GroupSpec& spec, const AlgebraVector& x, double t) {
  return GroupElement::checked(spec, expm(t * x.matrix()));
}

AlgebraVector bracket(const GroupSpec& spec, const AlgebraVector& x, const AlgebraVector& y) {
  const Matrix c = x.matrix() * y.matrix() - y.matrix() * x.matrix();
  return AlgebraVector::from_matrix(spec, c, 1e-12 * std::max(1.0, x.norm() * y.norm()));
}

AlgebraVector Ad(const GroupSpec& spec, const GroupElement& g, const AlgebraVector& y) {
  const Matrix c = g.matrix * y.matrix() * spec.inverse(g.matrix);
  return AlgebraVector::from_matrix(spec, c, 1e-11);
}

RealMatrix Ad_on_m(const GroupSpec& spec, const Matrix& g) {
  const int d = spec.m_dim();
  const Matrix g_inv = spec.inverse(g);
  RealMatrix r(d, d);
  for (int j = 0; j < d; ++j) {
    const Matrix moved = g * spec.m_basis(j) * g_inv;
    for (int i = 0; i < d; ++i) r(i, j) = spec.inner(moved, spec.m_basis(i));
  }
  return r;
}

RealMatrix haar_rotation(int m, RandomStream& rng) {
  if (m <= 1) return RealMatrix::Identity(1, 1);
  RealMatrix z(m, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) z(i, j) = rng.normal();
  Eigen::HouseholderQR<RealMatrix> qr(z);
  RealMatrix q = qr.householderQ();
  const RealMatrix& r = qr.matrixQR();
  for (int j = 0; j < m; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  if (q.determinant() < 0.0) q.col(0).swap(q.col(1));
  return q;
}

GroupElement haar_sample(const GroupSpec& spec, RandomStream& rng) {
  const int n = spec.ambient_dim();
  Matrix h = Matrix::Identity(n, n);
  for (const auto& factor : spec.subgroup()) {
    if (factor.kind == SubgroupFactor::Kind::circle) {
      const double theta = 2.0 * std::numbers::pi * rng.uniform();
      h = h * expm(theta * factor.generator);
    } else {
      Matrix block = Matrix::Identity(n, n);
      block.block(factor.offset, factor.offset, factor.size, factor.size) =
          haar_rotation(factor.size, rng).cast<Complex>();
      h = h * block;
    }
  }
  return GroupElement{h, spec.membership_residual(h)};
}

Vector project(const GroupSpec& spec, const Matrix& g) {
  const Matrix moved = g * spec.base_point();
  if (spec.projection() == ProjectionKind::hopf) {
    const Complex z = moved(0, 0);
    const Complex w = moved(1, 0);
    const Complex zw = z * std::conj(w);
    Vector x(3);
    x << 0.5 * (std::norm(w) - std::norm(z)), zw.real(), zw.imag();
    return x;
  }
  const Eigen::MatrixXd real = moved.real();
  return Eigen::Map<const Vector>(real.data(), real.size());
}

double manifold_residual(const GroupSpec& spec, const Vector& x) {
  if (spec.projection() == ProjectionKind::hopf) return std::abs(x.norm() - 0.5);
  if (spec.relation() == Relation::lorentz) {
    const double f = -x[0] * x[0] + x.tail(x.size() - 1).squaredNorm();
    return std::abs(f + 1.0) + std::max(0.0, 1.0 - x[0]);
  }
  const int n = spec.ambient_dim();
  const int k = static_cast<int>(x.size()) / n;
  const Eigen::Map<const RealMatrix> frame(x.data(), n, k);
  return (frame.transpose() * frame - RealMatrix::Identity(k, k)).norm();
}

}  // namespace liehom
