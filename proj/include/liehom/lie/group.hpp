#pragma once

#include "liehom/core.hpp"
#include "liehom/random.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace liehom {

enum class Relation {
  special_orthogonal,  // g^T g = I, det g = 1
  special_unitary,     // g^* g = I, det g = 1
  lorentz,             // g^T S g = S, det g = 1, g_00 >= 1, S = diag(-1, I)
};

enum class ProjectionKind {
  action,  // g -> g * o
  hopf,    // (z, w) = g * e_1 -> (|w|^2 - |z|^2)/2, Re(z conj w), Im(z conj w)
};

/// One compact factor of the isotropy subgroup H, embedded in G.
struct SubgroupFactor {
  enum class Kind { circle, rotation };
  Kind kind = Kind::rotation;
  int offset = 0;    // rotation: first ambient index of the SO(size) block
  int size = 0;      // rotation: block size
  Matrix generator;  // circle: h(theta) = exp(theta * generator), theta uniform on [0, 2 pi)
};

/// Immutable descriptor of a matrix Lie group G with reductive pair (H, m).
///
/// The full basis lists the h-basis first, then the m-basis, and is orthonormal
/// for <A, B> = kappa * Re trace(A B^*). Structure constants ad(B_i) are
/// precomputed in full-basis coordinates.
class GroupSpec {
 public:
  GroupSpec(std::string name, std::vector<int> params, int ambient_dim, Relation relation,
            std::vector<Matrix> h_basis, std::vector<Matrix> m_basis, double kappa,
            Matrix base_point, ProjectionKind projection, std::vector<SubgroupFactor> subgroup);

  const std::string& name() const { return name_; }
  const std::vector<int>& params() const { return params_; }
  int ambient_dim() const { return ambient_dim_; }
  Relation relation() const { return relation_; }
  int dim() const { return static_cast<int>(basis_.size()); }
  int h_dim() const { return h_dim_; }
  int m_dim() const { return dim() - h_dim_; }
  double kappa() const { return kappa_; }

  const std::vector<Matrix>& basis() const { return basis_; }
  const Matrix& basis(int i) const { return basis_[static_cast<std::size_t>(i)]; }
  const Matrix& h_basis(int i) const { return basis(i); }
  const Matrix& m_basis(int j) const { return basis(h_dim_ + j); }

  const Matrix& base_point() const { return base_point_; }
  ProjectionKind projection() const { return projection_; }
  int projected_dim() const;
  const std::vector<SubgroupFactor>& subgroup() const { return subgroup_; }

  /// ad(B_i) as a dim x dim matrix on full-basis coordinates.
  const RealMatrix& ad(int i) const { return ad_[static_cast<std::size_t>(i)]; }
  /// ad(X) for X given in full-basis coordinates.
  RealMatrix ad_of(const Vector& coords) const;

  double inner(const Matrix& a, const Matrix& b) const;
  /// Full-basis coordinates of X; `residual` receives ||X - sum_i c_i B_i||_F.
  Vector coordinates(const Matrix& x, double* residual = nullptr) const;
  Matrix matrix(const Vector& coords) const;

  Matrix inverse(const Matrix& g) const;
  double membership_residual(const Matrix& g) const;
  /// Defect of the algebra relation (X^T + X = 0, X^* + X = 0, X^T S + S X = 0).
  double algebra_residual(const Matrix& x) const;

  double membership_tolerance() const { return membership_tolerance_; }
  void set_membership_tolerance(double tol) { membership_tolerance_ = tol; }

 private:
  std::string name_;
  std::vector<int> params_;
  int ambient_dim_;
  Relation relation_;
  int h_dim_;
  std::vector<Matrix> basis_;
  double kappa_;
  Matrix base_point_;
  ProjectionKind projection_;
  std::vector<SubgroupFactor> subgroup_;
  std::vector<RealMatrix> ad_;
  double membership_tolerance_ = 1e-9;
};

/// Element of the Lie algebra carried both as coordinates and as a matrix.
class AlgebraVector {
 public:
  AlgebraVector() = default;
  AlgebraVector(const GroupSpec& spec, Vector coeffs);
  /// Throws closure_violation if X is not in the span of the basis.
  static AlgebraVector from_matrix(const GroupSpec& spec, const Matrix& x, double tol = 1e-12);
  static AlgebraVector zero(const GroupSpec& spec);
  static AlgebraVector basis_vector(const GroupSpec& spec, int i);
  /// Element of m from m-basis coordinates.
  static AlgebraVector from_m(const GroupSpec& spec, const Vector& m_coords);
  /// Element of h from h-basis coordinates.
  static AlgebraVector from_h(const GroupSpec& spec, const Vector& h_coords);

  const Vector& coeffs() const { return coeffs_; }
  const Matrix& matrix() const { return matrix_; }
  double norm() const { return coeffs_.norm(); }
  Vector h_part(const GroupSpec& spec) const { return coeffs_.head(spec.h_dim()); }
  Vector m_part(const GroupSpec& spec) const { return coeffs_.tail(spec.m_dim()); }

 private:
  Vector coeffs_;
  Matrix matrix_;
};

/// Group element together with the defect of its defining relation.
struct GroupElement {
  Matrix matrix;
  double residual = 0.0;

  /// Throws membership_violation when the residual exceeds the spec tolerance.
  static GroupElement checked(const GroupSpec& spec, Matrix m);
  static GroupElement identity(const GroupSpec& spec);
};

/// Catalog: su2-hopf, so_n1-sphere(n), so4-so3, stiefel(n, k), hyperbolic(n).
GroupSpec make_group(std::string_view name, std::span<const int> params = {});
std::vector<std::string> catalog_names();

GroupElement exp_matrix(const GroupSpec& spec, const AlgebraVector& x, double t);
AlgebraVector bracket(const GroupSpec& spec, const AlgebraVector& x, const AlgebraVector& y);
/// Ad(g) Y = g Y g^{-1}.
AlgebraVector Ad(const GroupSpec& spec, const GroupElement& g, const AlgebraVector& y);
/// Ad(g) restricted to m, as an m_dim x m_dim matrix on m-coordinates (g must lie in H).
RealMatrix Ad_on_m(const GroupSpec& spec, const Matrix& g);

/// Exact Haar sample of the isotropy subgroup H.
GroupElement haar_sample(const GroupSpec& spec, RandomStream& rng);
/// Haar sample of SO(m): Gaussian QR with sign normalisation, then a fixed
/// column swap when the determinant is negative.
RealMatrix haar_rotation(int m, RandomStream& rng);

/// Point of the model manifold G/H (flattened for frame-valued base points).
Vector project(const GroupSpec& spec, const Matrix& g);
inline Vector project(const GroupSpec& spec, const GroupElement& g) { return project(spec, g.matrix); }
/// Defect of the model-manifold constraint at a projected point.
double manifold_residual(const GroupSpec& spec, const Vector& x);

}  // namespace liehom
