#pragma once

#include "liehom/lie/group.hpp"
#include "liehom/montecarlo.hpp"

#include <optional>
#include <span>
#include <vector>

namespace liehom {

/// Algebraic shadow of L0 = 1/2 sum_k A_k^2 + A0 on m:
/// C = 1/2 sum_k ad(A_k)^2 + ad(A0), restricted to m (m-basis coordinates).
struct CasimirOperator {
  RealMatrix matrix;
  std::vector<Vector> generators;  // full-basis coordinates of the A_k
  bool includes_drift = false;
};

/// Eigenspace m_l of -C with eigenvalue lambda >= 0. Columns of `basis` are
/// orthonormal m-coordinate vectors.
struct IsotypicComponent {
  double lambda = 0.0;
  RealMatrix basis;
  bool is_fixed_space = false;

  int dim() const { return static_cast<int>(basis.cols()); }
};

/// Orthonormal basis of h as algebra vectors.
std::vector<AlgebraVector> h_basis_vectors(const GroupSpec& spec);
/// Selects h-basis elements by index; throws input_not_in_h for bad indices.
std::vector<AlgebraVector> h_generators(const GroupSpec& spec, std::span<const int> indices);

CasimirOperator casimir(const GroupSpec& spec, std::span<const AlgebraVector> generators,
                        const std::optional<AlgebraVector>& drift = std::nullopt);

/// Symmetric eigendecomposition of -C, clustered with relative tolerance
/// `cluster_tol`, sorted by lambda ascending. The lambda = 0 cluster is m0.
std::vector<IsotypicComponent> isotypic_decompose(const CasimirOperator& c,
                                                  double cluster_tol = 1e-8);

/// B(X, Y) = trace of ad(X) ad(Y) on the component, for X, Y in the given h-basis.
RealMatrix bilinear_form(const GroupSpec& spec, std::span<const AlgebraVector> h_onb,
                         const IsotypicComponent& component);

/// lambda_l = -B(A_1, A_1) dim(h) / (2 dim(m_l)) for an orthonormal basis {A_k} of h.
double lambda_via_bilinear_form(const GroupSpec& spec, std::span<const AlgebraVector> h_onb,
                                const IsotypicComponent& component);

/// Dimension of the space of symmetric operators on the component that commute
/// with ad(Z) for every Z in h. Equals 1 exactly when the second moment of
/// every Ad_H orbit in the component is a multiple of the identity; larger
/// values flag a sum of equivalent representations.
int symmetric_commutant_dim(const GroupSpec& spec, const IsotypicComponent& component);

/// Orthonormal basis (m-coordinates) of the Ad_H-fixed vectors m0.
RealMatrix fixed_space_basis(const GroupSpec& spec);

struct MeanEstimate {
  Vector mean;  // m-coordinates
  Vector se;    // per-coordinate standard errors (zero where exact)
  bool exact = false;
};

/// Monte Carlo estimate of the centring integral of Ad(h) Y0 over Haar(H).
/// The m0 part of Y0 is fixed by Ad_H and is returned exactly.
MeanEstimate mean_Ad(const GroupSpec& spec, const AlgebraVector& y0, const McOptions& options);

}  // namespace liehom
