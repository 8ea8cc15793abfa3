#include "liehom/reductive.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace liehom {

namespace {

constexpr double kInHTol = 1e-12;
constexpr double kSymmetryTol = 1e-12;
constexpr double kFaithfulTol = 1e-12;

RealMatrix restrict_to_m(const GroupSpec& spec, const RealMatrix& full) {
  return full.block(spec.h_dim(), spec.h_dim(), spec.m_dim(), spec.m_dim());
}

void require_in_h(const GroupSpec& spec, const AlgebraVector& x) {
  if (x.coeffs().size() != spec.dim())
    throw Error(ErrorCode::invalid_argument, "generator has the wrong coordinate length");
  if (spec.m_dim() > 0 && x.m_part(spec).cwiseAbs().maxCoeff() > kInHTol)
    throw Error(ErrorCode::input_not_in_h, "generator has a component outside h");
}

}  // namespace

std::vector<AlgebraVector> h_basis_vectors(const GroupSpec& spec) {
  std::vector<AlgebraVector> out;
  out.reserve(static_cast<std::size_t>(spec.h_dim()));
  for (int i = 0; i < spec.h_dim(); ++i) out.push_back(AlgebraVector::basis_vector(spec, i));
  return out;
}

std::vector<AlgebraVector> h_generators(const GroupSpec& spec, std::span<const int> indices) {
  std::vector<AlgebraVector> out;
  for (int i : indices) {
    if (i < 0 || i >= spec.h_dim())
      throw Error(ErrorCode::input_not_in_h, "generator index " + std::to_string(i) + " is not an h-basis index");
    out.push_back(AlgebraVector::basis_vector(spec, i));
  }
  return out;
}

CasimirOperator casimir(const GroupSpec& spec, std::span<const AlgebraVector> generators,
                        const std::optional<AlgebraVector>& drift) {
  CasimirOperator c;
  RealMatrix full = RealMatrix::Zero(spec.dim(), spec.dim());
  for (const auto& a : generators) {
    require_in_h(spec, a);
    const RealMatrix ad = spec.ad_of(a.coeffs());
    full += 0.5 * ad * ad;
    c.generators.push_back(a.coeffs());
  }
  if (drift && drift->norm() > 0.0) {
    require_in_h(spec, *drift);
    full += spec.ad_of(drift->coeffs());
    c.includes_drift = true;
  }
  c.matrix = restrict_to_m(spec, full);
  return c;
}

std::vector<IsotypicComponent> isotypic_decompose(const CasimirOperator& c, double cluster_tol) {
  const RealMatrix& m = c.matrix;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale)
    throw Error(ErrorCode::nonsymmetric_operator,
                "the operator restricted to m is not symmetric (drift present?)");

  Eigen::SelfAdjointEigenSolver<RealMatrix> solver(-0.5 * (m + m.transpose()));
  const Vector& values = solver.eigenvalues();
  const RealMatrix& vectors = solver.eigenvectors();
  const double spread = std::max(1.0, values.cwiseAbs().maxCoeff());
  const double tol = cluster_tol * spread;

  std::vector<IsotypicComponent> out;
  Eigen::Index start = 0;
  const Eigen::Index n = values.size();
  while (start < n) {
    Eigen::Index end = start + 1;
    while (end < n && values[end] - values[end - 1] <= tol) ++end;
    IsotypicComponent comp;
    comp.lambda = values.segment(start, end - start).mean();
    comp.basis = vectors.middleCols(start, end - start);
    if (std::abs(comp.lambda) <= tol) {
      comp.lambda = 0.0;
      comp.is_fixed_space = true;
    }
    out.push_back(std::move(comp));
    start = end;
  }
  return out;
}

RealMatrix bilinear_form(const GroupSpec& spec, std::span<const AlgebraVector> h_onb,
                         const IsotypicComponent& component) {
  const auto p = static_cast<Eigen::Index>(h_onb.size());
  std::vector<RealMatrix> restricted;
  restricted.reserve(h_onb.size());
  for (const auto& a : h_onb) {
    require_in_h(spec, a);
    const RealMatrix ad_m = restrict_to_m(spec, spec.ad_of(a.coeffs()));
    restricted.push_back(component.basis.transpose() * ad_m * component.basis);
  }
  RealMatrix b(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j)
      b(i, j) = (restricted[static_cast<std::size_t>(i)] * restricted[static_cast<std::size_t>(j)]).trace();
  return b;
}

double lambda_via_bilinear_form(const GroupSpec& spec, std::span<const AlgebraVector> h_onb,
                                const IsotypicComponent& component) {
  if (h_onb.empty()) throw Error(ErrorCode::invalid_argument, "empty h-basis");
  const RealMatrix b = bilinear_form(spec, h_onb, component);
  Eigen::SelfAdjointEigenSolver<RealMatrix> solver(b);
  if (solver.eigenvalues().cwiseAbs().minCoeff() <= kFaithfulTol)
    throw Error(ErrorCode::non_faithful_action, "the bilinear form is degenerate on this component");
  const double dim_h = static_cast<double>(h_onb.size());
  return -b(0, 0) * dim_h / (2.0 * component.dim());
}

int symmetric_commutant_dim(const GroupSpec& spec, const IsotypicComponent& component) {
  const int d = component.dim();
  if (d == 0) return 0;
  // Unknowns: upper triangle of a symmetric S. Equations: ad_l(Z) S - S ad_l(Z) = 0.
  std::vector<std::pair<int, int>> slots;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) slots.emplace_back(i, j);
  const auto unknowns = static_cast<Eigen::Index>(slots.size());
  RealMatrix system(static_cast<Eigen::Index>(spec.h_dim()) * d * d, unknowns);
  system.setZero();
  for (int z = 0; z < spec.h_dim(); ++z) {
    const RealMatrix ad_l =
        component.basis.transpose() * restrict_to_m(spec, spec.ad(z)) * component.basis;
    for (Eigen::Index u = 0; u < unknowns; ++u) {
      RealMatrix s = RealMatrix::Zero(d, d);
      s(slots[static_cast<std::size_t>(u)].first, slots[static_cast<std::size_t>(u)].second) = 1.0;
      s(slots[static_cast<std::size_t>(u)].second, slots[static_cast<std::size_t>(u)].first) = 1.0;
      const RealMatrix c = ad_l * s - s * ad_l;
      system.block(static_cast<Eigen::Index>(z) * d * d, u, d * d, 1) =
          Eigen::Map<const Vector>(c.data(), d * d);
    }
  }
  if (spec.h_dim() == 0) return static_cast<int>(unknowns);
  Eigen::JacobiSVD<RealMatrix> svd(system);
  const Vector& sv = svd.singularValues();
  const double cutoff = 1e-10 * std::max(1.0, sv.size() > 0 ? sv[0] : 0.0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cutoff) ++rank;
  return static_cast<int>(unknowns) - rank;
}

RealMatrix fixed_space_basis(const GroupSpec& spec) {
  const auto gens = h_basis_vectors(spec);
  for (const auto& comp : isotypic_decompose(casimir(spec, gens)))
    if (comp.is_fixed_space) return comp.basis;
  return RealMatrix(spec.m_dim(), 0);
}

MeanEstimate mean_Ad(const GroupSpec& spec, const AlgebraVector& y0, const McOptions& options) {
  const Vector y = y0.m_part(spec);
  if (spec.h_dim() > 0 && y0.h_part(spec).cwiseAbs().maxCoeff() > kInHTol)
    throw Error(ErrorCode::invalid_argument, "Y0 must lie in m");
  const RealMatrix fixed = fixed_space_basis(spec);
  const Vector fixed_part = fixed * (fixed.transpose() * y);
  const Vector moving = y - fixed_part;

  MeanEstimate out;
  if (moving.norm() <= 1e-12 * std::max(1.0, y.norm())) {
    out.mean = y;
    out.se = Vector::Zero(y.size());
    out.exact = true;
    return out;
  }
  const SampleMoments moments =
      haar_average(spec, spec.m_dim(), options, [&](const GroupElement& h, Vector& value) {
        value = Ad_on_m(spec, h.matrix) * moving;
      });
  out.mean = fixed_part + moments.mean;
  out.se = moments.se;
  return out;
}

}  // namespace liehom
