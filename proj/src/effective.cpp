#include "liehom/effective.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace liehom {

namespace {

constexpr double kExactTol = 1e-12;
constexpr double kGeometricTol = 1e-11;
constexpr double kSigma = 4.0;

RealMatrix m_block(const GroupSpec& spec, int i) {
  return spec.ad(i).bottomRightCorner(spec.m_dim(), spec.m_dim());
}

RealMatrix concatenate(const std::vector<IsotypicComponent>& components, Eigen::Index rows) {
  Eigen::Index cols = 0;
  for (const auto& c : components) cols += c.dim();
  RealMatrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& c : components) {
    out.middleCols(at, c.dim()) = c.basis;
    at += c.dim();
  }
  return out;
}

}  // namespace

std::string_view to_string(CoeffRoute route) {
  switch (route) {
    case CoeffRoute::closed_form: return "closed-form";
    case CoeffRoute::spectral_mc: return "spectral-mc";
    case CoeffRoute::generator_subset: return "generator-subset";
  }
  return "unknown";
}

std::string_view to_string(Classification c) {
  switch (c) {
    case Classification::isotropic: return "isotropic";
    case Classification::diagonal: return "diagonal";
    case Classification::general: return "general";
  }
  return "unknown";
}

double alpha(const GroupSpec& spec, const AlgebraVector& y0, const AlgebraVector& yj,
             const GroupElement& h) {
  return spec.inner(Ad(spec, h, y0).matrix(), yj.matrix());
}

SpectralData spectral_data(const std::vector<IsotypicComponent>& components) {
  SpectralData out;
  if (components.empty()) return out;
  out.eigenvectors = concatenate(components, components.front().basis.rows());
  out.lambdas.resize(out.eigenvectors.cols());
  Eigen::Index at = 0;
  for (const auto& c : components) {
    out.lambdas.segment(at, c.dim()).setConstant(c.lambda);
    at += c.dim();
  }
  return out;
}

std::vector<IsotypicComponent> carrying_components(const GroupSpec& spec, const Vector& y0_m,
                                                   double tol) {
  const auto gens = h_basis_vectors(spec);
  std::vector<IsotypicComponent> out;
  for (auto& comp : isotypic_decompose(casimir(spec, gens)))
    if ((comp.basis.transpose() * y0_m).norm() > tol * std::max(1.0, y0_m.norm()))
      out.push_back(std::move(comp));
  return out;
}

EffectiveGenerator coeffs_spectral(const GroupSpec& spec, const Vector& y0_m,
                                   const SpectralData& spectrum, const RealMatrix& target_basis,
                                   const McOptions& options, CoeffRoute route) {
  if (y0_m.size() != spec.m_dim() || target_basis.rows() != spec.m_dim() ||
      spectrum.eigenvectors.rows() != spec.m_dim() ||
      spectrum.eigenvectors.cols() != spectrum.lambdas.size())
    throw Error(ErrorCode::invalid_argument, "coefficient inputs have inconsistent shapes");

  const Vector c = spectrum.eigenvectors.transpose() * y0_m;
  if ((spectrum.eigenvectors * c - y0_m).norm() > kExactTol * std::max(1.0, y0_m.norm()))
    throw Error(ErrorCode::invalid_argument, "Y0 is not in the span of the eigenvectors");

  Vector w = Vector::Zero(spec.m_dim());
  double trace_target = 0.0;
  for (Eigen::Index m = 0; m < c.size(); ++m) {
    if (std::abs(c[m]) <= kExactTol * std::max(1.0, y0_m.norm())) continue;
    if (spectrum.lambdas[m] <= kExactTol)
      throw Error(ErrorCode::zero_eigenvalue_component,
                  "Y0 has mass on an eigenvector with zero eigenvalue");
    w += (c[m] / spectrum.lambdas[m]) * spectrum.eigenvectors.col(m);
    trace_target += c[m] * c[m] / spectrum.lambdas[m];
  }

  const Eigen::Index d = target_basis.cols();
  const Eigen::Index md = spec.m_dim();
  const SampleMoments moments =
      haar_average(spec, d * d + md, options, [&](const GroupElement& h, Vector& value) {
        const RealMatrix r = Ad_on_m(spec, h.matrix);
        const Vector moved = r * y0_m;
        const Vector u = target_basis.transpose() * moved;
        const Vector v = target_basis.transpose() * (r * w);
        for (Eigen::Index j = 0; j < d; ++j) value.segment(j * d, d) = u * v[j];
        value.tail(md) = moved;
      });

  const Vector mean_ad = moments.mean.tail(md);
  const double centring_se = moments.se.tail(md).norm();
  if (mean_ad.norm() > std::max(kSigma * centring_se, kExactTol))
    throw Error(ErrorCode::centring_violation,
                "Haar mean of Ad(h)Y0 has norm " + fmt(mean_ad.norm()) +
                    " against 4 SE = " + fmt(kSigma * centring_se));

  EffectiveGenerator gen;
  gen.basis = target_basis;
  gen.a = Eigen::Map<const RealMatrix>(moments.mean.data(), d, d);
  gen.se = Eigen::Map<const RealMatrix>(moments.se.data(), d, d);
  gen.route = route;
  gen.trace_target = trace_target;
  classify(gen);
  return gen;
}

EffectiveGenerator coeffs_spectral(const GroupSpec& spec, const AlgebraVector& y0,
                                   std::span<const AlgebraVector> generators,
                                   const McOptions& options) {
  if (y0.h_part(spec).size() > 0 && y0.h_part(spec).cwiseAbs().maxCoeff() > kExactTol)
    throw Error(ErrorCode::invalid_argument, "Y0 must lie in m");
  const Vector y = y0.m_part(spec);
  const CasimirOperator c = casimir(spec, generators);
  const SpectralData spectrum = spectral_data(isotypic_decompose(c));

  const auto full_gens = h_basis_vectors(spec);
  const CasimirOperator full = casimir(spec, full_gens);
  const bool subset = (c.matrix - full.matrix).cwiseAbs().maxCoeff() > kExactTol;

  auto targets = carrying_components(spec, y);
  for (const auto& t : targets)
    if (t.is_fixed_space)
      throw Error(ErrorCode::zero_eigenvalue_component, "Y0 has mass on the fixed space m0");
  EffectiveGenerator gen =
      coeffs_spectral(spec, y, spectrum, concatenate(targets, spec.m_dim()), options,
                      subset ? CoeffRoute::generator_subset : CoeffRoute::spectral_mc);
  gen.components = std::move(targets);
  return gen;
}

EffectiveGenerator coeffs_closed_form(const GroupSpec& spec, const AlgebraVector& y0) {
  if (y0.h_part(spec).size() > 0 && y0.h_part(spec).cwiseAbs().maxCoeff() > kExactTol)
    throw Error(ErrorCode::invalid_argument, "Y0 must lie in m");
  const Vector y = y0.m_part(spec);
  auto targets = carrying_components(spec, y);
  if (targets.size() != 1)
    throw Error(ErrorCode::mixed_component_input,
                "Y0 spreads over " + std::to_string(targets.size()) + " components");
  const IsotypicComponent& comp = targets.front();
  if (comp.is_fixed_space)
    throw Error(ErrorCode::zero_eigenvalue_component, "Y0 lies in the fixed space m0");
  if (symmetric_commutant_dim(spec, comp) != 1)
    throw Error(ErrorCode::mixed_component_input,
                "the component is a sum of equivalent summands; Y0 may couple them");

  const int d = comp.dim();
  const double c = y.squaredNorm() / (d * comp.lambda);
  EffectiveGenerator gen;
  gen.basis = comp.basis;
  gen.a = c * RealMatrix::Identity(d, d);
  gen.se = RealMatrix::Zero(d, d);
  gen.route = CoeffRoute::closed_form;
  gen.trace_target = y.squaredNorm() / comp.lambda;
  gen.components = std::move(targets);
  classify(gen);
  return gen;
}

void classify(EffectiveGenerator& gen) {
  const Eigen::Index d = gen.a.rows();
  const double scale = std::max(1.0, gen.a.cwiseAbs().maxCoeff());
  bool diagonal = true;
  bool isotropic = true;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (i == j) continue;
      const double tol = gen.exact() ? kExactTol * scale : kSigma * gen.se(i, j);
      if (std::abs(gen.a(i, j)) > tol) diagonal = false;
    }
    const double tol_diag =
        gen.exact() ? kExactTol * scale : kSigma * std::hypot(gen.se(i, i), gen.se(0, 0));
    if (std::abs(gen.a(i, i) - gen.a(0, 0)) > tol_diag) isotropic = false;
  }
  if (diagonal && isotropic) {
    gen.classification = Classification::isotropic;
    gen.isotropic_c = d > 0 ? gen.a.diagonal().mean() : 0.0;
  } else {
    gen.classification = diagonal ? Classification::diagonal : Classification::general;
    gen.isotropic_c = 0.0;
  }
}

EffectiveSde build_effective_sde(const EffectiveGenerator& gen, const GroupSpec& spec) {
  const RealMatrix sym = 0.5 * (gen.a + gen.a.transpose());
  Eigen::SelfAdjointEigenSolver<RealMatrix> solver(sym);
  const Vector& mu = solver.eigenvalues();
  const double tol = gen.exact() || gen.se.size() == 0
                         ? kExactTol * std::max(1.0, sym.cwiseAbs().maxCoeff())
                         : kSigma * gen.se.maxCoeff();
  EffectiveSde out;
  if (mu.size() > 0 && mu.minCoeff() < 0.0) {
    if (mu.minCoeff() < -tol)
      throw Error(ErrorCode::indefinite_coefficients,
                  "coefficient matrix has eigenvalue " + fmt(mu.minCoeff()));
    out.clipped = mu.minCoeff();
  }
  const Vector root_mu = (2.0 * mu.cwiseMax(0.0)).cwiseSqrt();
  out.root = solver.eigenvectors() * root_mu.asDiagonal() * solver.eigenvectors().transpose();
  for (Eigen::Index k = 0; k < out.root.cols(); ++k)
    out.fields.push_back(AlgebraVector::from_m(spec, gen.basis * out.root.col(k)));
  return out;
}

ProjectionValidity check_projection_validity(const GroupSpec& spec,
                                             const IsotypicComponent& component) {
  ProjectionValidity v;
  const RealMatrix& b = component.basis;
  for (int z = 0; z < spec.dim(); ++z)
    v.trace_ad_defect =
        std::max(v.trace_ad_defect, std::abs((b.transpose() * m_block(spec, z) * b).trace()));

  for (int x = 0; x < spec.m_dim(); ++x) {
    const RealMatrix adx = m_block(spec, spec.h_dim() + x);
    v.natural_defect = std::max(v.natural_defect, (adx + adx.transpose()).cwiseAbs().maxCoeff());
  }

  // 2 <U(X, Y), Z> = <X, [Z, Y]_m> + <[Z, X]_m, Y>, summed over Y = X = b_i.
  Vector u_sum = Vector::Zero(spec.m_dim());
  for (int z = 0; z < spec.m_dim(); ++z) {
    const RealMatrix adz = m_block(spec, spec.h_dim() + z);
    for (Eigen::Index i = 0; i < b.cols(); ++i) {
      const Vector bi = b.col(i);
      u_sum[z] += 0.5 * (bi.dot(adz * bi) + (adz * bi).dot(bi));
    }
  }
  v.u_trace_defect = u_sum.cwiseAbs().maxCoeff();

  v.trace_ad_zero = v.trace_ad_defect <= kGeometricTol;
  v.naturally_reductive = v.natural_defect <= kGeometricTol;
  v.u_trace_zero = v.u_trace_defect <= kGeometricTol;
  return v;
}

double projected_scale(const EffectiveGenerator& gen, const GroupSpec& spec) {
  if (gen.classification != Classification::isotropic)
    throw Error(ErrorCode::not_isotropic, "projected scale needs isotropic coefficients");
  for (const auto& comp : gen.components)
    if (!check_projection_validity(spec, comp).all())
      throw Error(ErrorCode::geometric_check_failed,
                  "projection validity checks fail on a carrying component");
  return 2.0 * gen.isotropic_c;
}

PeterWeylResult peter_weyl_check(const GroupSpec& spec, const IsotypicComponent& component,
                                 const McOptions& options) {
  const Eigen::Index d = component.dim();
  const Eigen::Index d4 = d * d * d * d;
  const RealMatrix& b = component.basis;
  const SampleMoments moments =
      haar_average(spec, d4, options, [&](const GroupElement& h, Vector& value) {
        const RealMatrix r = b.transpose() * Ad_on_m(spec, h.matrix) * b;
        for (Eigen::Index i = 0; i < d; ++i)
          for (Eigen::Index j = 0; j < d; ++j)
            for (Eigen::Index k = 0; k < d; ++k)
              for (Eigen::Index l = 0; l < d; ++l)
                value[((i * d + j) * d + k) * d + l] = r(i, k) * r(j, l);
      });
  PeterWeylResult out;
  out.samples = moments.count;
  out.estimates.assign(moments.mean.data(), moments.mean.data() + d4);
  out.se.assign(moments.se.data(), moments.se.data() + d4);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index k = 0; k < d; ++k)
        for (Eigen::Index l = 0; l < d; ++l) {
          const double expected = (i == j && k == l) ? 1.0 / static_cast<double>(d) : 0.0;
          const double dev = std::abs(moments.mean[((i * d + j) * d + k) * d + l] - expected);
          out.max_deviation = std::max(out.max_deviation, dev);
        }
  return out;
}

}  // namespace liehom
