#pragma once

#include "liehom/reductive.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace liehom {

enum class CoeffRoute { closed_form, spectral_mc, generator_subset };
enum class Classification { isotropic, diagonal, general };

std::string_view to_string(CoeffRoute route);
std::string_view to_string(Classification c);

/// Coefficients a_ij of the limiting generator sum_ij a_ij L_{Y_i} L_{Y_j}.
struct EffectiveGenerator {
  RealMatrix basis;                   // target basis {Y_i}, m-coordinates, one column each
  std::vector<IsotypicComponent> components;  // full-h components spanned by `basis`
  RealMatrix a;                       // as computed; symmetric up to noise except for injected spectra
  RealMatrix se;                      // per-entry standard errors (zero for closed form)
  CoeffRoute route = CoeffRoute::closed_form;
  Classification classification = Classification::general;
  double isotropic_c = 0.0;           // a = c Id when classification is isotropic
  double trace_target = 0.0;          // sum_m c_m^2 / lambda_m
  std::optional<double> projected_scale;

  int dim() const { return static_cast<int>(a.rows()); }
  bool exact() const { return route == CoeffRoute::closed_form; }
};

/// alpha(Y0, Y_j)(h) = <Ad(h) Y0, Y_j>.
double alpha(const GroupSpec& spec, const AlgebraVector& y0, const AlgebraVector& yj,
             const GroupElement& h);

/// Eigenvectors (m-coordinates, columns) and eigenvalues of -C for the driving fields.
struct SpectralData {
  RealMatrix eigenvectors;
  Vector lambdas;
};

SpectralData spectral_data(const std::vector<IsotypicComponent>& components);

/// Components of the full-h decomposition in which Y0 (m-coordinates) has mass.
std::vector<IsotypicComponent> carrying_components(const GroupSpec& spec, const Vector& y0_m,
                                                   double tol = 1e-12);

/// Monte Carlo route with an explicit spectrum:
///   a_ij = sum_m (c_m / lambda_m) E_h[<Ad(h) Y0, Y_i> <Ad(h) Y_m, Y_j>].
/// Throws zero_eigenvalue_component if Y0 has mass on a lambda = 0 eigenvector and
/// centring_violation if the Haar mean of Ad(h) Y0 exceeds 4 SE.
EffectiveGenerator coeffs_spectral(const GroupSpec& spec, const Vector& y0_m,
                                   const SpectralData& spectrum, const RealMatrix& target_basis,
                                   const McOptions& options,
                                   CoeffRoute route = CoeffRoute::spectral_mc);

/// Monte Carlo route for driving fields {A_k}: spectrum from their Casimir,
/// target basis from the components of the full-h Casimir carrying Y0.
EffectiveGenerator coeffs_spectral(const GroupSpec& spec, const AlgebraVector& y0,
                                   std::span<const AlgebraVector> generators,
                                   const McOptions& options);

/// Exact route for the full orthonormal h-basis and Y0 inside one component:
/// a = |Y0|^2 / (d lambda) Id_d. Throws mixed_component_input when Y0 spreads
/// over several components or the component is a sum of equivalent summands,
/// and zero_eigenvalue_component when Y0 lies in m0.
EffectiveGenerator coeffs_closed_form(const GroupSpec& spec, const AlgebraVector& y0);

/// Sets classification and isotropic_c. Tolerance: 1e-12 for exact input,
/// 4 combined SE otherwise.
void classify(EffectiveGenerator& gen);

struct EffectiveSde {
  std::vector<AlgebraVector> fields;  // V_k
  RealMatrix root;                    // sqrt(2 a_sym) in the target basis
  double clipped = 0.0;               // most negative eigenvalue set to zero
};

/// V = Y sqrt(2 a_sym) with a_sym the symmetric part of a. Eigenvalues below
/// zero but within 4 SE (1e-12 for exact input) are clipped.
EffectiveSde build_effective_sde(const EffectiveGenerator& gen, const GroupSpec& spec);

struct ProjectionValidity {
  bool trace_ad_zero = false;
  bool naturally_reductive = false;
  bool u_trace_zero = false;
  double trace_ad_defect = 0.0;
  double natural_defect = 0.0;
  double u_trace_defect = 0.0;

  bool all() const { return trace_ad_zero && naturally_reductive && u_trace_zero; }
};

ProjectionValidity check_projection_validity(const GroupSpec& spec,
                                             const IsotypicComponent& component);

/// Scale of the projected Brownian motion (generator 1/2 scale Delta): 2c.
/// Throws not_isotropic or geometric_check_failed.
double projected_scale(const EffectiveGenerator& gen, const GroupSpec& spec);

struct PeterWeylResult {
  std::vector<double> estimates;  // index ((i d + j) d + k) d + l
  std::vector<double> se;
  double max_deviation = 0.0;
  std::size_t samples = 0;
};

/// Haar estimates of E[<Y_i, Ad(h) Y_k> <Y_j, Ad(h) Y_l>] against delta_ij delta_kl / d.
PeterWeylResult peter_weyl_check(const GroupSpec& spec, const IsotypicComponent& component,
                                 const McOptions& options);

}  // namespace liehom
