#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>

namespace liehom {

namespace detail {

template <typename Real>
Real abs_real(const Real& x) {
  return std::abs(x);
}
template <typename Real>
Real abs_real(const std::complex<Real>& x) {
  return std::abs(x);
}
template <typename Real>
Real real_part(const Real& x) {
  return x;
}
template <typename Real>
Real real_part(const std::complex<Real>& x) {
  return x.real();
}

// sum_k s^k / (2k+1)!  and  sum_k s^k / (2k+2)!
template <typename Real>
void rank_two_coefficients(Real s, Real& f1, Real& f2) {
  if (std::abs(s) < Real(1e-3)) {
    Real term1 = 1, term2 = Real(0.5);
    f1 = term1;
    f2 = term2;
    for (int k = 1; k < 8; ++k) {
      term1 *= s / Real((2 * k) * (2 * k + 1));
      term2 *= s / Real((2 * k + 1) * (2 * k + 2));
      f1 += term1;
      f2 += term2;
    }
  } else if (s < 0) {
    const Real theta = std::sqrt(-s);
    f1 = std::sin(theta) / theta;
    f2 = (Real(1) - std::cos(theta)) / (theta * theta);
  } else {
    const Real r = std::sqrt(s);
    f1 = std::sinh(r) / r;
    f2 = (std::cosh(r) - Real(1)) / (r * r);
  }
}

template <typename Derived>
typename Derived::RealScalar operator_one_norm(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseAbs().colwise().sum().maxCoeff();
}

}  // namespace detail

/// Matrix exponential.
///
/// Generators with X^3 = sX for the scalar s = trace(X^2)/2 (every element of
/// su(2), so(3), and every single rotation or boost in larger matrix groups)
/// use the exact two-term closed form exp(X) = I + f1(s) X + f2(s) X^2.
/// Everything else goes through scaling and squaring with a truncated Taylor
/// series once ||X|| <= 0.5.
template <typename Derived>
typename Derived::PlainObject expm(const Eigen::MatrixBase<Derived>& x) {
  using Plain = typename Derived::PlainObject;
  using Scalar = typename Derived::Scalar;
  using Real = typename Derived::RealScalar;

  const Eigen::Index n = x.rows();
  const Plain identity = Plain::Identity(n, n);
  const Real norm = detail::operator_one_norm(x);
  if (norm == Real(0)) return identity;

  const Plain x2 = x * x;
  const Scalar s_complex = x2.trace() / Real(2);
  const Real s = detail::real_part(s_complex);
  if (detail::abs_real(s_complex - Scalar(s)) <= Real(1e-14) * (Real(1) + std::abs(s))) {
    const Plain x3 = x2 * x;
    const Real defect = detail::operator_one_norm(x3 - Scalar(s) * x);
    if (defect <= Real(1e-13) * (norm * norm * norm + Real(1e-300))) {
      Real f1, f2;
      detail::rank_two_coefficients(s, f1, f2);
      return identity + Scalar(f1) * x + Scalar(f2) * x2;
    }
  }

  int squarings = 0;
  Real scaled_norm = norm;
  while (scaled_norm > Real(0.5)) {
    scaled_norm /= Real(2);
    ++squarings;
  }
  const Plain y = x / Scalar(std::ldexp(Real(1), squarings));
  Plain result = identity;
  Plain term = identity;
  for (int k = 1; k <= 30; ++k) {
    term = (term * y) / Scalar(Real(k));
    result += term;
    if (detail::operator_one_norm(term) < Real(1e-18)) break;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

/// Polar projection onto the unitary matrices: U from X = U P.
/// Used as the optional drift guard for very long runs.
template <typename Derived>
typename Derived::PlainObject polar_unitary(const Eigen::MatrixBase<Derived>& x) {
  using Plain = typename Derived::PlainObject;
  Eigen::JacobiSVD<Plain> svd(x.eval(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

}  // namespace liehom
