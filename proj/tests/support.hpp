#pragma once

#include "liehom/lie/exp.hpp"
#include "liehom/lie/group.hpp"
#include "liehom/montecarlo.hpp"
#include "liehom/sim.hpp"

#include <Eigen/QR>

#include <span>
#include <vector>

namespace liehom::testing {

inline GroupSpec group(std::string_view name, std::initializer_list<int> params = {}) {
  const std::vector<int> p(params);
  return make_group(name, p);
}

/// Exact mean of the Hopf projection of the full multiscale system at time tau.
///
/// For f(g) = Ad(g) Z the generator acts linearly: E Ad(g_tau) Z = Ad(g0) exp(tau M) Z
/// with M = 1/2 sum_k ad(A_k)^2 / eps + ad(A0 / eps + Y0). The Hopf projection is a
/// fixed linear image of Ad(g) X1, recovered here by least squares on sample points.
class HopfMeanOracle {
 public:
  explicit HopfMeanOracle(const GroupSpec& spec) : spec_(spec) {
    RandomStream rng(0x0dd, 0, 0, StreamPurpose::test);
    const int samples = 12;
    RealMatrix lhs(3 * samples, 9);
    Vector rhs(3 * samples);
    lhs.setZero();
    for (int s = 0; s < samples; ++s) {
      Vector c(3);
      for (int i = 0; i < 3; ++i) c[i] = rng.normal();
      const GroupElement g = exp_matrix(spec, AlgebraVector(spec, c), 1.0);
      const Vector ad = Ad(spec, g, AlgebraVector::basis_vector(spec, 0)).coeffs();
      const Vector x = project(spec, g);
      for (int r = 0; r < 3; ++r) {
        lhs.block(3 * s + r, 3 * r, 1, 3) = ad.transpose();
        rhs[3 * s + r] = x[r];
      }
    }
    const Vector p = lhs.colPivHouseholderQr().solve(rhs);
    map_ = Eigen::Map<const RealMatrix>(p.data(), 3, 3).transpose();
    fit_residual_ = (lhs * p - rhs).norm();
  }

  double fit_residual() const { return fit_residual_; }

  Vector mean(const MultiscaleSystem& sys, double tau) const {
    RealMatrix m = spec_.ad_of(sys.a0.coeffs() / sys.epsilon + sys.y0.coeffs());
    for (const auto& a : sys.a) {
      const RealMatrix ad = spec_.ad_of(a.coeffs());
      m += 0.5 * ad * ad / sys.epsilon;
    }
    const RealMatrix flow = expm(RealMatrix(tau * m));
    const Vector z = Ad_full(sys.g0) * flow.col(0);
    return map_ * z;
  }

 private:
  RealMatrix Ad_full(const GroupElement& g) const {
    RealMatrix r(spec_.dim(), spec_.dim());
    for (int j = 0; j < spec_.dim(); ++j) r.col(j) = Ad(spec_, g, AlgebraVector::basis_vector(spec_, j)).coeffs();
    return r;
  }

  const GroupSpec& spec_;
  RealMatrix map_;
  double fit_residual_ = 0.0;
};

/// Mean and standard error of each coordinate of the projected points at time slot `slot`.
inline SampleMoments batch_moments(const TrajectoryBatch& batch, std::size_t slot) {
  const auto dim = batch.points.front()[slot].size();
  Accumulator acc(dim);
  for (const auto& path : batch.points) acc.add(path[slot]);
  return SampleMoments{acc.mean, acc.standard_error(), acc.count};
}

}  // namespace liehom::testing
