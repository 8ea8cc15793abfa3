#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace liehom {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorCode {
  unknown_name,
  unsupported_dimension,
  membership_violation,
  closure_violation,
  input_not_in_h,
  nonsymmetric_operator,
  non_faithful_action,
  centring_violation,
  zero_eigenvalue_component,
  mixed_component_input,
  indefinite_coefficients,
  not_isotropic,
  geometric_check_failed,
  step_too_large,
  horizon_guard,
  insufficient_h_resolution,
  mismatched_manifold,
  budget_exceeded,
  config_invalid,
  invalid_argument,
};

std::string_view to_string(ErrorCode code);

/// Six significant digits, for error messages.
std::string fmt(double x);

/// Library-wide exception. The code mirrors the error names of the public contract.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace liehom
