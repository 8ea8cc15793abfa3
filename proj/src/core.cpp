#include "liehom/core.hpp"
#include "liehom/parallel.hpp"

#include <cstdio>
#include <thread>

namespace liehom {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::unknown_name: return "unknown-name";
    case ErrorCode::unsupported_dimension: return "unsupported-dimension";
    case ErrorCode::membership_violation: return "membership-violation";
    case ErrorCode::closure_violation: return "closure-violation";
    case ErrorCode::input_not_in_h: return "input-not-in-h";
    case ErrorCode::nonsymmetric_operator: return "nonsymmetric-operator";
    case ErrorCode::non_faithful_action: return "non-faithful-action";
    case ErrorCode::centring_violation: return "centring-violation";
    case ErrorCode::zero_eigenvalue_component: return "zero-eigenvalue-component";
    case ErrorCode::mixed_component_input: return "mixed-component-input";
    case ErrorCode::indefinite_coefficients: return "indefinite-coefficients";
    case ErrorCode::not_isotropic: return "not-isotropic";
    case ErrorCode::geometric_check_failed: return "geometric-check-failed";
    case ErrorCode::step_too_large: return "step-too-large";
    case ErrorCode::horizon_guard: return "horizon-guard";
    case ErrorCode::insufficient_h_resolution: return "insufficient-h-resolution";
    case ErrorCode::mismatched_manifold: return "mismatched-manifold";
    case ErrorCode::budget_exceeded: return "budget-exceeded";
    case ErrorCode::config_invalid: return "config-invalid";
    case ErrorCode::invalid_argument: return "invalid-argument";
  }
  return "unknown";
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace liehom
