#pragma once

// Finite-difference verification of every analytic Jacobian: stereo
// projection, ego and geocentric measurement models, and the motion-prior
// residuals.

#include <cstdint>
#include <string>
#include <vector>

namespace mvo {

struct JacobianCheck {
  std::string name;
  double max_relative_error = 0.0;
  int trials = 0;
  double seconds = 0.0;
};

/// Runs every suite on `trials` random states per suite. The reported error
/// is max |analytic - numeric| / max(1, max|numeric|) over all trials.
std::vector<JacobianCheck> run_jacobian_suite(int trials, std::uint64_t seed);

}  // namespace mvo
