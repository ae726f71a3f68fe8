// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qtbp::check {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double wall_s = 0.0;
};

// 100 random (RBM, evidence, query) instances with V=8, H=1, weights in
// [-1,1], T=1, N=10 against the enumeration oracle; bound 1e-6.
SuiteResult tree_exactness_suite(std::uint64_t seed);

// Hand-derived gradients of all four model kinds against central finite
// differences (h = 1e-5), relative error bound 1e-4 over every parameter
// including tau. fault_scale != 0 perturbs the analytic gradients and must
// make the suite fail (negative control).
SuiteResult gradient_suite(std::uint64_t seed, double fault_scale = 0.0);

// 50 random DBMs with a zero top layer against the plain RBM, 1e-15.
SuiteResult dbm_reduction_suite(std::uint64_t seed);

// Transfer-function odd symmetry, saturation, monotonicity and the T -> 0
// limit, 10,000 random cases each.
SuiteResult kernel_property_suite(std::uint64_t seed);

// GMRF additive-constant invariance and belief normalization over random
// instances, at least 10,000 checked values.
SuiteResult gmrf_invariance_suite(std::uint64_t seed);

// 3x3 grid, K=3: loopy beliefs within average total variation 0.05 of
// enumeration (approximate by construction).
SuiteResult loopy_sanity_suite(std::uint64_t seed);

// GRBM closed forms at W=0, depth independence, and a finiteness fuzz.
SuiteResult grbm_suite(std::uint64_t seed);

// Enumeration self-checks: normalization, closed forms, conditioning
// consistency, sampling frequencies.
SuiteResult oracle_suite(std::uint64_t seed);

// scope: all | numerics | rbm | dbm | grbm | gmrf | grad | oracle
std::vector<SuiteResult> run_suites(const std::string &scope, std::uint64_t seed);

}  // namespace qtbp::check
