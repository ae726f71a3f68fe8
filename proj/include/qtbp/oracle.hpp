// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "qtbp/gmrf.hpp"
#include "qtbp/rbm.hpp"
#include "qtbp/rng.hpp"

namespace qtbp::oracle {

// A discrete model small enough to enumerate: per-variable cardinalities
// and a log-potential over full joint assignments. The joint state count
// is capped at 2^20.
struct EnumerablePgm {
  std::vector<int> cardinalities;
  std::function<double(std::span<const int>)> log_potential;

  std::size_t n_variables() const { return cardinalities.size(); }
  // Throws CapacityError beyond the state bound.
  std::size_t joint_states() const;
};

inline constexpr std::size_t kMaxJointStates = std::size_t{1} << 20;

// Partial assignment: evidence[i] holds the observed state of variable i,
// or nullopt when i is free.
using Evidence = std::vector<std::optional<int>>;

// Exact conditional marginals of the target variables given the evidence,
// with all remaining variables summed out. Accumulation runs in log space.
std::vector<std::vector<double>> exact_conditional_marginals(
    const EnumerablePgm &pgm, const Evidence &evidence, const std::vector<std::size_t> &targets);

// Inverse-CDF sampling over the enumerated joint.
std::vector<std::vector<int>> exact_sample(const EnumerablePgm &pgm, std::size_t n, Rng &rng);

// Central finite differences of a scalar function; used only to verify
// hand-derived gradients.
std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double> &)> &f,
                                     std::vector<double> at, double h = 1e-5);

// RBM (+-1 parameterization) as an enumerable model: variables are
// [v_0..v_{V-1}, h_0..h_{H-1}], all binary with states {0,1} mapping to
// {-1,+1}. The evaluated potential is h~^T W v~ / 2 + h~^T c_H / 2 + v~^T c_V / 2.
EnumerablePgm rbm_pgm(const RbmParams &params);
EnumerablePgm dbm_pgm(const DbmParams &params);

// Exact p(v_j = 1 | evidence) for every target visible unit of an RBM.
std::vector<double> rbm_conditional_v1(const RbmParams &params,
                                       const std::vector<double> &x_signed, const QueryMask &q,
                                       std::vector<std::size_t> *targets_out = nullptr);

// Grid MRF conditioned on an image: one K-state variable per pixel in
// row-major order, unaries folded into the potential.
EnumerablePgm gmrf_pgm(const GmrfParams &params, const ByteGrid &image);

// Exact per-pixel label marginals of the conditioned grid, [R*C x K].
std::vector<std::vector<double>> gmrf_exact_marginals(const GmrfParams &params,
                                                      const ByteGrid &image);

}  // namespace qtbp::oracle
