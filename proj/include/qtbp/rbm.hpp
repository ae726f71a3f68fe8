// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "qtbp/matrix.hpp"
#include "qtbp/numerics.hpp"

namespace qtbp {

// Query mask over visible variables: 1 = evidence, 0 = prediction target.
using QueryMask = std::vector<std::uint8_t>;

void validate_query_mask(const QueryMask &q, std::size_t expected_size);

// {0,1} data row -> {-1,+1} encoding used by the message equations.
std::vector<double> to_signed(const std::vector<std::uint8_t> &bits);

// Binary RBM with potential 2 h^T W v + h^T (c_H - W 1) + v^T (c_V - W^T 1).
// The temperature is learned through the unconstrained parameter tau with
// T = softplus(tau) + 1e-3, keeping T strictly positive under SGD.
struct RbmParams {
  Matrix W;                // [H x V]
  std::vector<double> c_V; // [V]
  std::vector<double> c_H; // [H]
  double tau = 0.0;

  std::size_t hidden() const { return W.rows(); }
  std::size_t visible() const { return W.cols(); }
  Temperature temperature() const;
  void validate() const;
};

// Floor keeping the derived temperature positive for any finite tau.
inline constexpr double kTemperatureFloor = 1e-3;

double temperature_of_tau(double tau);
double dtemperature_dtau(double tau);
// tau giving temperature_of_tau(tau) == T (requires T > kTemperatureFloor).
double tau_for_temperature(double T);

// Small-weight initialization: W ~ N(0, 0.01^2), biases 0, T = 1.
RbmParams init_rbm(std::size_t hidden, std::size_t visible, class Rng &rng);

// Two-hidden-layer DBM; reduces to the RBM equations by stacking h2 onto
// the visible side.
struct DbmParams {
  Matrix W_H1V;             // [H1 x V]
  Matrix W_H2H1;            // [H2 x H1]
  std::vector<double> c_V;  // [V]
  std::vector<double> c_H1; // [H1]
  std::vector<double> c_H2; // [H2]
  double tau = 0.0;

  std::size_t visible() const { return W_H1V.cols(); }
  std::size_t hidden1() const { return W_H1V.rows(); }
  std::size_t hidden2() const { return W_H2H1.rows(); }
  Temperature temperature() const;
  void validate() const;
};

DbmParams init_dbm(std::size_t h1, std::size_t h2, std::size_t visible, class Rng &rng);

// Logit-space message state. M_HV[i][j] is the message arriving at hidden
// unit i from visible unit j; M_VH[j][i] the reverse direction.
struct BinaryMessages {
  Matrix M_HV; // [H x V]
  Matrix M_VH; // [V x H]

  static BinaryMessages zeros(std::size_t hidden, std::size_t visible);
};

// Message snapshots for layers 0..N plus the unary vector; consumed by the
// reverse pass. Layer 0 is the all-zeros state.
struct LayerTrace {
  std::vector<double> unary;           // [V]
  std::vector<BinaryMessages> layers;  // N+1 states
};

struct RbmForwardResult {
  std::vector<double> v_hat; // [V] probability of 1
  std::vector<double> h_hat; // [H]
  LayerTrace trace;
};

// u_j = logit((1+x_j)/2) * q_j, i.e. +-kLogitClip on evidence, 0 on targets.
std::vector<double> encode_unary(const std::vector<double> &x_signed, const QueryMask &q);

// One fully parallel BP layer; both message blocks are computed from `prev`
// only. Cavity sums are evaluated as total minus excluded element.
BinaryMessages rbm_layer(const RbmParams &params, const std::vector<double> &unary,
                         const BinaryMessages &prev);

// N unrolled layers from the zero message state, then the sigmoid readout.
RbmForwardResult rbm_forward(const RbmParams &params, const std::vector<double> &x_signed,
                             const QueryMask &q, int n_layers);

// Same, starting from an already-encoded unary vector (used by the DBM
// reduction and the reverse pass).
RbmForwardResult rbm_forward_unary(const RbmParams &params, std::vector<double> unary,
                                   int n_layers);

// Stacked view of a DBM as an RBM over the extended visible vector [v; h2]:
//   W~ = [W_H1V | W_H2H1^T]   c~_V = [c_V; c_H2]   c~_H = c_H1
// The h2 block of the unary is identically 0 (logit of the uniform 0.5).
RbmParams dbm_to_rbm(const DbmParams &params);

// Extension rules of the reduction: q~ = [q; 1_H2] (the h2 block always
// carries the pseudo-observation 0.5), and the matching unary is [u; 0].
QueryMask dbm_extend_query(const QueryMask &q, std::size_t h2);
std::vector<double> dbm_extend_unary(const std::vector<double> &unary, std::size_t h2);

struct DbmForwardResult {
  std::vector<double> v_hat;  // [V]
  std::vector<double> h1_hat; // [H1]
  std::vector<double> h2_hat; // [H2]
  LayerTrace trace;           // trace of the stacked RBM run
};

DbmForwardResult dbm_forward(const DbmParams &params, const std::vector<double> &x_signed,
                             const QueryMask &q, int n_layers);

}  // namespace qtbp
