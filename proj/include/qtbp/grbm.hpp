// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "qtbp/matrix.hpp"
#include "qtbp/rbm.hpp"

namespace qtbp {

// Gaussian RBM: binary hidden units, continuous visible units, potential
// -||v - b||^2 / 2 + c^T h + h^T W v with the visible noise scale fixed
// at one.
struct GrbmParams {
  Matrix W;              // [H x V]
  std::vector<double> b; // [V] visible means
  std::vector<double> c; // [H] hidden biases

  std::size_t hidden() const { return W.rows(); }
  std::size_t visible() const { return W.cols(); }
  void validate() const;
};

GrbmParams init_grbm(std::size_t hidden, std::size_t visible, class Rng &rng);

struct GrbmConfig {
  double epsilon = 1e-4;  // observation variance of clamped visible units
  int n_layers = 10;

  void validate() const;
};

// Hidden -> visible messages are Gaussians stored as natural parameters
// (theta1, theta2); visible -> hidden messages are logit-space scalars.
struct GaussianMessages {
  Matrix M_HV;    // [H x V]
  Matrix M_VHt1;  // [V x H]
  Matrix M_VHt2;  // [V x H]

  static GaussianMessages initial(std::size_t hidden, std::size_t visible);
};

struct GaussianTrace {
  std::vector<double> u_t1;  // natural-parameter unary, theta1
  std::vector<double> u_t2;  // theta2
  std::vector<GaussianMessages> layers;  // N+1 states
};

struct GrbmForwardResult {
  std::vector<double> mean;  // [V]
  std::vector<double> var;   // [V], strictly positive
  std::vector<double> h_hat; // [H]
  GaussianTrace trace;
};

// Visible unary factors in the paper's (mean, theta2) convention:
// u_t1 = v.q + b.(1-q), u_t2 = -1/(2 eps) on evidence and -1/2 on targets.
// The forward pass converts theta1 to natural form at encode time
// (theta1 = mean * (-2 theta2)), which keeps the cavity and readout sums
// dimensionally consistent.
void grbm_encode_unary(const std::vector<double> &v, const QueryMask &q,
                       const std::vector<double> &b, double epsilon,
                       std::vector<double> &u_t1, std::vector<double> &u_t2);

// Logit-space message to a hidden unit from a visible Gaussian cavity
// (t1, t2), t2 < 0: -(2 t1 w + w^2) / (4 t2).
double visible_to_hidden_message(double w, double t1, double t2);

// Gaussian approximation of the belief at a visible unit: the two hidden
// states are mixed with responsibility sigmoid(x + w mu + sigma^2 w^2 / 2).
struct GaussianBelief {
  double b1 = 0.0;
  double b2 = 0.0;
};
GaussianBelief gaussian_belief_approx(double w, double x, double t1, double t2);

// Moment-matched message: belief divided by the cavity, (b1 - t1, b2 - t2).
struct GaussianMessage {
  double m1 = 0.0;
  double m2 = 0.0;
};
GaussianMessage hidden_to_visible_message(double w, double x, double t1, double t2);

GrbmForwardResult grbm_forward(const GrbmParams &params, const std::vector<double> &v,
                               const QueryMask &q, const GrbmConfig &cfg);

}  // namespace qtbp
