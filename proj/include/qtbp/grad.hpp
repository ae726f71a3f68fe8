// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "qtbp/gmrf.hpp"
#include "qtbp/grbm.hpp"
#include "qtbp/rbm.hpp"

namespace qtbp {

// Shape-congruent gradient bundles. Reverse accumulation is hand-derived
// per layer; weight sharing across the N unrolled layers sums every
// layer's contribution into the same slot.

struct RbmGrad {
  Matrix W;
  std::vector<double> c_V;
  std::vector<double> c_H;
  double tau = 0.0;

  static RbmGrad zeros(const RbmParams &p);
  void scale(double s);
};

struct DbmGrad {
  Matrix W_H1V;
  Matrix W_H2H1;
  std::vector<double> c_V;
  std::vector<double> c_H1;
  std::vector<double> c_H2;
  double tau = 0.0;

  static DbmGrad zeros(const DbmParams &p);
  void scale(double s);
};

struct GrbmGrad {
  Matrix W;
  std::vector<double> b;
  std::vector<double> c;

  static GrbmGrad zeros(const GrbmParams &p);
  void scale(double s);
};

// Emission noise is estimated in closed form and frozen, so only the four
// potential tables carry gradients.
struct GmrfGrad {
  Matrix pot_ud;
  Matrix pot_lr;
  Matrix pot_d1;
  Matrix pot_d2;

  static GmrfGrad zeros(const GmrfParams &p);
  void scale(double s);
};

// Per-sample losses in nats; bits only appear at metric boundaries.
// Each *_backward consumes the trace of the matching forward pass and adds
// this sample's gradient into `accum`.

// Masked binary cross-entropy of the readout against bits at target
// positions (natural log, probabilities clamped like the metric).
double rbm_sample_loss(const std::vector<double> &v_hat, const std::vector<std::uint8_t> &bits,
                       const QueryMask &q);

double rbm_backward(const RbmParams &params, const std::vector<std::uint8_t> &bits,
                    const QueryMask &q, const LayerTrace &trace, RbmGrad &accum);

double dbm_backward(const DbmParams &params, const std::vector<std::uint8_t> &bits,
                    const QueryMask &q, const LayerTrace &trace, DbmGrad &accum);

// Gaussian negative log-density over target positions.
double grbm_sample_loss(const GrbmForwardResult &fwd, const std::vector<double> &v,
                        const QueryMask &q);

double grbm_backward(const GrbmParams &params, const GrbmConfig &cfg, const std::vector<double> &v,
                     const QueryMask &q, const GaussianTrace &trace, GrbmGrad &accum);

// Mean per-pixel categorical cross-entropy of the aggregated 3-class
// beliefs against the label grid (the GMRF query is fixed).
double gmrf_sample_loss(const std::vector<double> &beliefs, const ByteGrid &labels, std::size_t K);

double gmrf_backward(const GmrfParams &params, const ByteGrid &labels, const GmrfTrace &trace,
                     Temperature T, GmrfGrad &accum);

// Forward + loss (+ optional backward) wrappers keeping the finite
// difference evaluator and the gradient path on one code path.
double rbm_loss_backward(const RbmParams &params, const std::vector<std::uint8_t> &bits,
                         const QueryMask &q, int n_layers, RbmGrad *accum);
double dbm_loss_backward(const DbmParams &params, const std::vector<std::uint8_t> &bits,
                         const QueryMask &q, int n_layers, DbmGrad *accum);
double grbm_loss_backward(const GrbmParams &params, const GrbmConfig &cfg,
                          const std::vector<double> &v, const QueryMask &q, GrbmGrad *accum);
double gmrf_loss_backward(const GmrfParams &params, const ByteGrid &image, const ByteGrid &labels,
                          int n_layers, Temperature T, GmrfGrad *accum);

}  // namespace qtbp
