// SPDX-License-Identifier: Apache-2.0

#include "qtbp/grbm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "qtbp/numerics.hpp"
#include "qtbp/rng.hpp"

namespace qtbp {

void GrbmParams::validate() const {
  if (W.rows() == 0 || W.cols() == 0) throw std::invalid_argument("GRBM needs H >= 1 and V >= 1");
  if (b.size() != W.cols() || c.size() != W.rows()) {
    throw std::invalid_argument("GRBM bias shapes inconsistent with W");
  }
  for (double x : W.values()) {
    if (!std::isfinite(x)) throw std::invalid_argument("W has non-finite entry");
  }
  for (double x : b) {
    if (!std::isfinite(x)) throw std::invalid_argument("b has non-finite entry");
  }
  for (double x : c) {
    if (!std::isfinite(x)) throw std::invalid_argument("c has non-finite entry");
  }
}

GrbmParams init_grbm(std::size_t hidden, std::size_t visible, Rng &rng) {
  GrbmParams p;
  p.W = Matrix(hidden, visible);
  for (double &w : p.W.values()) w = rng.normal(0.0, 0.01);
  p.b.assign(visible, 0.0);
  p.c.assign(hidden, 0.0);
  return p;
}

void GrbmConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (n_layers < 1) throw std::invalid_argument("n_layers must be >= 1");
}

GaussianMessages GaussianMessages::initial(std::size_t hidden, std::size_t visible) {
  GaussianMessages m;
  m.M_HV = Matrix(hidden, visible, 0.0);
  m.M_VHt1 = Matrix(visible, hidden, 0.0);
  m.M_VHt2 = Matrix(visible, hidden, -0.5);
  return m;
}

void grbm_encode_unary(const std::vector<double> &v, const QueryMask &q,
                       const std::vector<double> &b, double epsilon,
                       std::vector<double> &u_t1, std::vector<double> &u_t2) {
  validate_query_mask(q, v.size());
  if (b.size() != v.size()) throw std::invalid_argument("b size mismatch");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument("v has non-finite entry");
  }
  u_t1.resize(v.size());
  u_t2.resize(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    u_t1[j] = q[j] ? v[j] : b[j];
    u_t2[j] = q[j] ? -0.5 / epsilon : -0.5;
  }
}

double visible_to_hidden_message(double w, double t1, double t2) {
  if (!(t2 < 0.0)) throw std::domain_error("improper Gaussian cavity: theta2 must be negative");
  return -(2.0 * t1 * w + w * w) / (4.0 * t2);
}

GaussianBelief gaussian_belief_approx(double w, double x, double t1, double t2) {
  if (!(t2 < 0.0)) throw std::domain_error("improper Gaussian cavity: theta2 must be negative");
  const double mu = -t1 / (2.0 * t2);
  const double s2 = -1.0 / (2.0 * t2);
  const double shift = s2 * w;
  // responsibility of the hidden unit being on, computed via the stable
  // sigmoid rather than an unguarded exponential
  const double r = sigmoid(x + w * mu + 0.5 * s2 * w * w);
  const double mu_b = mu + r * shift;
  // mixture of two Gaussians with common variance s2 and means mu, mu+shift
  const double var_b = s2 + r * (1.0 - r) * shift * shift;
  if (!(var_b > 0.0)) throw std::domain_error("belief variance is not positive");
  GaussianBelief belief;
  belief.b1 = mu_b / var_b;
  belief.b2 = -0.5 / var_b;
  return belief;
}

GaussianMessage hidden_to_visible_message(double w, double x, double t1, double t2) {
  const GaussianBelief belief = gaussian_belief_approx(w, x, t1, t2);
  return GaussianMessage{belief.b1 - t1, belief.b2 - t2};
}

GrbmForwardResult grbm_forward(const GrbmParams &params, const std::vector<double> &v,
                               const QueryMask &q, const GrbmConfig &cfg) {
  params.validate();
  cfg.validate();
  const std::size_t H = params.hidden();
  const std::size_t V = params.visible();
  if (v.size() != V) throw std::invalid_argument("grbm_forward data size mismatch");

  GrbmForwardResult result;
  grbm_encode_unary(v, q, params.b, cfg.epsilon, result.trace.u_t1, result.trace.u_t2);
  // natural-parameter form: theta1 = mean * (-2 theta2)
  for (std::size_t j = 0; j < V; ++j) {
    result.trace.u_t1[j] *= -2.0 * result.trace.u_t2[j];
  }
  const std::vector<double> &u1 = result.trace.u_t1;
  const std::vector<double> &u2 = result.trace.u_t2;

  result.trace.layers.reserve(static_cast<std::size_t>(cfg.n_layers) + 1);
  result.trace.layers.push_back(GaussianMessages::initial(H, V));

  for (int n = 0; n < cfg.n_layers; ++n) {
    const GaussianMessages &prev = result.trace.layers.back();
    GaussianMessages next = GaussianMessages::initial(H, V);

    std::vector<double> sum_t1(V, 0.0), sum_t2(V, 0.0), sum_hv(H, 0.0);
    for (std::size_t j = 0; j < V; ++j) {
      for (std::size_t i = 0; i < H; ++i) {
        sum_t1[j] += prev.M_VHt1(j, i);
        sum_t2[j] += prev.M_VHt2(j, i);
      }
    }
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < V; ++j) sum_hv[i] += prev.M_HV(i, j);
    }

    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < V; ++j) {
        const double ct1 = u1[j] + sum_t1[j] - prev.M_VHt1(j, i);
        const double ct2 = u2[j] + sum_t2[j] - prev.M_VHt2(j, i);
        next.M_HV(i, j) = visible_to_hidden_message(params.W(i, j), ct1, ct2);
        const double chv = params.c[i] + sum_hv[i] - prev.M_HV(i, j);
        const GaussianMessage m = hidden_to_visible_message(params.W(i, j), chv, ct1, ct2);
        next.M_VHt1(j, i) = m.m1;
        next.M_VHt2(j, i) = m.m2;
      }
    }
    result.trace.layers.push_back(std::move(next));
  }

  const GaussianMessages &last = result.trace.layers.back();
  result.mean.resize(V);
  result.var.resize(V);
  for (std::size_t j = 0; j < V; ++j) {
    double t1 = u1[j], t2 = u2[j];
    for (std::size_t i = 0; i < H; ++i) {
      t1 += last.M_VHt1(j, i);
      t2 += last.M_VHt2(j, i);
    }
    if (!(t2 < 0.0)) {
      throw std::domain_error("posterior theta2 is not negative at visible unit " +
                              std::to_string(j));
    }
    result.mean[j] = -t1 / (2.0 * t2);
    result.var[j] = -1.0 / (2.0 * t2);
  }
  result.h_hat.resize(H);
  for (std::size_t i = 0; i < H; ++i) {
    double z = params.c[i];
    for (std::size_t j = 0; j < V; ++j) z += last.M_HV(i, j);
    result.h_hat[i] = sigmoid(z);
  }
  return result;
}

}  // namespace qtbp
