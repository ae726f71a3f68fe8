// SPDX-License-Identifier: Apache-2.0

#include "qtbp/rbm.hpp"

#include <cmath>
#include <stdexcept>

#include "qtbp/rng.hpp"

namespace qtbp {

namespace {

void require_all_finite(const std::vector<double> &v, const char *name) {
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(name) + " has non-finite entry");
  }
}

void require_all_finite(const Matrix &m, const char *name) {
  for (double x : m.values()) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(name) + " has non-finite entry");
  }
}

}  // namespace

void validate_query_mask(const QueryMask &q, std::size_t expected_size) {
  if (q.size() != expected_size) {
    throw std::invalid_argument("query mask size mismatch");
  }
  for (auto b : q) {
    if (b != 0 && b != 1) throw std::invalid_argument("query mask entries must be 0 or 1");
  }
}

std::vector<double> to_signed(const std::vector<std::uint8_t> &bits) {
  std::vector<double> out(bits.size());
  for (std::size_t j = 0; j < bits.size(); ++j) {
    if (bits[j] != 0 && bits[j] != 1) {
      throw std::invalid_argument("binary data entries must be 0 or 1");
    }
    out[j] = bits[j] ? 1.0 : -1.0;
  }
  return out;
}

double temperature_of_tau(double tau) {
  return tempered_softplus(tau, Temperature(1.0)) + kTemperatureFloor;
}

double dtemperature_dtau(double tau) { return sigmoid(tau); }

double tau_for_temperature(double T) {
  if (!(T > kTemperatureFloor)) {
    throw std::invalid_argument("target temperature must exceed the floor");
  }
  // inverse softplus: log(e^y - 1)
  return std::log(std::expm1(T - kTemperatureFloor));
}

Temperature RbmParams::temperature() const { return Temperature(temperature_of_tau(tau)); }

void RbmParams::validate() const {
  if (W.rows() == 0 || W.cols() == 0) throw std::invalid_argument("RBM needs H >= 1 and V >= 1");
  if (c_V.size() != W.cols() || c_H.size() != W.rows()) {
    throw std::invalid_argument("RBM bias shapes inconsistent with W");
  }
  require_all_finite(W, "W");
  require_all_finite(c_V, "c_V");
  require_all_finite(c_H, "c_H");
  if (!std::isfinite(tau)) throw std::invalid_argument("tau must be finite");
}

RbmParams init_rbm(std::size_t hidden, std::size_t visible, Rng &rng) {
  RbmParams p;
  p.W = Matrix(hidden, visible);
  for (double &w : p.W.values()) w = rng.normal(0.0, 0.01);
  p.c_V.assign(visible, 0.0);
  p.c_H.assign(hidden, 0.0);
  p.tau = tau_for_temperature(1.0);
  return p;
}

Temperature DbmParams::temperature() const { return Temperature(temperature_of_tau(tau)); }

void DbmParams::validate() const {
  if (W_H1V.rows() == 0 || W_H1V.cols() == 0 || W_H2H1.rows() == 0) {
    throw std::invalid_argument("DBM needs V, H1, H2 >= 1");
  }
  if (W_H2H1.cols() != W_H1V.rows()) {
    throw std::invalid_argument("W_H2H1 columns must match H1");
  }
  if (c_V.size() != visible() || c_H1.size() != hidden1() || c_H2.size() != hidden2()) {
    throw std::invalid_argument("DBM bias shapes inconsistent");
  }
  require_all_finite(W_H1V, "W_H1V");
  require_all_finite(W_H2H1, "W_H2H1");
  require_all_finite(c_V, "c_V");
  require_all_finite(c_H1, "c_H1");
  require_all_finite(c_H2, "c_H2");
  if (!std::isfinite(tau)) throw std::invalid_argument("tau must be finite");
}

DbmParams init_dbm(std::size_t h1, std::size_t h2, std::size_t visible, Rng &rng) {
  DbmParams p;
  p.W_H1V = Matrix(h1, visible);
  p.W_H2H1 = Matrix(h2, h1);
  for (double &w : p.W_H1V.values()) w = rng.normal(0.0, 0.01);
  for (double &w : p.W_H2H1.values()) w = rng.normal(0.0, 0.01);
  p.c_V.assign(visible, 0.0);
  p.c_H1.assign(h1, 0.0);
  p.c_H2.assign(h2, 0.0);
  p.tau = tau_for_temperature(1.0);
  return p;
}

BinaryMessages BinaryMessages::zeros(std::size_t hidden, std::size_t visible) {
  return BinaryMessages{Matrix(hidden, visible), Matrix(visible, hidden)};
}

std::vector<double> encode_unary(const std::vector<double> &x_signed, const QueryMask &q) {
  validate_query_mask(q, x_signed.size());
  std::vector<double> u(x_signed.size(), 0.0);
  for (std::size_t j = 0; j < x_signed.size(); ++j) {
    if (x_signed[j] != 1.0 && x_signed[j] != -1.0) {
      throw std::invalid_argument("signed data entries must be -1 or +1");
    }
    if (q[j]) u[j] = x_signed[j] > 0 ? kLogitClip : -kLogitClip;
  }
  return u;
}

BinaryMessages rbm_layer(const RbmParams &params, const std::vector<double> &unary,
                         const BinaryMessages &prev) {
  const std::size_t H = params.hidden();
  const std::size_t V = params.visible();
  if (unary.size() != V || prev.M_HV.rows() != H || prev.M_HV.cols() != V ||
      prev.M_VH.rows() != V || prev.M_VH.cols() != H) {
    throw std::invalid_argument("rbm_layer shape mismatch");
  }
  const Temperature T = params.temperature();

  // Row totals of the previous state; each cavity is total minus element.
  std::vector<double> sum_VH(V, 0.0);  // incoming to each visible unit
  for (std::size_t j = 0; j < V; ++j) {
    for (std::size_t i = 0; i < H; ++i) sum_VH[j] += prev.M_VH(j, i);
  }
  std::vector<double> sum_HV(H, 0.0);  // incoming to each hidden unit
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < V; ++j) sum_HV[i] += prev.M_HV(i, j);
  }

  BinaryMessages next = BinaryMessages::zeros(H, V);
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < V; ++j) {
      const double cavity_v = unary[j] + params.c_V[j] + sum_VH[j] - prev.M_VH(j, i);
      next.M_HV(i, j) = binary_transfer(params.W(i, j), cavity_v, T);
      const double cavity_h = params.c_H[i] + sum_HV[i] - prev.M_HV(i, j);
      next.M_VH(j, i) = binary_transfer(params.W(i, j), cavity_h, T);
    }
  }
  return next;
}

RbmForwardResult rbm_forward(const RbmParams &params, const std::vector<double> &x_signed,
                             const QueryMask &q, int n_layers) {
  return rbm_forward_unary(params, encode_unary(x_signed, q), n_layers);
}

RbmForwardResult rbm_forward_unary(const RbmParams &params, std::vector<double> unary,
                                   int n_layers) {
  params.validate();
  if (n_layers < 1) throw std::invalid_argument("n_layers must be >= 1");
  const std::size_t H = params.hidden();
  const std::size_t V = params.visible();
  if (unary.size() != V) throw std::invalid_argument("unary size mismatch");

  RbmForwardResult result;
  result.trace.unary = std::move(unary);
  result.trace.layers.reserve(static_cast<std::size_t>(n_layers) + 1);
  result.trace.layers.push_back(BinaryMessages::zeros(H, V));
  for (int n = 0; n < n_layers; ++n) {
    result.trace.layers.push_back(
        rbm_layer(params, result.trace.unary, result.trace.layers.back()));
  }

  const BinaryMessages &last = result.trace.layers.back();
  result.v_hat.resize(V);
  for (std::size_t j = 0; j < V; ++j) {
    double z = result.trace.unary[j] + params.c_V[j];
    for (std::size_t i = 0; i < H; ++i) z += last.M_VH(j, i);
    result.v_hat[j] = sigmoid(z);
  }
  result.h_hat.resize(H);
  for (std::size_t i = 0; i < H; ++i) {
    double z = params.c_H[i];
    for (std::size_t j = 0; j < V; ++j) z += last.M_HV(i, j);
    result.h_hat[i] = sigmoid(z);
  }
  return result;
}

RbmParams dbm_to_rbm(const DbmParams &params) {
  params.validate();
  const std::size_t V = params.visible();
  const std::size_t H1 = params.hidden1();
  const std::size_t H2 = params.hidden2();

  RbmParams stacked;
  stacked.W = Matrix(H1, V + H2);
  for (std::size_t i = 0; i < H1; ++i) {
    for (std::size_t j = 0; j < V; ++j) stacked.W(i, j) = params.W_H1V(i, j);
    for (std::size_t k = 0; k < H2; ++k) stacked.W(i, V + k) = params.W_H2H1(k, i);
  }
  stacked.c_V.resize(V + H2);
  for (std::size_t j = 0; j < V; ++j) stacked.c_V[j] = params.c_V[j];
  for (std::size_t k = 0; k < H2; ++k) stacked.c_V[V + k] = params.c_H2[k];
  stacked.c_H = params.c_H1;
  stacked.tau = params.tau;
  return stacked;
}

QueryMask dbm_extend_query(const QueryMask &q, std::size_t h2) {
  QueryMask out(q);
  out.resize(q.size() + h2, 1);
  return out;
}

std::vector<double> dbm_extend_unary(const std::vector<double> &unary, std::size_t h2) {
  std::vector<double> out(unary);
  out.resize(unary.size() + h2, 0.0);  // logit(0.5) = 0
  return out;
}

DbmForwardResult dbm_forward(const DbmParams &params, const std::vector<double> &x_signed,
                             const QueryMask &q, int n_layers) {
  const std::size_t V = params.visible();
  const std::size_t H2 = params.hidden2();
  if (x_signed.size() != V) throw std::invalid_argument("dbm_forward data size mismatch");
  validate_query_mask(q, V);

  const RbmParams stacked = dbm_to_rbm(params);
  RbmForwardResult stacked_result = rbm_forward_unary(
      stacked, dbm_extend_unary(encode_unary(x_signed, q), H2), n_layers);

  DbmForwardResult result;
  result.v_hat.assign(stacked_result.v_hat.begin(), stacked_result.v_hat.begin() + static_cast<long>(V));
  result.h2_hat.assign(stacked_result.v_hat.begin() + static_cast<long>(V), stacked_result.v_hat.end());
  result.h1_hat = std::move(stacked_result.h_hat);
  result.trace = std::move(stacked_result.trace);
  return result;
}

}  // namespace qtbp
