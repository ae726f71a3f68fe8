// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qtbp/grad.hpp"
#include "qtbp/query.hpp"

namespace qtbp {

RbmGrad RbmGrad::zeros(const RbmParams &p) {
  return RbmGrad{Matrix(p.hidden(), p.visible()), std::vector<double>(p.visible(), 0.0),
                 std::vector<double>(p.hidden(), 0.0), 0.0};
}

void RbmGrad::scale(double s) {
  for (double &x : W.values()) x *= s;
  for (double &x : c_V) x *= s;
  for (double &x : c_H) x *= s;
  tau *= s;
}

DbmGrad DbmGrad::zeros(const DbmParams &p) {
  return DbmGrad{Matrix(p.hidden1(), p.visible()),
                 Matrix(p.hidden2(), p.hidden1()),
                 std::vector<double>(p.visible(), 0.0),
                 std::vector<double>(p.hidden1(), 0.0),
                 std::vector<double>(p.hidden2(), 0.0),
                 0.0};
}

void DbmGrad::scale(double s) {
  for (double &x : W_H1V.values()) x *= s;
  for (double &x : W_H2H1.values()) x *= s;
  for (double &x : c_V) x *= s;
  for (double &x : c_H1) x *= s;
  for (double &x : c_H2) x *= s;
  tau *= s;
}

namespace {

// Loss and readout-logit gradient of the masked binary cross-entropy, in
// nats, mirroring the metric's clamping (a clamped probability contributes
// zero gradient, exactly as finite differences of the clamped loss see it).
double masked_ce_nats(const std::vector<double> &v_hat, const std::vector<std::uint8_t> &bits,
                      const QueryMask &q, std::vector<double> *dloss_dz) {
  double nats = 0.0;
  if (dloss_dz != nullptr) dloss_dz->assign(v_hat.size(), 0.0);
  for (std::size_t j = 0; j < v_hat.size(); ++j) {
    if (q[j]) continue;
    const double p = std::clamp(v_hat[j], kProbClamp, 1.0 - kProbClamp);
    nats -= bits[j] ? std::log(p) : std::log1p(-p);
    if (dloss_dz != nullptr && v_hat[j] > kProbClamp && v_hat[j] < 1.0 - kProbClamp) {
      (*dloss_dz)[j] = v_hat[j] - static_cast<double>(bits[j]);
    }
  }
  return nats;
}

// Reverse accumulation through the unrolled layers given the adjoint of
// the visible readout logits.
void rbm_reverse(const RbmParams &params, const LayerTrace &trace,
                 const std::vector<double> &dloss_dz, RbmGrad &accum) {
  const std::size_t H = params.hidden();
  const std::size_t V = params.visible();
  const Temperature T = params.temperature();
  const std::size_t N = trace.layers.size() - 1;
  const std::vector<double> &u = trace.unary;

  // readout z_j = u_j + c_V[j] + sum_i M_VH[j,i]
  for (std::size_t j = 0; j < V; ++j) accum.c_V[j] += dloss_dz[j];

  Matrix bar_VH(V, H);  // dL/dM_VH at the current layer
  Matrix bar_HV(H, V);
  for (std::size_t j = 0; j < V; ++j) {
    for (std::size_t i = 0; i < H; ++i) bar_VH(j, i) = dloss_dz[j];
  }

  double dT = 0.0;
  std::vector<double> sum_VH(V), sum_HV(H), col_da(V), row_db(H);
  for (std::size_t n = N; n >= 1; --n) {
    const BinaryMessages &prev = trace.layers[n - 1];

    std::fill(sum_VH.begin(), sum_VH.end(), 0.0);
    std::fill(sum_HV.begin(), sum_HV.end(), 0.0);
    for (std::size_t j = 0; j < V; ++j) {
      for (std::size_t i = 0; i < H; ++i) sum_VH[j] += prev.M_VH(j, i);
    }
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < V; ++j) sum_HV[i] += prev.M_HV(i, j);
    }

    Matrix next_bar_VH(V, H);
    Matrix next_bar_HV(H, V);
    std::fill(col_da.begin(), col_da.end(), 0.0);
    std::fill(row_db.begin(), row_db.end(), 0.0);

    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < V; ++j) {
        // M_HV(i,j) = f(W_ij, a) with a the visible cavity
        const double ah = bar_HV(i, j);
        if (ah != 0.0) {
          const double a = u[j] + params.c_V[j] + sum_VH[j] - prev.M_VH(j, i);
          const BinaryTransferGrad g = binary_transfer_grad(params.W(i, j), a, T);
          accum.W(i, j) += ah * g.dw;
          dT += ah * g.dT;
          const double da = ah * g.dx;
          accum.c_V[j] += da;
          col_da[j] += da;
          next_bar_VH(j, i) -= da;  // excluded element of the cavity
        }
        // M_VH(j,i) = f(W_ij, b) with b the hidden cavity
        const double av = bar_VH(j, i);
        if (av != 0.0) {
          const double b = params.c_H[i] + sum_HV[i] - prev.M_HV(i, j);
          const BinaryTransferGrad g = binary_transfer_grad(params.W(i, j), b, T);
          accum.W(i, j) += av * g.dw;
          dT += av * g.dT;
          const double db = av * g.dx;
          accum.c_H[i] += db;
          row_db[i] += db;
          next_bar_HV(i, j) -= db;
        }
      }
    }
    // cavity adjoints: every previous message sees the column/row total
    // minus its own excluded contribution
    for (std::size_t j = 0; j < V; ++j) {
      for (std::size_t i = 0; i < H; ++i) next_bar_VH(j, i) += col_da[j];
    }
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < V; ++j) next_bar_HV(i, j) += row_db[i];
    }
    bar_VH = std::move(next_bar_VH);
    bar_HV = std::move(next_bar_HV);
  }
  // layer 0 messages are constants; their adjoints are dropped
  accum.tau += dT * dtemperature_dtau(params.tau);
}

void check_trace(const LayerTrace &trace, std::size_t H, std::size_t V) {
  if (trace.layers.empty() || trace.unary.size() != V ||
      trace.layers.front().M_HV.rows() != H || trace.layers.front().M_HV.cols() != V) {
    throw std::invalid_argument("trace does not match the parameters");
  }
}

}  // namespace

double rbm_sample_loss(const std::vector<double> &v_hat, const std::vector<std::uint8_t> &bits,
                       const QueryMask &q) {
  if (v_hat.size() != bits.size() || v_hat.size() != q.size()) {
    throw std::invalid_argument("rbm_sample_loss shape mismatch");
  }
  return masked_ce_nats(v_hat, bits, q, nullptr);
}

double rbm_backward(const RbmParams &params, const std::vector<std::uint8_t> &bits,
                    const QueryMask &q, const LayerTrace &trace, RbmGrad &accum) {
  const std::size_t H = params.hidden();
  const std::size_t V = params.visible();
  check_trace(trace, H, V);
  validate_query_mask(q, V);
  if (bits.size() != V) throw std::invalid_argument("bits size mismatch");

  // recompute the readout from the final message state
  const BinaryMessages &last = trace.layers.back();
  std::vector<double> v_hat(V);
  for (std::size_t j = 0; j < V; ++j) {
    double z = trace.unary[j] + params.c_V[j];
    for (std::size_t i = 0; i < H; ++i) z += last.M_VH(j, i);
    v_hat[j] = sigmoid(z);
  }
  std::vector<double> dloss_dz;
  const double nats = masked_ce_nats(v_hat, bits, q, &dloss_dz);
  rbm_reverse(params, trace, dloss_dz, accum);
  return nats;
}

double dbm_backward(const DbmParams &params, const std::vector<std::uint8_t> &bits,
                    const QueryMask &q, const LayerTrace &trace, DbmGrad &accum) {
  const std::size_t V = params.visible();
  const std::size_t H1 = params.hidden1();
  const std::size_t H2 = params.hidden2();
  validate_query_mask(q, V);
  if (bits.size() != V) throw std::invalid_argument("bits size mismatch");

  const RbmParams stacked = dbm_to_rbm(params);
  check_trace(trace, H1, V + H2);

  // the h2 block of the extended visible vector never enters the loss
  std::vector<std::uint8_t> bits_ext(bits);
  bits_ext.resize(V + H2, 0);
  QueryMask q_ext = dbm_extend_query(q, H2);

  RbmGrad stacked_grad = RbmGrad::zeros(stacked);
  const double nats = rbm_backward(stacked, bits_ext, q_ext, trace, stacked_grad);

  // unstack: W~ = [W_H1V | W_H2H1^T], c~_V = [c_V; c_H2]
  for (std::size_t i = 0; i < H1; ++i) {
    for (std::size_t j = 0; j < V; ++j) accum.W_H1V(i, j) += stacked_grad.W(i, j);
    for (std::size_t k = 0; k < H2; ++k) accum.W_H2H1(k, i) += stacked_grad.W(i, V + k);
  }
  for (std::size_t j = 0; j < V; ++j) accum.c_V[j] += stacked_grad.c_V[j];
  for (std::size_t k = 0; k < H2; ++k) accum.c_H2[k] += stacked_grad.c_V[V + k];
  for (std::size_t i = 0; i < H1; ++i) accum.c_H1[i] += stacked_grad.c_H[i];
  accum.tau += stacked_grad.tau;
  return nats;
}

double rbm_loss_backward(const RbmParams &params, const std::vector<std::uint8_t> &bits,
                         const QueryMask &q, int n_layers, RbmGrad *accum) {
  const auto fwd = rbm_forward(params, to_signed(bits), q, n_layers);
  if (accum == nullptr) return rbm_sample_loss(fwd.v_hat, bits, q);
  return rbm_backward(params, bits, q, fwd.trace, *accum);
}

double dbm_loss_backward(const DbmParams &params, const std::vector<std::uint8_t> &bits,
                         const QueryMask &q, int n_layers, DbmGrad *accum) {
  const auto fwd = dbm_forward(params, to_signed(bits), q, n_layers);
  if (accum == nullptr) return rbm_sample_loss(fwd.v_hat, bits, q);
  return dbm_backward(params, bits, q, fwd.trace, *accum);
}

}  // namespace qtbp
