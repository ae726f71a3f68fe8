// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gmrf_internal.hpp"
#include "qtbp/grad.hpp"
#include "qtbp/query.hpp"

namespace qtbp {

GmrfGrad GmrfGrad::zeros(const GmrfParams &p) {
  return GmrfGrad{Matrix(p.K, p.K), Matrix(p.K, p.K), Matrix(p.K, p.K), Matrix(p.K, p.K)};
}

void GmrfGrad::scale(double s) {
  for (Matrix *t : {&pot_ud, &pot_lr, &pot_d1, &pot_d2}) {
    for (double &x : t->values()) x *= s;
  }
}

namespace {

// Per-pixel loss and readout adjoint of the aggregated 3-class
// cross-entropy. With P the probability pooled over the true label's
// states and pi the per-state beliefs, d(-ln P)/dz_t = pi_t - pi_t 1{t in S}/P.
double readout_adjoint(const std::vector<double> &beliefs, const ByteGrid &labels, std::size_t K,
                       std::vector<double> *zbar) {
  const std::size_t n_pixels = labels.size();
  const double scale = 1.0 / static_cast<double>(n_pixels);
  if (zbar != nullptr) zbar->assign(n_pixels * K, 0.0);
  double nats = 0.0;
  for (std::size_t px = 0; px < n_pixels; ++px) {
    const double *pi = beliefs.data() + px * K;
    const std::uint8_t lab = labels.v[px];
    if (lab > 2) throw std::invalid_argument("label values must be 0, 1 or 2");
    std::size_t lo = 0, hi = 0;  // state range pooled for this label
    if (lab == static_cast<std::uint8_t>(SegLabel::Contour)) {
      lo = 0;
      hi = K - 2;
    } else if (lab == static_cast<std::uint8_t>(SegLabel::In)) {
      lo = K - 2;
      hi = K - 1;
    } else {
      lo = K - 1;
      hi = K;
    }
    double p = 0.0;
    for (std::size_t k = lo; k < hi; ++k) p += pi[k];
    if (p < kProbClamp) {
      nats -= std::log(kProbClamp) * scale;
      continue;  // clamped: no gradient, matching the loss surface
    }
    nats -= std::log(p) * scale;
    if (zbar != nullptr) {
      double *zb = zbar->data() + px * K;
      for (std::size_t k = 0; k < K; ++k) {
        const double member = (k >= lo && k < hi) ? 1.0 : 0.0;
        zb[k] = (pi[k] - pi[k] * member / p) * scale;
      }
    }
  }
  return nats;
}

}  // namespace

double gmrf_sample_loss(const std::vector<double> &beliefs, const ByteGrid &labels, std::size_t K) {
  if (beliefs.size() != labels.size() * K) throw std::invalid_argument("beliefs shape mismatch");
  return readout_adjoint(beliefs, labels, K, nullptr);
}

double gmrf_backward(const GmrfParams &params, const ByteGrid &labels, const GmrfTrace &trace,
                     Temperature T, GmrfGrad &accum) {
  params.validate();
  if (T.is_zero()) throw std::invalid_argument("gmrf_backward requires T > 0");
  const std::size_t R = trace.unaries.rows, C = trace.unaries.cols, K = params.K;
  if (labels.rows != R || labels.cols != C || trace.layers.empty()) {
    throw std::invalid_argument("gmrf_backward shape mismatch");
  }
  const std::size_t N = trace.layers.size() - 1;
  const double t = T.value();
  const bool fast_path = t == 1.0;

  internal::EdgeTables tables;
  std::vector<double> expu;
  if (fast_path) {
    tables = internal::build_edge_tables(params);
    expu.resize(trace.unaries.u.size());
    for (std::size_t i = 0; i < expu.size(); ++i) expu[i] = std::exp(trace.unaries.u[i]);
  }
  Matrix *grads[4] = {&accum.pot_ud, &accum.pot_lr, &accum.pot_d1, &accum.pot_d2};

  // recompute the readout beliefs from the final message state
  const GmrfMessages &last = trace.layers[N];
  const std::vector<double> beliefs =
      gmrf_readout_beliefs(trace.unaries, expu, last, trace.logs_valid, fast_path);

  std::vector<double> zbar;
  const double nats = readout_adjoint(beliefs, labels, K, &zbar);

  // zbar is the adjoint of the per-pixel unnormalized sum z, which lands
  // directly on every incoming message of the last layer.
  const std::size_t slot_count = R * C * kNumDirections * K;
  const auto slot = [C, K](std::size_t r, std::size_t c, int d) {
    return ((r * C + c) * kNumDirections + static_cast<std::size_t>(d)) * K;
  };
  std::vector<double> bar(slot_count, 0.0);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      for (int d = 0; d < kNumDirections; ++d) {
        std::size_t nr, nc;
        if (!internal::neighbor_of(r, c, d, R, C, nr, nc)) continue;
        const double *zb = zbar.data() + (r * C + c) * K;
        std::copy(zb, zb + K, bar.data() + slot(r, c, d));
      }
    }
  }

  std::vector<double> total, product, cav(K), ybar(K), e_cav(K), acc(K), wbar(K), rho(K);
  std::vector<char> fallback;
  // per-edge cavity adjoints, keyed from the source pixel's own slot
  std::vector<double> cavbar(slot_count);
  std::vector<double> next_bar(slot_count);
  bool need_totals = !fast_path;

  for (std::size_t n = N; n >= 1; --n) {
    const GmrfMessages &prev = trace.layers[n - 1];
    const GmrfMessages &out = trace.layers[n];
    if (fast_path) {
      internal::incoming_products(prev, expu, product, fallback);
      for (char f : fallback) need_totals = need_totals || f != 0;
    }
    if (need_totals) internal::incoming_totals(prev, total);
    std::fill(cavbar.begin(), cavbar.end(), 0.0);

    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        for (int d = 0; d < kNumDirections; ++d) {
          std::size_t nr, nc;
          if (!internal::neighbor_of(r, c, d, R, C, nr, nc)) continue;

          const double *gbar = bar.data() + slot(r, c, d);
          double gsum = 0.0;
          bool any = false;
          for (std::size_t k = 0; k < K; ++k) {
            gsum += gbar[k];
            any = any || gbar[k] != 0.0;
          }
          if (!any) continue;

          const std::size_t ti = internal::table_index(d);
          const bool sf = internal::source_first(d);
          Matrix &pot_grad = *grads[ti];
          double *cav_adj = cavbar.data() + slot(nr, nc, opposite_direction(d));

          if (fast_path && fallback[nr * C + nc] == 0) {
            // cavity up to scale, from the pixel products
            const double *pprod = product.data() + (nr * C + nc) * K;
            const double *pback = prev.prob_at(nr, nc, opposite_direction(d));
            for (std::size_t k = 0; k < K; ++k) e_cav[k] = pprod[k] / pback[k];

            const Matrix &ept = tables.exp_pot[ti];
            double sum = 0.0;
            for (std::size_t kp = 0; kp < K; ++kp) {
              double a = 0.0;
              if (sf) {
                for (std::size_t kn = 0; kn < K; ++kn) a += ept(kn, kp) * e_cav[kn];
              } else {
                for (std::size_t kn = 0; kn < K; ++kn) a += ept(kp, kn) * e_cav[kn];
              }
              acc[kp] = a;
              sum += a;
            }
            // through log-normalization: ybar = gbar - gsum * acc / sum,
            // then each target state distributes with weight 1 / acc
            for (std::size_t kp = 0; kp < K; ++kp) {
              const double yb = gbar[kp] - gsum * acc[kp] / sum;
              wbar[kp] = acc[kp] > 0.0 ? yb / acc[kp] : 0.0;
            }
            for (std::size_t kn = 0; kn < K; ++kn) {
              double acc_c = 0.0;
              if (sf) {
                for (std::size_t kp = 0; kp < K; ++kp) {
                  const double contrib = ept(kn, kp) * e_cav[kn] * wbar[kp];
                  pot_grad(kn, kp) += contrib;
                  acc_c += contrib;
                }
              } else {
                for (std::size_t kp = 0; kp < K; ++kp) {
                  const double contrib = ept(kp, kn) * e_cav[kn] * wbar[kp];
                  pot_grad(kp, kn) += contrib;
                  acc_c += contrib;
                }
              }
              cav_adj[kn] += acc_c;
            }
          } else {
            // exact log-space cavity; softmax(y) is the stored mirror
            if (!trace.logs_valid) {
              throw std::domain_error("gmrf message underflow in a log-free training trace");
            }
            const double *n_unary = trace.unaries.at(nr, nc);
            const double *n_total = total.data() + (nr * C + nc) * K;
            const double *back = prev.at(nr, nc, opposite_direction(d));
            for (std::size_t k = 0; k < K; ++k) {
              cav[k] = n_unary[k] + n_total[k] - back[k];
            }
            const double *norm = out.prob_at(r, c, d);
            for (std::size_t k = 0; k < K; ++k) {
              ybar[k] = gbar[k] - gsum * norm[k];
            }
            const Matrix &pot = internal::table_for(params, ti);
            for (std::size_t kp = 0; kp < K; ++kp) {
              if (ybar[kp] == 0.0) continue;
              double m = -std::numeric_limits<double>::infinity();
              for (std::size_t kn = 0; kn < K; ++kn) {
                rho[kn] = (sf ? pot(kn, kp) : pot(kp, kn)) + cav[kn];
                m = std::max(m, rho[kn]);
              }
              double a = 0.0;
              for (std::size_t kn = 0; kn < K; ++kn) {
                rho[kn] = std::exp((rho[kn] - m) / t);
                a += rho[kn];
              }
              for (std::size_t kn = 0; kn < K; ++kn) {
                const double contrib = ybar[kp] * rho[kn] / a;
                if (sf) {
                  pot_grad(kn, kp) += contrib;
                } else {
                  pot_grad(kp, kn) += contrib;
                }
                cav_adj[kn] += contrib;
              }
            }
          }
        }
      }
    }

    // cavity adjoints back onto the previous message state: each incoming
    // slot of a pixel sees the pixel's total minus its own edge. Only
    // valid slots are written, and only valid slots are ever read.
    std::vector<double> pix_total(K);
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        std::fill(pix_total.begin(), pix_total.end(), 0.0);
        for (int d = 0; d < kNumDirections; ++d) {
          std::size_t nr, nc;
          if (!internal::neighbor_of(r, c, d, R, C, nr, nc)) continue;
          const double *cb = cavbar.data() + slot(r, c, d);
          for (std::size_t k = 0; k < K; ++k) pix_total[k] += cb[k];
        }
        for (int d = 0; d < kNumDirections; ++d) {
          std::size_t nr, nc;
          if (!internal::neighbor_of(r, c, d, R, C, nr, nc)) continue;
          const double *cb = cavbar.data() + slot(r, c, d);
          double *nb = next_bar.data() + slot(r, c, d);
          for (std::size_t k = 0; k < K; ++k) nb[k] = pix_total[k] - cb[k];
        }
      }
    }
    std::swap(bar, next_bar);
  }
  return nats;
}

double gmrf_loss_backward(const GmrfParams &params, const ByteGrid &image, const ByteGrid &labels,
                          int n_layers, Temperature T, GmrfGrad *accum) {
  const auto fwd = gmrf_forward(params, image, n_layers, T);
  if (accum == nullptr) return gmrf_sample_loss(fwd.beliefs, labels, params.K);
  return gmrf_backward(params, labels, fwd.trace, T, *accum);
}

}  // namespace qtbp
