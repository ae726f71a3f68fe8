// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <stdexcept>

#include "qtbp/grad.hpp"
#include "qtbp/numerics.hpp"

namespace qtbp {

GrbmGrad GrbmGrad::zeros(const GrbmParams &p) {
  return GrbmGrad{Matrix(p.hidden(), p.visible()), std::vector<double>(p.visible(), 0.0),
                  std::vector<double>(p.hidden(), 0.0)};
}

void GrbmGrad::scale(double s) {
  for (double &x : W.values()) x *= s;
  for (double &x : b) x *= s;
  for (double &x : c) x *= s;
}

namespace {

// Partials of the visible -> hidden message -(2 t1 w + w^2) / (4 t2).
struct V2hGrad {
  double dw, dt1, dt2;
};

V2hGrad v2h_grad(double w, double t1, double t2) {
  V2hGrad g;
  g.dw = -(t1 + w) / (2.0 * t2);
  g.dt1 = -w / (2.0 * t2);
  g.dt2 = (2.0 * t1 * w + w * w) / (4.0 * t2 * t2);
  return g;
}

// Partials of the moment-matched hidden -> visible message
// (m1, m2) = (b1 - t1, b2 - t2) with the belief mixed through the
// responsibility r = sigmoid(x + w mu + s2 w^2 / 2).
struct H2vGrad {
  double m1, m2;
  double dm1_dw, dm1_dx, dm1_dt1, dm1_dt2;
  double dm2_dw, dm2_dx, dm2_dt1, dm2_dt2;
};

H2vGrad h2v_grad(double w, double x, double t1, double t2) {
  const double mu = -t1 / (2.0 * t2);
  const double s2 = -1.0 / (2.0 * t2);
  const double A = s2 * w;
  const double s = x + w * mu + 0.5 * s2 * w * w;
  const double r = sigmoid(s);
  const double rp = r * (1.0 - r);
  const double mu_b = mu + r * A;
  const double var_b = s2 + rp * A * A;

  // partials with respect to (mu, s2, x, w)
  const double ds_dmu = w;
  const double ds_ds2 = 0.5 * w * w;
  const double ds_dw = mu + A;

  const double dmub_dmu = 1.0 + A * rp * ds_dmu;
  const double dmub_ds2 = A * rp * ds_ds2 + r * w;
  const double dmub_dx = A * rp;
  const double dmub_dw = A * rp * ds_dw + r * s2;

  const double k = A * A * (1.0 - 2.0 * r) * rp;  // d[rp A^2]/ds
  const double dvarb_dmu = k * ds_dmu;
  const double dvarb_ds2 = 1.0 + k * ds_ds2 + 2.0 * rp * A * w;
  const double dvarb_dx = k;
  const double dvarb_dw = k * ds_dw + 2.0 * rp * A * s2;

  const double inv_v = 1.0 / var_b;
  const double inv_v2 = inv_v * inv_v;
  const auto db1 = [&](double dmub, double dvarb) { return dmub * inv_v - mu_b * dvarb * inv_v2; };
  const auto db2 = [&](double dvarb) { return 0.5 * dvarb * inv_v2; };

  // chain (mu, s2) -> (t1, t2)
  const double dmu_dt1 = -1.0 / (2.0 * t2);
  const double dmu_dt2 = t1 / (2.0 * t2 * t2);
  const double ds2_dt2 = 1.0 / (2.0 * t2 * t2);

  H2vGrad g;
  g.m1 = mu_b * inv_v - t1;
  g.m2 = -0.5 * inv_v - t2;

  const double db1_dmu = db1(dmub_dmu, dvarb_dmu);
  const double db1_ds2 = db1(dmub_ds2, dvarb_ds2);
  const double db2_dmu = db2(dvarb_dmu);
  const double db2_ds2 = db2(dvarb_ds2);

  g.dm1_dw = db1(dmub_dw, dvarb_dw);
  g.dm1_dx = db1(dmub_dx, dvarb_dx);
  g.dm1_dt1 = db1_dmu * dmu_dt1 - 1.0;
  g.dm1_dt2 = db1_dmu * dmu_dt2 + db1_ds2 * ds2_dt2;

  g.dm2_dw = db2(dvarb_dw);
  g.dm2_dx = db2(dvarb_dx);
  g.dm2_dt1 = db2_dmu * dmu_dt1;
  g.dm2_dt2 = db2_dmu * dmu_dt2 + db2_ds2 * ds2_dt2 - 1.0;
  return g;
}

}  // namespace

double grbm_sample_loss(const GrbmForwardResult &fwd, const std::vector<double> &v,
                        const QueryMask &q) {
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  double nats = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (q[j]) continue;
    const double d = v[j] - fwd.mean[j];
    nats += 0.5 * (kLog2Pi + std::log(fwd.var[j])) + d * d / (2.0 * fwd.var[j]);
  }
  return nats;
}

double grbm_backward(const GrbmParams &params, const GrbmConfig &cfg, const std::vector<double> &v,
                     const QueryMask &q, const GaussianTrace &trace, GrbmGrad &accum) {
  const std::size_t H = params.hidden();
  const std::size_t V = params.visible();
  validate_query_mask(q, V);
  if (v.size() != V || trace.layers.empty() || trace.u_t1.size() != V) {
    throw std::invalid_argument("grbm_backward shape mismatch");
  }
  const std::size_t N = trace.layers.size() - 1;
  const std::vector<double> &u1 = trace.u_t1;
  const std::vector<double> &u2 = trace.u_t2;

  // readout: that1 = u1 + sum_i M1, that2 = u2 + sum_i M2
  const GaussianMessages &last = trace.layers[N];
  std::vector<double> that1(V), that2(V), mean(V), var(V);
  for (std::size_t j = 0; j < V; ++j) {
    double t1 = u1[j], t2 = u2[j];
    for (std::size_t i = 0; i < H; ++i) {
      t1 += last.M_VHt1(j, i);
      t2 += last.M_VHt2(j, i);
    }
    if (!(t2 < 0.0)) throw std::domain_error("posterior theta2 is not negative");
    that1[j] = t1;
    that2[j] = t2;
    mean[j] = -t1 / (2.0 * t2);
    var[j] = -1.0 / (2.0 * t2);
  }

  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  double nats = 0.0;
  std::vector<double> bar_u1(V, 0.0);
  Matrix bar_M1(V, H), bar_M2(V, H), bar_HV(H, V);
  for (std::size_t j = 0; j < V; ++j) {
    if (q[j]) continue;
    const double d = v[j] - mean[j];
    nats += 0.5 * (kLog2Pi + std::log(var[j])) + d * d / (2.0 * var[j]);
    const double dl_dmean = -d / var[j];
    const double dl_dvar = 0.5 / var[j] - d * d / (2.0 * var[j] * var[j]);
    const double inv_t2sq = 1.0 / (2.0 * that2[j] * that2[j]);
    const double bar_t1 = dl_dmean * (-1.0 / (2.0 * that2[j]));
    const double bar_t2 = dl_dmean * that1[j] * inv_t2sq + dl_dvar * inv_t2sq;
    bar_u1[j] += bar_t1;
    for (std::size_t i = 0; i < H; ++i) {
      bar_M1(j, i) += bar_t1;
      bar_M2(j, i) += bar_t2;
    }
  }

  std::vector<double> sum_t1(V), sum_t2(V), sum_hv(H), col1(V), col2(V), row_x(H);
  for (std::size_t n = N; n >= 1; --n) {
    const GaussianMessages &prev = trace.layers[n - 1];

    std::fill(sum_t1.begin(), sum_t1.end(), 0.0);
    std::fill(sum_t2.begin(), sum_t2.end(), 0.0);
    std::fill(sum_hv.begin(), sum_hv.end(), 0.0);
    for (std::size_t j = 0; j < V; ++j) {
      for (std::size_t i = 0; i < H; ++i) {
        sum_t1[j] += prev.M_VHt1(j, i);
        sum_t2[j] += prev.M_VHt2(j, i);
      }
    }
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < V; ++j) sum_hv[i] += prev.M_HV(i, j);
    }

    Matrix next_M1(V, H), next_M2(V, H), next_HV(H, V);
    Matrix bar_ct1(V, H), bar_ct2(V, H), bar_chv(H, V);

    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < V; ++j) {
        const double ct1 = u1[j] + sum_t1[j] - prev.M_VHt1(j, i);
        const double ct2 = u2[j] + sum_t2[j] - prev.M_VHt2(j, i);
        const double w = params.W(i, j);

        const double hv = bar_HV(i, j);
        if (hv != 0.0) {
          const V2hGrad g = v2h_grad(w, ct1, ct2);
          accum.W(i, j) += hv * g.dw;
          bar_ct1(j, i) += hv * g.dt1;
          bar_ct2(j, i) += hv * g.dt2;
        }

        const double m1 = bar_M1(j, i);
        const double m2 = bar_M2(j, i);
        if (m1 != 0.0 || m2 != 0.0) {
          const double chv = params.c[i] + sum_hv[i] - prev.M_HV(i, j);
          const H2vGrad g = h2v_grad(w, chv, ct1, ct2);
          accum.W(i, j) += m1 * g.dm1_dw + m2 * g.dm2_dw;
          bar_chv(i, j) += m1 * g.dm1_dx + m2 * g.dm2_dx;
          bar_ct1(j, i) += m1 * g.dm1_dt1 + m2 * g.dm2_dt1;
          bar_ct2(j, i) += m1 * g.dm1_dt2 + m2 * g.dm2_dt2;
        }
      }
    }

    // cavity adjoints back onto the previous message state
    std::fill(col1.begin(), col1.end(), 0.0);
    std::fill(col2.begin(), col2.end(), 0.0);
    std::fill(row_x.begin(), row_x.end(), 0.0);
    for (std::size_t j = 0; j < V; ++j) {
      for (std::size_t i = 0; i < H; ++i) {
        col1[j] += bar_ct1(j, i);
        col2[j] += bar_ct2(j, i);
      }
    }
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < V; ++j) row_x[i] += bar_chv(i, j);
    }
    for (std::size_t j = 0; j < V; ++j) {
      bar_u1[j] += col1[j];
      for (std::size_t i = 0; i < H; ++i) {
        next_M1(j, i) = col1[j] - bar_ct1(j, i);
        next_M2(j, i) = col2[j] - bar_ct2(j, i);
      }
    }
    for (std::size_t i = 0; i < H; ++i) {
      accum.c[i] += row_x[i];
      for (std::size_t j = 0; j < V; ++j) next_HV(i, j) = row_x[i] - bar_chv(i, j);
    }

    bar_M1 = std::move(next_M1);
    bar_M2 = std::move(next_M2);
    bar_HV = std::move(next_HV);
  }
  // layer 0 messages are constants; u1 maps to b on target positions
  // (u1 = b when q = 0; u1 = v / eps is data when q = 1)
  for (std::size_t j = 0; j < V; ++j) {
    if (!q[j]) accum.b[j] += bar_u1[j];
  }
  (void)cfg;
  return nats;
}

double grbm_loss_backward(const GrbmParams &params, const GrbmConfig &cfg,
                          const std::vector<double> &v, const QueryMask &q, GrbmGrad *accum) {
  const auto fwd = grbm_forward(params, v, q, cfg);
  if (accum == nullptr) return grbm_sample_loss(fwd, v, q);
  return grbm_backward(params, cfg, v, q, fwd.trace, *accum);
}

}  // namespace qtbp
