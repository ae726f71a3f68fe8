// SPDX-License-Identifier: Apache-2.0

#include "qtbp/gmrf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "gmrf_internal.hpp"
#include "qtbp/rng.hpp"

namespace qtbp {

namespace {

constexpr double kNoiseClamp = 1e-6;

void require_table(const Matrix &t, std::size_t K, const char *name) {
  if (t.rows() != K || t.cols() != K) {
    throw std::invalid_argument(std::string(name) + " must be K x K");
  }
  for (double x : t.values()) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(name) + " has non-finite entry");
  }
}

// One parallel update of every directed message. At temperature 1 the
// whole cavity lives in probability space: pixel products of the incoming
// message mirrors replace per-edge exponentials, which BP's scale
// invariance permits, and the message normalizer falls out of the
// accumulator sums. Pixels whose products underflow take the exact
// log-space route.
void layer_pass_into(const GmrfParams &params, const GmrfUnaries &unaries,
                     const GmrfMessages &prev, Temperature T,
                     const internal::EdgeTables *tables, const std::vector<double> *exp_unary,
                     bool materialize_logs, bool prev_logs_valid, GmrfMessages &next) {
  const std::size_t R = unaries.rows, C = unaries.cols, K = params.K;
  const bool max_product = T.is_zero();
  const double t = T.value();

  std::vector<double> product;
  std::vector<char> fallback;
  std::vector<double> total;
  const bool fast = tables != nullptr && exp_unary != nullptr;
  if (fast) {
    internal::incoming_products(prev, *exp_unary, product, fallback);
  } else {
    internal::incoming_totals(prev, total);
  }

  // every valid slot is overwritten below; border slots are never read
  if (next.rows != R || next.cols != C || next.K != K) {
    next = GmrfMessages::uniform(R, C, K);
  }
  std::vector<double> cav(K), scaled(K), acc(K), y(K), log_total(K);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      for (int d = 0; d < kNumDirections; ++d) {
        std::size_t nr, nc;
        if (!internal::neighbor_of(r, c, d, R, C, nr, nc)) continue;

        const std::size_t ti = internal::table_index(d);
        const bool sf = internal::source_first(d);
        double *out = next.at(r, c, d);
        double *out_prob = next.prob_at(r, c, d);

        if (fast && fallback[nr * C + nc] == 0) {
          // cavity (up to scale) at the source pixel, excluding what it
          // heard from us
          const double *pprod = product.data() + (nr * C + nc) * K;
          const double *back = prev.prob_at(nr, nc, opposite_direction(d));
          for (std::size_t k = 0; k < K; ++k) scaled[k] = pprod[k] / back[k];

          const Matrix &ept = tables->exp_pot[ti];
          double sum = 0.0;
          for (std::size_t kp = 0; kp < K; ++kp) {
            double a = 0.0;
            if (sf) {
              for (std::size_t kn = 0; kn < K; ++kn) a += ept(kn, kp) * scaled[kn];
            } else {
              for (std::size_t kn = 0; kn < K; ++kn) a += ept(kp, kn) * scaled[kn];
            }
            acc[kp] = a;
            sum += a;
          }
          if (materialize_logs) {
            const double log_sum = std::log(sum);
            for (std::size_t kp = 0; kp < K; ++kp) {
              out_prob[kp] = acc[kp] / sum;
              out[kp] = std::log(acc[kp]) - log_sum;
            }
          } else {
            for (std::size_t kp = 0; kp < K; ++kp) out_prob[kp] = acc[kp] / sum;
          }
          continue;
        }

        // exact log-space cavity
        if (fast && !prev_logs_valid) {
          throw std::domain_error("gmrf message underflow in a log-free training trace");
        }
        const double *n_unary = unaries.at(nr, nc);
        const double *back = prev.at(nr, nc, opposite_direction(d));
        if (fast) {
          std::fill(log_total.begin(), log_total.end(), 0.0);
          for (int dd = 0; dd < kNumDirections; ++dd) {
            std::size_t ar, ac;
            if (!internal::neighbor_of(nr, nc, dd, R, C, ar, ac)) continue;
            const double *msg = prev.at(nr, nc, dd);
            for (std::size_t k = 0; k < K; ++k) log_total[k] += msg[k];
          }
        } else {
          const double *n_total = total.data() + (nr * C + nc) * K;
          std::copy(n_total, n_total + K, log_total.begin());
        }
        for (std::size_t k = 0; k < K; ++k) {
          cav[k] = n_unary[k] + log_total[k] - back[k];
        }

        const Matrix &pot = internal::table_for(params, ti);
        if (max_product) {
          for (std::size_t kp = 0; kp < K; ++kp) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t kn = 0; kn < K; ++kn) {
              best = std::max(best, (sf ? pot(kn, kp) : pot(kp, kn)) + cav[kn]);
            }
            y[kp] = best;
          }
        } else {
          // per-target-state max subtraction keeps arbitrarily small
          // temperatures finite
          for (std::size_t kp = 0; kp < K; ++kp) {
            double m = -std::numeric_limits<double>::infinity();
            for (std::size_t kn = 0; kn < K; ++kn) {
              scaled[kn] = (sf ? pot(kn, kp) : pot(kp, kn)) + cav[kn];
              m = std::max(m, scaled[kn]);
            }
            double a = 0.0;
            for (std::size_t kn = 0; kn < K; ++kn) a += std::exp((scaled[kn] - m) / t);
            y[kp] = m + t * std::log(a);
          }
        }
        log_normalize(y);
        for (std::size_t kp = 0; kp < K; ++kp) {
          out[kp] = y[kp];
          out_prob[kp] = std::exp(y[kp]);
        }
      }
    }
  }
}

GmrfMessages layer_pass(const GmrfParams &params, const GmrfUnaries &unaries,
                        const GmrfMessages &prev, Temperature T,
                        const internal::EdgeTables *tables, const std::vector<double> *exp_unary,
                        bool materialize_logs, bool prev_logs_valid) {
  GmrfMessages next = GmrfMessages::uniform(unaries.rows, unaries.cols, params.K);
  layer_pass_into(params, unaries, prev, T, tables, exp_unary, materialize_logs, prev_logs_valid,
                  next);
  return next;
}

std::vector<double> exp_unaries(const GmrfUnaries &unaries) {
  std::vector<double> out(unaries.u.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(unaries.u[i]);
  return out;
}

}  // namespace

std::vector<double> gmrf_readout_beliefs(const GmrfUnaries &unaries,
                                         const std::vector<double> &exp_unary,
                                         const GmrfMessages &last, bool logs_valid, bool fast) {
  const std::size_t R = unaries.rows, C = unaries.cols, K = unaries.K;
  std::vector<double> beliefs(R * C * K);
  if (fast) {
    std::vector<double> product;
    std::vector<char> fallback;
    internal::incoming_products(last, exp_unary, product, fallback);
    std::vector<double> z(K);
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t px = r * C + c;
        double *dst = beliefs.data() + px * K;
        if (fallback[px] == 0) {
          const double *p = product.data() + px * K;
          double sum = 0.0;
          for (std::size_t k = 0; k < K; ++k) sum += p[k];
          for (std::size_t k = 0; k < K; ++k) dst[k] = p[k] / sum;
          continue;
        }
        if (!logs_valid) {
          throw std::domain_error("gmrf belief underflow in a log-free training trace");
        }
        const double *u = unaries.at(r, c);
        for (std::size_t k = 0; k < K; ++k) z[k] = u[k];
        for (int d = 0; d < kNumDirections; ++d) {
          std::size_t nr, nc;
          if (!internal::neighbor_of(r, c, d, R, C, nr, nc)) continue;
          const double *msg = last.at(r, c, d);
          for (std::size_t k = 0; k < K; ++k) z[k] += msg[k];
        }
        log_normalize(z);
        for (std::size_t k = 0; k < K; ++k) dst[k] = std::exp(z[k]);
      }
    }
    return beliefs;
  }

  std::vector<double> z(K);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      const double *u = unaries.at(r, c);
      for (std::size_t k = 0; k < K; ++k) z[k] = u[k];
      for (int d = 0; d < kNumDirections; ++d) {
        std::size_t nr, nc;
        if (!internal::neighbor_of(r, c, d, R, C, nr, nc)) continue;
        const double *msg = last.at(r, c, d);
        for (std::size_t k = 0; k < K; ++k) z[k] += msg[k];
      }
      log_normalize(z);
      double *dst = beliefs.data() + (r * C + c) * K;
      for (std::size_t k = 0; k < K; ++k) dst[k] = std::exp(z[k]);
    }
  }
  return beliefs;
}

void GmrfParams::validate() const {
  if (K < 3) throw std::invalid_argument("GMRF needs K >= 3 (at least one clone plus IN and OUT)");
  require_table(pot_ud, K, "pot_ud");
  require_table(pot_lr, K, "pot_lr");
  require_table(pot_d1, K, "pot_d1");
  require_table(pot_d2, K, "pot_d2");
  for (double p : {noise.p_contour, noise.p_in, noise.p_out}) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("noise probabilities must be in [0,1]");
  }
}

GmrfParams init_gmrf(std::size_t n_clones, Rng &rng) {
  if (n_clones < 1) throw std::invalid_argument("need at least one clone state");
  GmrfParams p;
  p.K = n_clones + 2;
  for (Matrix *t : {&p.pot_ud, &p.pot_lr, &p.pot_d1, &p.pot_d2}) {
    *t = Matrix(p.K, p.K);
    for (double &x : t->values()) x = rng.normal(0.0, 0.1);
  }
  return p;
}

GmrfMessages GmrfMessages::uniform(std::size_t rows, std::size_t cols, std::size_t K) {
  GmrfMessages s;
  s.rows = rows;
  s.cols = cols;
  s.K = K;
  s.m.assign(rows * cols * kNumDirections * K, -std::log(static_cast<double>(K)));
  s.prob.assign(rows * cols * kNumDirections * K, 1.0 / static_cast<double>(K));
  return s;
}

GmrfNoise estimate_noise(const std::vector<ByteGrid> &images, const std::vector<ByteGrid> &labels) {
  if (images.size() != labels.size()) throw std::invalid_argument("images/labels count mismatch");
  double lit[3] = {0, 0, 0};
  double count[3] = {0, 0, 0};
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!(images[i].rows == labels[i].rows && images[i].cols == labels[i].cols)) {
      throw std::invalid_argument("image/label shape mismatch");
    }
    for (std::size_t px = 0; px < images[i].size(); ++px) {
      const std::uint8_t lab = labels[i].v[px];
      if (lab > 2) throw std::invalid_argument("label values must be 0 (OUT), 1 (IN) or 2 (CONTOUR)");
      count[lab] += 1.0;
      lit[lab] += images[i].v[px] ? 1.0 : 0.0;
    }
  }
  const char *names[3] = {"OUT", "IN", "CONTOUR"};
  for (int t = 0; t < 3; ++t) {
    if (count[t] == 0.0) {
      throw std::invalid_argument(std::string("label type ") + names[t] + " absent from corpus");
    }
  }
  GmrfNoise n;
  n.p_out = lit[0] / count[0];
  n.p_in = lit[1] / count[1];
  n.p_contour = lit[2] / count[2];
  return n;
}

GmrfUnaries gmrf_unary(const ByteGrid &image, const GmrfNoise &noise, std::size_t K) {
  if (K < 3) throw std::invalid_argument("K must be >= 3");
  const auto log_pair = [](double p) {
    const double q = std::clamp(p, kNoiseClamp, 1.0 - kNoiseClamp);
    return std::array<double, 2>{std::log(1.0 - q), std::log(q)};  // [log P(y=0), log P(y=1)]
  };
  const auto contour = log_pair(noise.p_contour);
  const auto in = log_pair(noise.p_in);
  const auto out = log_pair(noise.p_out);

  GmrfUnaries u;
  u.rows = image.rows;
  u.cols = image.cols;
  u.K = K;
  u.u.resize(image.size() * K);
  for (std::size_t px = 0; px < image.size(); ++px) {
    const int y = image.v[px] ? 1 : 0;
    double *dst = u.u.data() + px * K;
    for (std::size_t s = 0; s < K - 2; ++s) dst[s] = contour[static_cast<std::size_t>(y)];
    dst[K - 2] = in[static_cast<std::size_t>(y)];
    dst[K - 1] = out[static_cast<std::size_t>(y)];
  }
  return u;
}

GmrfMessages gmrf_layer(const GmrfParams &params, const GmrfUnaries &unaries,
                        const GmrfMessages &prev, Temperature T) {
  params.validate();
  const std::size_t R = unaries.rows, C = unaries.cols, K = params.K;
  if (unaries.K != K || prev.rows != R || prev.cols != C || prev.K != K) {
    throw std::invalid_argument("gmrf_layer shape mismatch");
  }
  if (T.value() == 1.0) {
    const internal::EdgeTables tables = internal::build_edge_tables(params);
    const std::vector<double> expu = exp_unaries(unaries);
    return layer_pass(params, unaries, prev, T, &tables, &expu, true, true);
  }
  return layer_pass(params, unaries, prev, T, nullptr, nullptr, true, true);
}

void gmrf_forward_reuse(const GmrfParams &params, const ByteGrid &image, int n_layers,
                        Temperature T, bool keep_log_messages, GmrfTrace &trace,
                        std::vector<double> &beliefs) {
  params.validate();
  if (n_layers < 1) throw std::invalid_argument("n_layers must be >= 1");
  const std::size_t R = image.rows, C = image.cols, K = params.K;
  if (R == 0 || C == 0) throw std::invalid_argument("empty image");

  internal::EdgeTables tables;
  const bool fast = T.value() == 1.0;
  if (fast) tables = internal::build_edge_tables(params);

  trace.unaries = gmrf_unary(image, params.noise, K);
  trace.logs_valid = keep_log_messages || !fast;
  const std::vector<double> expu = fast ? exp_unaries(trace.unaries) : std::vector<double>{};
  const auto n_states = static_cast<std::size_t>(n_layers) + 1;
  if (trace.layers.size() != n_states || trace.layers.front().rows != R ||
      trace.layers.front().cols != C || trace.layers.front().K != K) {
    trace.layers.assign(n_states, GmrfMessages());
    trace.layers.front() = GmrfMessages::uniform(R, C, K);
  }
  for (int n = 0; n < n_layers; ++n) {
    layer_pass_into(params, trace.unaries, trace.layers[static_cast<std::size_t>(n)], T,
                    fast ? &tables : nullptr, fast ? &expu : nullptr, trace.logs_valid,
                    trace.logs_valid, trace.layers[static_cast<std::size_t>(n) + 1]);
  }
  beliefs = gmrf_readout_beliefs(trace.unaries, expu, trace.layers.back(), trace.logs_valid, fast);
}

GmrfForwardResult gmrf_forward(const GmrfParams &params, const ByteGrid &image, int n_layers,
                               Temperature T, bool keep_log_messages) {
  GmrfForwardResult result;
  gmrf_forward_reuse(params, image, n_layers, T, keep_log_messages, result.trace, result.beliefs);
  return result;
}

std::vector<LabelProbs> aggregate_labels(const std::vector<double> &beliefs, std::size_t K) {
  if (K < 3 || beliefs.size() % K != 0) throw std::invalid_argument("bad belief vector");
  const std::size_t n = beliefs.size() / K;
  std::vector<LabelProbs> out(n);
  for (std::size_t px = 0; px < n; ++px) {
    const double *b = beliefs.data() + px * K;
    double contour = 0.0;
    for (std::size_t s = 0; s < K - 2; ++s) contour += b[s];
    out[px] = LabelProbs{contour, b[K - 2], b[K - 1]};
  }
  return out;
}

double label_prob(const LabelProbs &p, SegLabel label) {
  switch (label) {
    case SegLabel::Out: return p.out;
    case SegLabel::In: return p.in;
    case SegLabel::Contour: return p.contour;
  }
  throw std::invalid_argument("bad label");
}

SegLabel argmax_label(const LabelProbs &p) {
  if (p.out >= p.in && p.out >= p.contour) return SegLabel::Out;
  if (p.in >= p.contour) return SegLabel::In;
  return SegLabel::Contour;
}

ByteGrid decode_labels(const std::vector<LabelProbs> &probs, std::size_t rows, std::size_t cols) {
  if (probs.size() != rows * cols) throw std::invalid_argument("decode_labels shape mismatch");
  ByteGrid g(rows, cols);
  for (std::size_t px = 0; px < probs.size(); ++px) {
    g.v[px] = static_cast<std::uint8_t>(argmax_label(probs[px]));
  }
  return g;
}

double iou(const ByteGrid &pred, const ByteGrid &truth) {
  if (pred.rows != truth.rows || pred.cols != truth.cols) {
    throw std::invalid_argument("iou shape mismatch");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t px = 0; px < pred.size(); ++px) {
    const bool p = pred.v[px] == static_cast<std::uint8_t>(SegLabel::In) ||
                   pred.v[px] == static_cast<std::uint8_t>(SegLabel::Contour);
    const bool t = truth.v[px] == static_cast<std::uint8_t>(SegLabel::In) ||
                   truth.v[px] == static_cast<std::uint8_t>(SegLabel::Contour);
    inter += (p && t) ? 1 : 0;
    uni += (p || t) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace qtbp
