// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <vector>

#include "qtbp/grid.hpp"
#include "qtbp/matrix.hpp"
#include "qtbp/numerics.hpp"

namespace qtbp {

// 8-connected grid MRF over K-state pixel labels. The model is fully
// convolutional: one shared log-potential table per factor direction
// (up-down, left-right, and the two diagonals). States 0..K-3 are contour
// clones, K-2 is IN, K-1 is OUT.
struct GmrfNoise {
  double p_contour = 0.0;  // P(pixel lit | label type)
  double p_in = 0.0;
  double p_out = 0.0;
};

struct GmrfParams {
  std::size_t K = 0;
  Matrix pot_ud;  // [K x K], pot_ud(s_up, s_down)
  Matrix pot_lr;  // pot_lr(s_left, s_right)
  Matrix pot_d1;  // principal diagonal, pot_d1(s_upleft, s_downright)
  Matrix pot_d2;  // secondary diagonal, pot_d2(s_upright, s_downleft)
  GmrfNoise noise;

  std::size_t n_clones() const { return K - 2; }
  std::size_t in_state() const { return K - 2; }
  std::size_t out_state() const { return K - 1; }
  void validate() const;
};

// Potentials ~ N(0, 0.1^2) to break clone symmetry; noise left for the
// caller to estimate from data.
GmrfParams init_gmrf(std::size_t n_clones, class Rng &rng);

// The 8 neighbor directions, in the order N, NE, E, SE, S, SW, W, NW.
inline constexpr int kNumDirections = 8;
inline constexpr std::array<std::array<int, 2>, 8> kDirOffset = {
    {{-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}}};
inline constexpr int opposite_direction(int d) { return (d + 4) % 8; }

// Incoming log-messages for one BP layer: slot (r, c, d) holds the
// length-K message arriving at pixel (r, c) from its neighbor in
// direction d. Every stored message is log-normalized; border slots with
// no neighbor stay at the uniform -log K and are never read. `prob`
// mirrors exp(m); the update and reverse sweeps work on the mirror and
// only pay for logarithms when a message is stored.
struct GmrfMessages {
  std::size_t rows = 0, cols = 0, K = 0;
  std::vector<double> m;
  std::vector<double> prob;

  static GmrfMessages uniform(std::size_t rows, std::size_t cols, std::size_t K);

  double *at(std::size_t r, std::size_t c, int d) {
    return m.data() + ((r * cols + c) * kNumDirections + static_cast<std::size_t>(d)) * K;
  }
  const double *at(std::size_t r, std::size_t c, int d) const {
    return m.data() + ((r * cols + c) * kNumDirections + static_cast<std::size_t>(d)) * K;
  }
  double *prob_at(std::size_t r, std::size_t c, int d) {
    return prob.data() + ((r * cols + c) * kNumDirections + static_cast<std::size_t>(d)) * K;
  }
  const double *prob_at(std::size_t r, std::size_t c, int d) const {
    return prob.data() + ((r * cols + c) * kNumDirections + static_cast<std::size_t>(d)) * K;
  }
};

// Per-pixel unary log-likelihood vectors, flattened [R*C*K].
struct GmrfUnaries {
  std::size_t rows = 0, cols = 0, K = 0;
  std::vector<double> u;

  double *at(std::size_t r, std::size_t c) { return u.data() + (r * cols + c) * K; }
  const double *at(std::size_t r, std::size_t c) const { return u.data() + (r * cols + c) * K; }
};

struct GmrfTrace {
  GmrfUnaries unaries;
  std::vector<GmrfMessages> layers;  // N+1 states
  // Training forwards skip materializing the log copies (the reverse
  // sweep works on the probability mirrors); everything else keeps them.
  bool logs_valid = true;
};

struct GmrfForwardResult {
  std::vector<double> beliefs;  // [R*C*K] probabilities, normalized per pixel
  GmrfTrace trace;
};

// Closed-form Bernoulli estimates of the three emission probabilities from
// labeled pairs. Throws if a label type never occurs in the corpus.
GmrfNoise estimate_noise(const std::vector<ByteGrid> &images, const std::vector<ByteGrid> &labels);

// unary[s] = y log p_s + (1-y) log(1-p_s) with the emission probability of
// state s; all clone states share p_contour. Probabilities are clamped to
// [1e-6, 1-1e-6] before the logs.
GmrfUnaries gmrf_unary(const ByteGrid &image, const GmrfNoise &noise, std::size_t K);

// One parallel layer: every directed message is recomputed from the
// previous state and log-normalized. T generalizes the source-state
// contraction through a tempered logsumexp; training uses T = 1.
GmrfMessages gmrf_layer(const GmrfParams &params, const GmrfUnaries &unaries,
                        const GmrfMessages &prev, Temperature T);

GmrfForwardResult gmrf_forward(const GmrfParams &params, const ByteGrid &image, int n_layers,
                               Temperature T = Temperature(1.0), bool keep_log_messages = true);

// Same pass writing into caller-owned buffers, so a training loop reuses
// one trace allocation across samples.
void gmrf_forward_reuse(const GmrfParams &params, const ByteGrid &image, int n_layers,
                        Temperature T, bool keep_log_messages, GmrfTrace &trace,
                        std::vector<double> &beliefs);

// Per-pixel 3-class probabilities: P(CONTOUR) pools all clone states.
struct LabelProbs {
  double contour = 0.0;
  double in = 0.0;
  double out = 0.0;
};
std::vector<LabelProbs> aggregate_labels(const std::vector<double> &beliefs, std::size_t K);

double label_prob(const LabelProbs &p, SegLabel label);
SegLabel argmax_label(const LabelProbs &p);
ByteGrid decode_labels(const std::vector<LabelProbs> &probs, std::size_t rows, std::size_t cols);

// Intersection over union of the foreground (IN or CONTOUR) pixel sets;
// 1 when both foregrounds are empty.
double iou(const ByteGrid &pred, const ByteGrid &truth);

}  // namespace qtbp
