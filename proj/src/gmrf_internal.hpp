// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "qtbp/gmrf.hpp"

namespace qtbp::internal {

inline bool neighbor_of(std::size_t r, std::size_t c, int d, std::size_t rows, std::size_t cols,
                        std::size_t &nr, std::size_t &nc) {
  const long rr = static_cast<long>(r) + kDirOffset[static_cast<std::size_t>(d)][0];
  const long cc = static_cast<long>(c) + kDirOffset[static_cast<std::size_t>(d)][1];
  if (rr < 0 || cc < 0 || rr >= static_cast<long>(rows) || cc >= static_cast<long>(cols)) {
    return false;
  }
  nr = static_cast<std::size_t>(rr);
  nc = static_cast<std::size_t>(cc);
  return true;
}

// Table slot for the edge carrying a message along direction d.
inline std::size_t table_index(int d) {
  switch (d) {
    case 0: case 4: return 0;  // up-down
    case 6: case 2: return 1;  // left-right
    case 7: case 3: return 2;  // principal diagonal
    default: return 3;         // secondary diagonal
  }
}

// Directions N, W, NW, NE read pot(source, target); opposites transpose.
inline bool source_first(int d) { return d == 0 || d == 6 || d == 7 || d == 1; }

inline const Matrix &table_for(const GmrfParams &p, std::size_t ti) {
  switch (ti) {
    case 0: return p.pot_ud;
    case 1: return p.pot_lr;
    case 2: return p.pot_d1;
    default: return p.pot_d2;
  }
}

// exp(pot - max) per table, shared by every layer of a forward or reverse
// sweep at T = 1.
struct EdgeTables {
  std::array<Matrix, 4> exp_pot;
  std::array<double, 4> max_pot{};
};

inline EdgeTables build_edge_tables(const GmrfParams &p) {
  EdgeTables t;
  for (std::size_t i = 0; i < 4; ++i) {
    const Matrix &pot = table_for(p, i);
    t.max_pot[i] = *std::max_element(pot.values().begin(), pot.values().end());
    t.exp_pot[i] = Matrix(p.K, p.K);
    for (std::size_t a = 0; a < p.K; ++a) {
      for (std::size_t b = 0; b < p.K; ++b) {
        t.exp_pot[i](a, b) = std::exp(pot(a, b) - t.max_pot[i]);
      }
    }
  }
  return t;
}

// Per-pixel totals of incoming messages.
inline void incoming_totals(const GmrfMessages &msgs, std::vector<double> &total) {
  const std::size_t R = msgs.rows, C = msgs.cols, K = msgs.K;
  total.assign(R * C * K, 0.0);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      double *dst = total.data() + (r * C + c) * K;
      for (int d = 0; d < kNumDirections; ++d) {
        std::size_t nr, nc;
        if (!neighbor_of(r, c, d, R, C, nr, nc)) continue;
        const double *msg = msgs.at(r, c, d);
        for (std::size_t k = 0; k < K; ++k) dst[k] += msg[k];
      }
    }
  }
}

// Per-pixel products exp(unary) * prod_d prob_d, the probability-space
// analogue of the log totals. Underflow (every state below the guard) is
// flagged so callers can fall back to exact log-space cavities; messages
// are scale-free so any surviving positive scale is fine.
inline constexpr double kProductGuard = 1e-250;

inline void incoming_products(const GmrfMessages &msgs, const std::vector<double> &exp_unary,
                              std::vector<double> &product, std::vector<char> &needs_fallback) {
  const std::size_t R = msgs.rows, C = msgs.cols, K = msgs.K;
  product.assign(exp_unary.begin(), exp_unary.end());
  needs_fallback.assign(R * C, 0);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      double *dst = product.data() + (r * C + c) * K;
      bool any_zero_factor = false;
      for (int d = 0; d < kNumDirections; ++d) {
        std::size_t nr, nc;
        if (!neighbor_of(r, c, d, R, C, nr, nc)) continue;
        const double *pm = msgs.prob_at(r, c, d);
        for (std::size_t k = 0; k < K; ++k) {
          any_zero_factor = any_zero_factor || pm[k] == 0.0;
          dst[k] *= pm[k];
        }
      }
      double mx = 0.0;
      for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, dst[k]);
      // a zero factor makes the cavity division indeterminate
      if (mx < kProductGuard || any_zero_factor) needs_fallback[r * C + c] = 1;
    }
  }
}

}  // namespace qtbp::internal

namespace qtbp {

// Per-pixel readout beliefs from a final message state. The fast route
// normalizes the pixel products; pixels whose products underflow fall
// back to the exact log-space sums (possible only when the trace kept its
// log copies).
std::vector<double> gmrf_readout_beliefs(const GmrfUnaries &unaries,
                                         const std::vector<double> &exp_unary,
                                         const GmrfMessages &last, bool logs_valid, bool fast);

}  // namespace qtbp
