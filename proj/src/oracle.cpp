// SPDX-License-Identifier: Apache-2.0

#include "qtbp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qtbp/errors.hpp"
#include "qtbp/numerics.hpp"

namespace qtbp::oracle {

namespace {

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

// Iterates joint assignments in mixed-radix order, keeping evidence
// variables pinned. Returns false when exhausted.
bool advance(std::vector<int> &state, const std::vector<int> &cards, const Evidence &evidence) {
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (evidence[i].has_value()) continue;
    if (++state[i] < cards[i]) return true;
    state[i] = 0;
  }
  return false;
}

}  // namespace

std::size_t EnumerablePgm::joint_states() const {
  std::size_t total = 1;
  for (int c : cardinalities) {
    if (c < 1) throw std::invalid_argument("cardinalities must be >= 1");
    if (total > kMaxJointStates / static_cast<std::size_t>(c)) {
      throw CapacityError("joint state space exceeds the enumeration bound");
    }
    total *= static_cast<std::size_t>(c);
  }
  return total;
}

std::vector<std::vector<double>> exact_conditional_marginals(
    const EnumerablePgm &pgm, const Evidence &evidence, const std::vector<std::size_t> &targets) {
  pgm.joint_states();
  const std::size_t n = pgm.n_variables();
  if (evidence.size() != n) throw std::invalid_argument("evidence size mismatch");
  for (std::size_t t : targets) {
    if (t >= n) throw std::invalid_argument("target index out of range");
    if (evidence[t].has_value()) throw std::invalid_argument("target variable has evidence");
  }

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> log_marg(targets.size());
  for (std::size_t k = 0; k < targets.size(); ++k) {
    log_marg[k].assign(static_cast<std::size_t>(pgm.cardinalities[targets[k]]), kNegInf);
  }
  double log_z = kNegInf;

  std::vector<int> state(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (evidence[i].has_value()) {
      const int v = *evidence[i];
      if (v < 0 || v >= pgm.cardinalities[i]) throw std::invalid_argument("evidence state out of range");
      state[i] = v;
    }
  }

  do {
    const double lp = pgm.log_potential(state);
    log_z = log_add(log_z, lp);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      auto &bucket = log_marg[k][static_cast<std::size_t>(state[targets[k]])];
      bucket = log_add(bucket, lp);
    }
  } while (advance(state, pgm.cardinalities, evidence));

  if (log_z == kNegInf) throw std::domain_error("all enumerated states have zero probability");

  std::vector<std::vector<double>> marginals(targets.size());
  for (std::size_t k = 0; k < targets.size(); ++k) {
    marginals[k].resize(log_marg[k].size());
    for (std::size_t s = 0; s < log_marg[k].size(); ++s) {
      marginals[k][s] = std::exp(log_marg[k][s] - log_z);
    }
  }
  return marginals;
}

std::vector<std::vector<int>> exact_sample(const EnumerablePgm &pgm, std::size_t n, Rng &rng) {
  const std::size_t total = pgm.joint_states();
  const std::size_t nv = pgm.n_variables();

  // Normalized CDF over the full joint, enumerated once.
  std::vector<double> logp(total);
  std::vector<int> state(nv, 0);
  Evidence no_evidence(nv);
  double max_lp = -std::numeric_limits<double>::infinity();
  std::size_t idx = 0;
  do {
    const double lp = pgm.log_potential(state);
    logp[idx++] = lp;
    max_lp = std::max(max_lp, lp);
  } while (advance(state, pgm.cardinalities, no_evidence));

  std::vector<double> cdf(total);
  double acc = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    acc += std::exp(logp[i] - max_lp);
    cdf[i] = acc;
  }

  std::vector<std::vector<int>> samples;
  samples.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double u = rng.uniform() * acc;
    const std::size_t pick = static_cast<std::size_t>(
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    // Decode the mixed-radix index back into an assignment; the iteration
    // order above increments variable 0 fastest.
    std::vector<int> assignment(nv);
    std::size_t rest = std::min(pick, total - 1);
    for (std::size_t i = 0; i < nv; ++i) {
      const auto c = static_cast<std::size_t>(pgm.cardinalities[i]);
      assignment[i] = static_cast<int>(rest % c);
      rest /= c;
    }
    samples.push_back(std::move(assignment));
  }
  return samples;
}

std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double> &)> &f,
                                     std::vector<double> at, double h) {
  std::vector<double> grad(at.size());
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double keep = at[i];
    at[i] = keep + h;
    const double up = f(at);
    at[i] = keep - h;
    const double down = f(at);
    at[i] = keep;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

EnumerablePgm rbm_pgm(const RbmParams &params) {
  params.validate();
  const std::size_t V = params.visible();
  const std::size_t H = params.hidden();
  EnumerablePgm pgm;
  pgm.cardinalities.assign(V + H, 2);
  pgm.log_potential = [params, V, H](std::span<const int> state) {
    double phi = 0.0;
    for (std::size_t i = 0; i < H; ++i) {
      const double hs = state[V + i] ? 1.0 : -1.0;
      double row = 0.0;
      for (std::size_t j = 0; j < V; ++j) {
        row += params.W(i, j) * (state[j] ? 1.0 : -1.0);
      }
      phi += 0.5 * hs * (row + params.c_H[i]);
    }
    for (std::size_t j = 0; j < V; ++j) {
      phi += 0.5 * params.c_V[j] * (state[j] ? 1.0 : -1.0);
    }
    return phi;
  };
  return pgm;
}

EnumerablePgm dbm_pgm(const DbmParams &params) {
  // The stacked RBM potential differs from the DBM potential only by a
  // parameter-dependent constant, which enumeration normalizes away.
  return rbm_pgm(dbm_to_rbm(params));
}

EnumerablePgm gmrf_pgm(const GmrfParams &params, const ByteGrid &image) {
  params.validate();
  const std::size_t R = image.rows, C = image.cols, K = params.K;
  const GmrfUnaries unaries = gmrf_unary(image, params.noise, K);

  EnumerablePgm pgm;
  pgm.cardinalities.assign(R * C, static_cast<int>(K));
  pgm.log_potential = [params, unaries, R, C](std::span<const int> state) {
    double phi = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        const auto s = static_cast<std::size_t>(state[r * C + c]);
        phi += unaries.at(r, c)[s];
        // each undirected edge counted once, from its N/W/NW/NE end
        if (r + 1 < R) {
          phi += params.pot_ud(s, static_cast<std::size_t>(state[(r + 1) * C + c]));
        }
        if (c + 1 < C) {
          phi += params.pot_lr(s, static_cast<std::size_t>(state[r * C + c + 1]));
        }
        if (r + 1 < R && c + 1 < C) {
          phi += params.pot_d1(s, static_cast<std::size_t>(state[(r + 1) * C + c + 1]));
        }
        if (r + 1 < R && c >= 1) {
          phi += params.pot_d2(s, static_cast<std::size_t>(state[(r + 1) * C + c - 1]));
        }
      }
    }
    return phi;
  };
  return pgm;
}

std::vector<std::vector<double>> gmrf_exact_marginals(const GmrfParams &params,
                                                      const ByteGrid &image) {
  const EnumerablePgm pgm = gmrf_pgm(params, image);
  std::vector<std::size_t> targets(image.size());
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = i;
  return exact_conditional_marginals(pgm, Evidence(image.size()), targets);
}

std::vector<double> rbm_conditional_v1(const RbmParams &params,
                                       const std::vector<double> &x_signed, const QueryMask &q,
                                       std::vector<std::size_t> *targets_out) {
  const std::size_t V = params.visible();
  validate_query_mask(q, V);
  if (x_signed.size() != V) throw std::invalid_argument("data size mismatch");

  Evidence evidence(V + params.hidden());
  std::vector<std::size_t> targets;
  for (std::size_t j = 0; j < V; ++j) {
    if (q[j]) {
      evidence[j] = x_signed[j] > 0 ? 1 : 0;
    } else {
      targets.push_back(j);
    }
  }
  const auto marginals = exact_conditional_marginals(rbm_pgm(params), evidence, targets);
  std::vector<double> p1(targets.size());
  for (std::size_t k = 0; k < targets.size(); ++k) p1[k] = marginals[k][1];
  if (targets_out != nullptr) *targets_out = std::move(targets);
  return p1;
}

}  // namespace qtbp::oracle
