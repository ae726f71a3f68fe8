// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include "doctest.h"
#include "qtbp/flatten.hpp"
#include "qtbp/grad.hpp"
#include "qtbp/oracle.hpp"
#include "qtbp/query.hpp"
#include "qtbp/rng.hpp"

using namespace qtbp;

namespace {

// Relative error with a floor tied to the gradient scale of the instance,
// so exact-zero entries with finite-difference noise do not blow up.
double max_rel_err(const std::vector<double> &analytic, const std::vector<double> &fd) {
  REQUIRE(analytic.size() == fd.size());
  double scale = 0.0;
  for (double g : fd) scale = std::max(scale, std::abs(g));
  const double floor = std::max(1e-8, 1e-3 * scale);
  double worst = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(fd[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - fd[i]) / denom);
  }
  return worst;
}

struct BinaryBatch {
  std::vector<std::vector<std::uint8_t>> rows;
  std::vector<QueryMask> masks;
};

BinaryBatch random_binary_batch(std::size_t n, std::size_t V, Rng &rng) {
  BinaryBatch b;
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::uint8_t> row(V);
    for (auto &x : row) x = rng.bernoulli(0.5) ? 1 : 0;
    QueryMask q(V, 1);
    // force at least one target
    q[rng.index(V)] = 0;
    for (auto &m : q) {
      if (rng.bernoulli(0.5)) m = 0;
    }
    b.rows.push_back(std::move(row));
    b.masks.push_back(std::move(q));
  }
  return b;
}

}  // namespace

TEST_CASE("rbm gradients match finite differences") {
  Rng rng(21);
  RbmParams p;
  p.W = Matrix(4, 6);
  for (double &w : p.W.values()) w = rng.uniform(-0.7, 0.7);
  p.c_V.resize(6);
  p.c_H.resize(4);
  for (double &c : p.c_V) c = rng.uniform(-0.5, 0.5);
  for (double &c : p.c_H) c = rng.uniform(-0.5, 0.5);
  p.tau = tau_for_temperature(0.9);

  const auto batch = random_binary_batch(3, 6, rng);
  const int N = 5;

  RbmGrad grad = RbmGrad::zeros(p);
  for (std::size_t s = 0; s < batch.rows.size(); ++s) {
    rbm_loss_backward(p, batch.rows[s], batch.masks[s], N, &grad);
  }

  const auto loss_of = [&](const std::vector<double> &flat) {
    RbmParams q = p;
    unflatten(flat, q);
    double total = 0.0;
    for (std::size_t s = 0; s < batch.rows.size(); ++s) {
      total += rbm_loss_backward(q, batch.rows[s], batch.masks[s], N, nullptr);
    }
    return total;
  };
  const auto fd = oracle::finite_diff_grad(loss_of, flatten(p));
  CHECK(max_rel_err(flatten(grad), fd) < 1e-4);
}

TEST_CASE("dbm gradients match finite differences") {
  Rng rng(22);
  DbmParams p;
  p.W_H1V = Matrix(3, 5);
  p.W_H2H1 = Matrix(2, 3);
  for (double &w : p.W_H1V.values()) w = rng.uniform(-0.7, 0.7);
  for (double &w : p.W_H2H1.values()) w = rng.uniform(-0.7, 0.7);
  p.c_V.resize(5);
  p.c_H1.resize(3);
  p.c_H2.resize(2);
  for (double &c : p.c_V) c = rng.uniform(-0.5, 0.5);
  for (double &c : p.c_H1) c = rng.uniform(-0.5, 0.5);
  for (double &c : p.c_H2) c = rng.uniform(-0.5, 0.5);
  p.tau = tau_for_temperature(1.1);

  const auto batch = random_binary_batch(3, 5, rng);
  const int N = 5;

  DbmGrad grad = DbmGrad::zeros(p);
  for (std::size_t s = 0; s < batch.rows.size(); ++s) {
    dbm_loss_backward(p, batch.rows[s], batch.masks[s], N, &grad);
  }

  const auto loss_of = [&](const std::vector<double> &flat) {
    DbmParams q = p;
    unflatten(flat, q);
    double total = 0.0;
    for (std::size_t s = 0; s < batch.rows.size(); ++s) {
      total += dbm_loss_backward(q, batch.rows[s], batch.masks[s], N, nullptr);
    }
    return total;
  };
  const auto fd = oracle::finite_diff_grad(loss_of, flatten(p));
  CHECK(max_rel_err(flatten(grad), fd) < 1e-4);
}

TEST_CASE("grbm gradients match finite differences") {
  Rng rng(23);
  GrbmParams p;
  p.W = Matrix(2, 4);
  for (double &w : p.W.values()) w = rng.uniform(-0.6, 0.6);
  p.b.resize(4);
  p.c.resize(2);
  for (double &x : p.b) x = rng.uniform(-0.8, 0.8);
  for (double &x : p.c) x = rng.uniform(-0.8, 0.8);
  GrbmConfig cfg;
  cfg.n_layers = 5;

  std::vector<std::vector<double>> rows;
  std::vector<QueryMask> masks;
  for (int s = 0; s < 3; ++s) {
    std::vector<double> row(4);
    for (double &x : row) x = rng.uniform(-2.0, 2.0);
    QueryMask q{1, 0, 1, 0};
    if (s == 1) q = {0, 0, 1, 1};
    if (s == 2) q = {0, 0, 0, 0};
    rows.push_back(row);
    masks.push_back(q);
  }

  GrbmGrad grad = GrbmGrad::zeros(p);
  for (std::size_t s = 0; s < rows.size(); ++s) {
    grbm_loss_backward(p, cfg, rows[s], masks[s], &grad);
  }

  const auto loss_of = [&](const std::vector<double> &flat) {
    GrbmParams q = p;
    unflatten(flat, q);
    double total = 0.0;
    for (std::size_t s = 0; s < rows.size(); ++s) {
      total += grbm_loss_backward(q, cfg, rows[s], masks[s], nullptr);
    }
    return total;
  };
  const auto fd = oracle::finite_diff_grad(loss_of, flatten(p));
  CHECK(max_rel_err(flatten(grad), fd) < 1e-4);
}

TEST_CASE("gmrf gradients match finite differences") {
  Rng rng(24);
  GmrfParams p = init_gmrf(1, rng);  // K = 3
  p.noise = GmrfNoise{0.85, 0.08, 0.03};

  ByteGrid image(6, 6);
  ByteGrid labels(6, 6);
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 6; ++c) {
      const bool inside = r >= 2 && r <= 4 && c >= 2 && c <= 4;
      const bool border = inside && (r == 2 || r == 4 || c == 2 || c == 4);
      labels.at(r, c) = border ? 2 : (inside ? 1 : 0);
      image.at(r, c) = (border && rng.bernoulli(0.8)) || rng.bernoulli(0.05) ? 1 : 0;
    }
  }

  const int N = 4;
  GmrfGrad grad = GmrfGrad::zeros(p);
  gmrf_loss_backward(p, image, labels, N, Temperature(1.0), &grad);

  const auto loss_of = [&](const std::vector<double> &flat) {
    GmrfParams q = p;
    unflatten(flat, q);
    return gmrf_loss_backward(q, image, labels, N, Temperature(1.0), nullptr);
  };
  const auto fd = oracle::finite_diff_grad(loss_of, flatten(p));
  CHECK(max_rel_err(flatten(grad), fd) < 1e-4);
}

TEST_CASE("gmrf gradients at a non-unit temperature") {
  Rng rng(25);
  GmrfParams p = init_gmrf(1, rng);
  p.noise = GmrfNoise{0.8, 0.1, 0.05};
  ByteGrid image(3, 3);
  image.at(1, 1) = 1;
  ByteGrid labels(3, 3);
  labels.at(1, 1) = 2;
  labels.at(0, 0) = 1;

  const Temperature T(0.7);
  GmrfGrad grad = GmrfGrad::zeros(p);
  gmrf_loss_backward(p, image, labels, 3, T, &grad);

  const auto loss_of = [&](const std::vector<double> &flat) {
    GmrfParams q = p;
    unflatten(flat, q);
    return gmrf_loss_backward(q, image, labels, 3, T, nullptr);
  };
  const auto fd = oracle::finite_diff_grad(loss_of, flatten(p));
  CHECK(max_rel_err(flatten(grad), fd) < 1e-4);
}

TEST_CASE("saturated evidence contributes no gradient through zero weights") {
  RbmParams p;
  p.W = Matrix(2, 3);
  p.c_V.assign(3, 0.0);
  p.c_H.assign(2, 0.0);
  p.tau = tau_for_temperature(1.0);

  // all but one variable observed; zero weights keep everything decoupled
  RbmGrad grad = RbmGrad::zeros(p);
  rbm_loss_backward(p, {1, 0, 1}, {1, 1, 0}, 5, &grad);
  for (double g : grad.W.values()) CHECK(std::abs(g) < 1e-9);
}

TEST_CASE("weight sharing sums per-layer contributions") {
  // two-layer unrolling with separate parameter copies per layer; the
  // shared gradient must equal the sum of the per-copy gradients
  Rng rng(26);
  RbmParams p;
  p.W = Matrix(2, 3);
  for (double &w : p.W.values()) w = rng.uniform(-0.8, 0.8);
  p.c_V = {0.1, -0.2, 0.3};
  p.c_H = {0.2, -0.1};
  p.tau = tau_for_temperature(1.0);

  const std::vector<std::uint8_t> bits{1, 0, 1};
  const QueryMask q{0, 0, 1};

  // unshared forward: layer 1 uses W1, layer 2 uses W2, readout shared
  const auto unshared_loss = [&](const Matrix &W1, const Matrix &W2) {
    RbmParams p1 = p, p2 = p;
    p1.W = W1;
    p2.W = W2;
    const auto u = encode_unary(to_signed(bits), q);
    const auto m1 = rbm_layer(p1, u, BinaryMessages::zeros(2, 3));
    const auto m2 = rbm_layer(p2, u, m1);
    double nats = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      if (q[j]) continue;
      double z = u[j] + p.c_V[j];
      for (std::size_t i = 0; i < 2; ++i) z += m2.M_VH(j, i);
      const double prob = sigmoid(z);
      nats -= bits[j] ? std::log(prob) : std::log1p(-prob);
    }
    return nats;
  };

  // finite differences of the unshared construction, per copy
  const double h = 1e-6;
  Matrix fd_sum(2, 3);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      for (int copy = 0; copy < 2; ++copy) {
        Matrix up = p.W, down = p.W;
        up(i, j) += h;
        down(i, j) -= h;
        const double lu = copy == 0 ? unshared_loss(up, p.W) : unshared_loss(p.W, up);
        const double ld = copy == 0 ? unshared_loss(down, p.W) : unshared_loss(p.W, down);
        fd_sum(i, j) += (lu - ld) / (2.0 * h);
      }
    }
  }

  RbmGrad grad = RbmGrad::zeros(p);
  rbm_loss_backward(p, bits, q, 2, &grad);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(grad.W(i, j) == doctest::Approx(fd_sum(i, j)).epsilon(1e-5));
    }
  }
}
