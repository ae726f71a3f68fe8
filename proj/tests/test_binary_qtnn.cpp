// SPDX-License-Identifier: Apache-2.0

#include "qtbp/rbm.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "doctest.h"
#include "qtbp/numerics.hpp"
#include "qtbp/oracle.hpp"
#include "qtbp/rng.hpp"

using namespace qtbp;

namespace {

RbmParams random_rbm(std::size_t H, std::size_t V, Rng &rng, double w_scale = 1.0,
                     double bias_scale = 1.0) {
  RbmParams p;
  p.W = Matrix(H, V);
  for (double &w : p.W.values()) w = rng.uniform(-w_scale, w_scale);
  p.c_V.resize(V);
  p.c_H.resize(H);
  for (double &c : p.c_V) c = rng.uniform(-bias_scale, bias_scale);
  for (double &c : p.c_H) c = rng.uniform(-bias_scale, bias_scale);
  p.tau = tau_for_temperature(1.0);
  return p;
}

std::vector<double> random_signed(std::size_t V, Rng &rng) {
  std::vector<double> x(V);
  for (double &v : x) v = rng.bernoulli(0.5) ? 1.0 : -1.0;
  return x;
}

QueryMask random_mask(std::size_t V, Rng &rng) {
  QueryMask q(V);
  for (auto &b : q) b = rng.bernoulli(0.5) ? 1 : 0;
  return q;
}

}  // namespace

TEST_CASE("encode_unary") {
  CHECK(encode_unary({1.0, -1.0}, {1, 1}) == std::vector<double>{kLogitClip, -kLogitClip});
  CHECK(encode_unary({1.0, -1.0}, {0, 0}) == std::vector<double>{0.0, 0.0});
  CHECK(encode_unary({-1.0, 1.0, 1.0}, {1, 0, 1}) ==
        std::vector<double>{-kLogitClip, 0.0, kLogitClip});
  CHECK_THROWS_AS(encode_unary({0.5, 1.0}, {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(encode_unary({1.0, 1.0}, {1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(encode_unary({1.0}, {1, 1}), std::invalid_argument);
}

TEST_CASE("rbm_layer zero cases") {
  Rng rng(1);
  // all-zero weights give all-zero messages whatever the previous state
  RbmParams zero = random_rbm(3, 4, rng);
  zero.W.fill(0.0);
  BinaryMessages prev = BinaryMessages::zeros(3, 4);
  for (double &m : prev.M_HV.values()) m = rng.uniform(-1.0, 1.0);
  for (double &m : prev.M_VH.values()) m = rng.uniform(-1.0, 1.0);
  auto next = rbm_layer(zero, std::vector<double>(4, 0.0), prev);
  for (double m : next.M_HV.values()) CHECK(m == 0.0);
  for (double m : next.M_VH.values()) CHECK(m == 0.0);

  // zero state, zero biases, zero unary stays at zero
  RbmParams p = random_rbm(3, 4, rng);
  p.c_V.assign(4, 0.0);
  p.c_H.assign(3, 0.0);
  auto still = rbm_layer(p, std::vector<double>(4, 0.0), BinaryMessages::zeros(3, 4));
  for (double m : still.M_HV.values()) CHECK(m == 0.0);
  for (double m : still.M_VH.values()) CHECK(m == 0.0);
}

TEST_CASE("rbm_layer single edge evaluation") {
  RbmParams p;
  p.W = Matrix(1, 2);
  p.W(0, 0) = 1.0;
  p.W(0, 1) = 1.0;
  p.c_V.assign(2, 0.0);
  p.c_H.assign(1, 0.0);
  p.tau = tau_for_temperature(1.0);
  const std::vector<double> unary{kLogitClip, 0.0};
  auto msg = rbm_layer(p, unary, BinaryMessages::zeros(1, 2));
  CHECK(msg.M_HV(0, 0) == binary_transfer(1.0, kLogitClip, p.temperature()));
  CHECK(msg.M_HV(0, 1) == 0.0);
  CHECK(msg.M_VH(0, 0) == 0.0);
  CHECK(msg.M_VH(1, 0) == 0.0);
}

TEST_CASE("rbm_layer rejects shape mismatches") {
  Rng rng(2);
  RbmParams p = random_rbm(2, 3, rng);
  CHECK_THROWS_AS(rbm_layer(p, std::vector<double>(4, 0.0), BinaryMessages::zeros(2, 3)),
                  std::invalid_argument);
  CHECK_THROWS_AS(rbm_layer(p, std::vector<double>(3, 0.0), BinaryMessages::zeros(3, 2)),
                  std::invalid_argument);
}

TEST_CASE("rbm_forward with zero weights decouples the variables") {
  Rng rng(3);
  RbmParams p = random_rbm(4, 6, rng);
  p.W.fill(0.0);
  const auto x = random_signed(6, rng);
  const auto q = random_mask(6, rng);
  const auto result = rbm_forward(p, x, q, 10);
  const auto u = encode_unary(x, q);
  for (std::size_t j = 0; j < 6; ++j) {
    CHECK(result.v_hat[j] == doctest::Approx(sigmoid(u[j] + p.c_V[j])).epsilon(1e-15));
  }
}

TEST_CASE("rbm_forward on the symmetric single-edge model gives 0.5") {
  RbmParams p;
  p.W = Matrix(1, 1);
  p.W(0, 0) = 1.0;
  p.c_V.assign(1, 0.0);
  p.c_H.assign(1, 0.0);
  p.tau = tau_for_temperature(1.0);
  const auto result = rbm_forward(p, {1.0}, {0}, 10);
  CHECK(result.v_hat[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("rbm_forward matches enumeration on trees") {
  Rng rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    RbmParams p = random_rbm(1, 8, rng);
    const auto x = random_signed(8, rng);
    const auto q = random_mask(8, rng);
    const auto result = rbm_forward(p, x, q, 10);

    std::vector<std::size_t> targets;
    const auto exact = oracle::rbm_conditional_v1(p, x, q, &targets);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      CHECK(std::abs(result.v_hat[targets[k]] - exact[k]) < 1e-6);
    }
  }
}

TEST_CASE("evidence clamping") {
  Rng rng(5);
  RbmParams p = random_rbm(4, 6, rng);
  const auto x = random_signed(6, rng);
  QueryMask q(6, 1);
  const auto result = rbm_forward(p, x, q, 10);
  for (std::size_t j = 0; j < 6; ++j) {
    CHECK(std::abs(result.v_hat[j] - (x[j] + 1.0) / 2.0) < 1e-6);
  }
}

TEST_CASE("message saturation holds after every layer") {
  Rng rng(6);
  RbmParams p = random_rbm(3, 5, rng);
  const auto x = random_signed(5, rng);
  const auto q = random_mask(5, rng);
  const auto result = rbm_forward(p, x, q, 8);
  for (const auto &layer : result.trace.layers) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        CHECK(std::abs(layer.M_HV(i, j)) <= std::abs(p.W(i, j)) + 1e-12);
        CHECK(std::abs(layer.M_VH(j, i)) <= std::abs(p.W(i, j)) + 1e-12);
      }
    }
  }
}

TEST_CASE("rbm_forward is deterministic") {
  Rng rng(7);
  RbmParams p = random_rbm(3, 5, rng);
  const auto x = random_signed(5, rng);
  const auto q = random_mask(5, rng);
  const auto a = rbm_forward(p, x, q, 6);
  const auto b = rbm_forward(p, x, q, 6);
  CHECK(a.v_hat == b.v_hat);
  CHECK(a.h_hat == b.h_hat);
}

TEST_CASE("permutation equivariance over visible indices") {
  Rng rng(8);
  const std::size_t V = 7, H = 3;
  RbmParams p = random_rbm(H, V, rng);
  const auto x = random_signed(V, rng);
  const auto q = random_mask(V, rng);
  const auto base = rbm_forward(p, x, q, 6);

  std::vector<std::size_t> perm(V);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);

  RbmParams pp = p;
  std::vector<double> xp(V);
  QueryMask qp(V);
  for (std::size_t j = 0; j < V; ++j) {
    for (std::size_t i = 0; i < H; ++i) pp.W(i, j) = p.W(i, perm[j]);
    pp.c_V[j] = p.c_V[perm[j]];
    xp[j] = x[perm[j]];
    qp[j] = q[perm[j]];
  }
  const auto permuted = rbm_forward(pp, xp, qp, 6);
  for (std::size_t j = 0; j < V; ++j) {
    CHECK(permuted.v_hat[j] == doctest::Approx(base.v_hat[perm[j]]).epsilon(1e-12));
  }
}

TEST_CASE("dbm_to_rbm stacking") {
  Rng rng(9);
  DbmParams d = init_dbm(2, 2, 3, rng);
  const RbmParams stacked = dbm_to_rbm(d);
  CHECK(stacked.W.rows() == 2);
  CHECK(stacked.W.cols() == 5);
  CHECK(stacked.c_V.size() == 5);
  CHECK(stacked.c_H.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(stacked.W(i, j) == d.W_H1V(i, j));
    for (std::size_t k = 0; k < 2; ++k) CHECK(stacked.W(i, 3 + k) == d.W_H2H1(k, i));
  }

  CHECK(dbm_extend_query({1, 0, 1}, 2) == QueryMask{1, 0, 1, 1, 1});
  CHECK(dbm_extend_unary({-5.0, 0.0}, 2) == std::vector<double>{-5.0, 0.0, 0.0, 0.0});
}

TEST_CASE("dbm with a zero top layer reduces to the rbm bit for bit") {
  Rng rng(10);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t V = 2 + rng.index(4);
    const std::size_t H1 = 1 + rng.index(3);
    const std::size_t H2 = 1 + rng.index(3);
    DbmParams d;
    d.W_H1V = Matrix(H1, V);
    for (double &w : d.W_H1V.values()) w = rng.uniform(-1.0, 1.0);
    d.W_H2H1 = Matrix(H2, H1);  // zero block
    d.c_V.resize(V);
    d.c_H1.resize(H1);
    d.c_H2.resize(H2);
    for (double &c : d.c_V) c = rng.uniform(-1.0, 1.0);
    for (double &c : d.c_H1) c = rng.uniform(-1.0, 1.0);
    for (double &c : d.c_H2) c = rng.uniform(-1.0, 1.0);
    d.tau = tau_for_temperature(1.0);

    RbmParams flat;
    flat.W = d.W_H1V;
    flat.c_V = d.c_V;
    flat.c_H = d.c_H1;
    flat.tau = d.tau;

    const auto x = random_signed(V, rng);
    const auto q = random_mask(V, rng);
    const auto dbm = dbm_forward(d, x, q, 7);
    const auto rbm = rbm_forward(flat, x, q, 7);
    for (std::size_t j = 0; j < V; ++j) {
      CHECK(std::abs(dbm.v_hat[j] - rbm.v_hat[j]) <= 1e-15);
    }
  }
}

TEST_CASE("dbm_forward equals rbm_forward on the stacked model") {
  Rng rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    DbmParams d;
    d.W_H1V = Matrix(2, 3);
    d.W_H2H1 = Matrix(2, 2);
    for (double &w : d.W_H1V.values()) w = rng.uniform(-1.0, 1.0);
    for (double &w : d.W_H2H1.values()) w = rng.uniform(-1.0, 1.0);
    d.c_V = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    d.c_H1 = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    d.c_H2 = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    d.tau = tau_for_temperature(1.0);

    const auto x = random_signed(3, rng);
    const auto q = random_mask(3, rng);
    const auto via_dbm = dbm_forward(d, x, q, 5);

    const auto stacked = dbm_to_rbm(d);
    const auto unary = dbm_extend_unary(encode_unary(x, q), 2);
    const auto via_rbm = rbm_forward_unary(stacked, unary, 5);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(std::abs(via_dbm.v_hat[j] - via_rbm.v_hat[j]) <= 1e-15);
    }
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(std::abs(via_dbm.h2_hat[k] - via_rbm.v_hat[3 + k]) <= 1e-15);
      CHECK(std::abs(via_dbm.h1_hat[k] - via_rbm.h_hat[k]) <= 1e-15);
    }
  }
}

TEST_CASE("temperature reparameterization") {
  CHECK(temperature_of_tau(tau_for_temperature(1.0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(temperature_of_tau(tau_for_temperature(0.37)) == doctest::Approx(0.37).epsilon(1e-12));
  CHECK(temperature_of_tau(-1e9) >= kTemperatureFloor);
  CHECK_THROWS_AS(tau_for_temperature(1e-4), std::invalid_argument);
}
