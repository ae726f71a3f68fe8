// SPDX-License-Identifier: Apache-2.0

#include "qtbp/grbm.hpp"

#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "qtbp/numerics.hpp"
#include "qtbp/rng.hpp"

using namespace qtbp;

TEST_CASE("grbm unary encoding") {
  std::vector<double> t1, t2;

  grbm_encode_unary({2.0}, {1}, {0.0}, 1e-4, t1, t2);
  CHECK(t1 == std::vector<double>{2.0});
  CHECK(t2 == std::vector<double>{-5000.0});

  grbm_encode_unary({123.0}, {0}, {0.3}, 1e-4, t1, t2);
  CHECK(t1 == std::vector<double>{0.3});
  CHECK(t2 == std::vector<double>{-0.5});

  grbm_encode_unary({1.0, -1.0}, {1, 0}, {0.0, 0.0}, 0.5, t1, t2);
  CHECK(t1 == std::vector<double>{1.0, 0.0});
  CHECK(t2 == std::vector<double>{-1.0, -0.5});

  CHECK_THROWS_AS(grbm_encode_unary({1.0}, {1}, {0.0}, 0.0, t1, t2), std::invalid_argument);
}

TEST_CASE("visible to hidden message") {
  CHECK(visible_to_hidden_message(0.0, 3.7, -0.5) == 0.0);
  CHECK(visible_to_hidden_message(2.0, 1.0, -0.5) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(visible_to_hidden_message(1.0, 0.0, -0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(visible_to_hidden_message(1.0, 0.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(visible_to_hidden_message(1.0, 0.0, 0.5), std::domain_error);
}

TEST_CASE("gaussian belief approximation") {
  // zero weight: belief equals the cavity
  const auto same = gaussian_belief_approx(0.0, 1.3, 0.7, -0.4);
  CHECK(same.b1 == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(same.b2 == doctest::Approx(-0.4).epsilon(1e-12));

  // hidden unit pinned off: responsibility vanishes
  const auto off = gaussian_belief_approx(3.0, -100.0, 0.0, -0.5);
  CHECK(std::abs(off.b1 - 0.0) < 1e-10);
  CHECK(std::abs(off.b2 + 0.5) < 1e-10);

  // mixture-moment oracle at x=0, w=1, t1=0, t2=-1/2 (mu=0, s2=1):
  // r = sigmoid(1/2), mu_B = r, s2_B = 2r + (1-r) - r^2
  const double r = sigmoid(0.5);
  const double mu_b = r * 1.0;
  const double s2_b = r * 2.0 + (1.0 - r) * 1.0 - mu_b * mu_b;
  const auto mixed = gaussian_belief_approx(1.0, 0.0, 0.0, -0.5);
  CHECK(mixed.b1 == doctest::Approx(mu_b / s2_b).epsilon(1e-12));
  CHECK(mixed.b2 == doctest::Approx(-0.5 / s2_b).epsilon(1e-12));
}

TEST_CASE("hidden to visible message") {
  const auto zero = hidden_to_visible_message(0.0, 0.7, 1.3, -0.6);
  CHECK(zero.m1 == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(zero.m2 == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

  const auto off = hidden_to_visible_message(3.0, -100.0, 0.0, -0.5);
  CHECK(std::abs(off.m1) < 1e-10);
  CHECK(std::abs(off.m2) < 1e-10);

  const double r = sigmoid(0.5);
  const double s2_b = 1.0 + r * (1.0 - r);
  const auto mixed = hidden_to_visible_message(1.0, 0.0, 0.0, -0.5);
  CHECK(mixed.m1 == doctest::Approx(r / s2_b).epsilon(1e-12));
  CHECK(mixed.m2 == doctest::Approx(-0.5 / s2_b + 0.5).epsilon(1e-12));
}

TEST_CASE("monotone responsibility: larger hidden cavity shifts the mean up for w > 0") {
  double prev = -1e18;
  for (double x : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
    const auto belief = gaussian_belief_approx(1.5, x, 0.0, -0.5);
    const double mean = -belief.b1 / (2.0 * belief.b2);
    CHECK(mean > prev);
    prev = mean;
  }
}

TEST_CASE("grbm_forward with zero weights recovers the prior") {
  GrbmParams p;
  p.W = Matrix(2, 3);
  p.b = {0.4, -0.7, 1.2};
  p.c = {0.0, 0.0};
  GrbmConfig cfg;
  cfg.n_layers = 5;

  const auto prior = grbm_forward(p, {0.0, 0.0, 0.0}, {0, 0, 0}, cfg);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(prior.mean[j] == doctest::Approx(p.b[j]).epsilon(1e-12));
    CHECK(prior.var[j] == doctest::Approx(1.0).epsilon(1e-12));
  }

  const auto clamped = grbm_forward(p, {2.0, -1.0, 0.5}, {1, 1, 1}, cfg);
  CHECK(clamped.mean[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(clamped.mean[1] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(clamped.mean[2] == doctest::Approx(0.5).epsilon(1e-12));
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(clamped.var[j] == doctest::Approx(cfg.epsilon).epsilon(1e-12));
  }
}

TEST_CASE("grbm_forward with zero weights is independent of depth") {
  Rng rng(1);
  GrbmParams p;
  p.W = Matrix(2, 4);
  p.b = {0.1, 0.2, 0.3, 0.4};
  p.c = {0.5, -0.5};
  std::vector<double> v{1.0, -2.0, 0.0, 3.0};
  QueryMask q{1, 0, 1, 0};
  GrbmConfig c1;
  c1.n_layers = 1;
  GrbmConfig c9;
  c9.n_layers = 9;
  const auto a = grbm_forward(p, v, q, c1);
  const auto b = grbm_forward(p, v, q, c9);
  CHECK(a.mean == b.mean);
  CHECK(a.var == b.var);
}

TEST_CASE("grbm_forward fuzz: finite outputs and positive variance") {
  Rng rng(2);
  GrbmConfig cfg;
  cfg.n_layers = 8;
  for (int rep = 0; rep < 1000; ++rep) {
    GrbmParams p;
    p.W = Matrix(2, 4);
    for (double &w : p.W.values()) w = rng.uniform(-1.0, 1.0);
    p.b.resize(4);
    p.c.resize(2);
    for (double &x : p.b) x = rng.uniform(-2.0, 2.0);
    for (double &x : p.c) x = rng.uniform(-2.0, 2.0);
    std::vector<double> v(4);
    for (double &x : v) x = rng.uniform(-3.0, 3.0);
    QueryMask q(4);
    for (auto &bq : q) bq = rng.bernoulli(0.5) ? 1 : 0;

    const auto out = grbm_forward(p, v, q, cfg);
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(std::isfinite(out.mean[j]));
      CHECK(out.var[j] > 0.0);
    }
    for (double h : out.h_hat) {
      CHECK(h >= 0.0);
      CHECK(h <= 1.0);
    }
  }
}

TEST_CASE("grbm_forward determinism and permutation equivariance") {
  Rng rng(3);
  GrbmParams p;
  p.W = Matrix(3, 5);
  for (double &w : p.W.values()) w = rng.uniform(-0.8, 0.8);
  p.b.resize(5);
  for (double &x : p.b) x = rng.uniform(-1.0, 1.0);
  p.c.assign(3, 0.1);
  std::vector<double> v{0.5, -0.2, 1.5, 0.0, -1.0};
  QueryMask q{1, 0, 0, 1, 0};
  GrbmConfig cfg;
  cfg.n_layers = 6;

  const auto a = grbm_forward(p, v, q, cfg);
  const auto b = grbm_forward(p, v, q, cfg);
  CHECK(a.mean == b.mean);
  CHECK(a.var == b.var);

  // swap visible units 0 and 2 everywhere
  GrbmParams pp = p;
  for (std::size_t i = 0; i < 3; ++i) std::swap(pp.W(i, 0), pp.W(i, 2));
  std::swap(pp.b[0], pp.b[2]);
  auto vv = v;
  std::swap(vv[0], vv[2]);
  auto qq = q;
  std::swap(qq[0], qq[2]);
  const auto c = grbm_forward(pp, vv, qq, cfg);
  CHECK(c.mean[0] == doctest::Approx(a.mean[2]).epsilon(1e-12));
  CHECK(c.mean[2] == doctest::Approx(a.mean[0]).epsilon(1e-12));
  CHECK(c.mean[1] == doctest::Approx(a.mean[1]).epsilon(1e-12));
}
