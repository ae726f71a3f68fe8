// SPDX-License-Identifier: Apache-2.0

#include "qtbp/numerics.hpp"

#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "qtbp/rng.hpp"

using namespace qtbp;

TEST_CASE("tempered softplus values") {
  CHECK(tempered_softplus(0.0, Temperature(1.0)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(tempered_softplus(5.0, Temperature(0.0)) == 5.0);
  CHECK(tempered_softplus(-3.0, Temperature(0.0)) == 0.0);
  // 0.5 * ln(1 + e^4)
  CHECK(tempered_softplus(2.0, Temperature(0.5)) == doctest::Approx(2.009075).epsilon(1e-6));
}

TEST_CASE("tempered softplus is robust to huge arguments") {
  CHECK(tempered_softplus(1e6, Temperature(1.0)) == doctest::Approx(1e6));
  CHECK(tempered_softplus(-1e6, Temperature(1.0)) == 0.0);
  CHECK(tempered_softplus(1e6, Temperature(1e-6)) == doctest::Approx(1e6));
  CHECK(std::isfinite(tempered_softplus(-1e6, Temperature(1e-6))));
}

TEST_CASE("tempered softplus rejects invalid input") {
  CHECK_THROWS_AS(tempered_softplus(std::nan(""), Temperature(1.0)), std::invalid_argument);
  CHECK_THROWS_AS(Temperature(-0.5), std::invalid_argument);
  CHECK_THROWS_AS(Temperature(std::nan("")), std::invalid_argument);
}

TEST_CASE("tempered softplus stays within the log2 band above max(x,0)") {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const double x = rng.uniform(-50.0, 50.0);
    const double t = rng.uniform(0.0, 2.0);
    const double gap = tempered_softplus(x, Temperature(t)) - std::max(x, 0.0);
    CHECK(gap >= -1e-12);
    CHECK(gap <= t * std::log(2.0) + 1e-12);
  }
}

TEST_CASE("binary transfer fixed values") {
  // zero input gives zero output at any weight and temperature
  for (double w : {-3.0, -0.2, 0.0, 1.0, 9.0}) {
    for (double t : {0.0, 0.3, 1.0}) {
      CHECK(binary_transfer(w, 0.0, Temperature(t)) == 0.0);
    }
  }
  // max-product branch truncates to the weight
  CHECK(binary_transfer(2.0, 5.0, Temperature(0.0)) == 2.0);
  // log(1+e^2) - log 2 - 1
  CHECK(binary_transfer(1.0, 1.0, Temperature(1.0)) == doctest::Approx(0.433781).epsilon(1e-6));
  // matches the unguarded closed form where it is safe to evaluate
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const double w = rng.uniform(-5.0, 5.0);
    const double x = rng.uniform(-20.0, 20.0);
    const double direct =
        std::log1p(std::exp(x + w)) - std::log1p(std::exp(x - w)) - w;
    CHECK(binary_transfer(w, x, Temperature(1.0)) == doctest::Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("binary transfer handles saturated unaries without overflow") {
  const double v = binary_transfer(2.5, 1000.0, Temperature(1.0));
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(std::isfinite(binary_transfer(-4.0, -1e6, Temperature(0.5))));
}

TEST_CASE("binary transfer properties") {
  Rng rng(77);
  for (int i = 0; i < 2000; ++i) {
    const double w = rng.uniform(-10.0, 10.0);
    const double x = rng.uniform(-50.0, 50.0);
    const double t = rng.uniform(0.0, 1.0);
    const Temperature T(t);

    // odd symmetry in x
    CHECK(binary_transfer(w, -x, T) == doctest::Approx(-binary_transfer(w, x, T)).epsilon(1e-12));
    // saturation for T <= 1
    CHECK(std::abs(binary_transfer(w, x, T)) <= std::abs(w) + 1e-12);
    // monotone in x, direction set by the sign of w
    const double lo = binary_transfer(w, x, T);
    const double hi = binary_transfer(w, x + rng.uniform(0.0, 5.0), T);
    if (w >= 0.0) {
      CHECK(hi >= lo - 1e-12);
    } else {
      CHECK(hi <= lo + 1e-12);
    }
  }
}

TEST_CASE("binary transfer approaches the max-product limit as T -> 0") {
  Rng rng(13);
  for (int i = 0; i < 500; ++i) {
    const double w = rng.uniform(-5.0, 5.0);
    const double x = rng.uniform(-20.0, 20.0);
    const double cold = binary_transfer(w, x, Temperature(1e-6));
    const double mp = binary_transfer(w, x, Temperature(0.0));
    CHECK(std::abs(cold - mp) <= 1e-4);
  }
}

TEST_CASE("binary transfer gradients match finite differences") {
  Rng rng(99);
  const double h = 1e-6;
  for (int i = 0; i < 300; ++i) {
    const double w = rng.uniform(-4.0, 4.0);
    const double x = rng.uniform(-8.0, 8.0);
    const double t = rng.uniform(0.2, 1.5);
    const auto g = binary_transfer_grad(w, x, Temperature(t));
    const double fd_w = (binary_transfer(w + h, x, Temperature(t)) -
                         binary_transfer(w - h, x, Temperature(t))) / (2 * h);
    const double fd_x = (binary_transfer(w, x + h, Temperature(t)) -
                         binary_transfer(w, x - h, Temperature(t))) / (2 * h);
    const double fd_t = (binary_transfer(w, x, Temperature(t + h)) -
                         binary_transfer(w, x, Temperature(t - h))) / (2 * h);
    CHECK(g.dw == doctest::Approx(fd_w).epsilon(1e-4));
    CHECK(g.dx == doctest::Approx(fd_x).epsilon(1e-4));
    CHECK(g.dT == doctest::Approx(fd_t).epsilon(1e-4));
  }
}

TEST_CASE("logit and sigmoid") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(logit(1.0) == kLogitClip);
  CHECK(logit(0.0) == -kLogitClip);
  CHECK(logit(sigmoid(3.7)) == doctest::Approx(3.7).epsilon(1e-12));
  CHECK_THROWS_AS(logit(-0.1), std::invalid_argument);
  CHECK_THROWS_AS(logit(1.1), std::invalid_argument);
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(sigmoid(800.0) == 1.0);
}

TEST_CASE("log normalize") {
  auto two = log_normalized({0.0, 0.0});
  CHECK(two[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
  CHECK(two[1] == doctest::Approx(-std::log(2.0)).epsilon(1e-15));

  auto three = log_normalized({7.3, 7.3, 7.3});
  for (double v : three) CHECK(v == doctest::Approx(-std::log(3.0)).epsilon(1e-15));

  auto pair = log_normalized({1.0, 0.0});
  CHECK(pair[0] == doctest::Approx(-0.313262).epsilon(1e-6));
  CHECK(pair[1] == doctest::Approx(-1.313262).epsilon(1e-6));

  std::vector<double> empty;
  CHECK_THROWS_AS(log_normalize(std::span<double>(empty)), std::invalid_argument);

  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v(1 + rng.index(6));
    for (double &x : v) x = rng.uniform(-700.0, 700.0);
    log_normalize(v);
    double total = 0.0;
    for (double x : v) total += std::exp(x);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("tempered logsumexp") {
  std::vector<double> v{1.0, 2.0, 3.0};
  CHECK(tempered_logsumexp(v, Temperature(0.0)) == 3.0);
  CHECK(tempered_logsumexp(v, Temperature(1.0)) == doctest::Approx(logsumexp(v)).epsilon(1e-15));
  // T -> 0 approaches the max
  CHECK(tempered_logsumexp(v, Temperature(1e-3)) == doctest::Approx(3.0).epsilon(1e-6));
}
