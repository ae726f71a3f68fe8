// SPDX-License-Identifier: Apache-2.0

#include "qtbp/query.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "doctest.h"

using namespace qtbp;

TEST_CASE("bernoulli query extremes") {
  Rng rng(1);
  const auto all = sample_query(QuerySpec::bernoulli(1.0), 10, rng);
  CHECK(std::count(all.begin(), all.end(), 1) == 10);
  const auto none = sample_query(QuerySpec::bernoulli(0.0), 10, rng);
  CHECK(std::count(none.begin(), none.end(), 1) == 0);
  CHECK_THROWS_AS(QuerySpec::bernoulli(1.5), std::invalid_argument);
}

TEST_CASE("bernoulli query concentration") {
  Rng rng(7);
  const auto q = sample_query(QuerySpec::bernoulli(0.5), 10000, rng);
  const double frac = static_cast<double>(std::count(q.begin(), q.end(), 1)) / 10000.0;
  CHECK(frac > 0.48);
  CHECK(frac < 0.52);
}

TEST_CASE("query sampling is reproducible") {
  Rng a(123), b(123);
  CHECK(sample_query(QuerySpec::bernoulli(0.3), 50, a) ==
        sample_query(QuerySpec::bernoulli(0.3), 50, b));
}

TEST_CASE("patch query") {
  Rng rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    const auto q = sample_query(QuerySpec::patch(5, 5), 12, 12, rng);
    CHECK(std::count(q.begin(), q.end(), 0) == 25);
    // the zero block is contiguous and fully inside the grid
    std::size_t rmin = 12, rmax = 0, cmin = 12, cmax = 0;
    for (std::size_t r = 0; r < 12; ++r) {
      for (std::size_t c = 0; c < 12; ++c) {
        if (q[r * 12 + c] == 0) {
          rmin = std::min(rmin, r);
          rmax = std::max(rmax, r);
          cmin = std::min(cmin, c);
          cmax = std::max(cmax, c);
        }
      }
    }
    CHECK(rmax - rmin == 4);
    CHECK(cmax - cmin == 4);
  }
  CHECK_THROWS_AS(sample_query(QuerySpec::patch(13, 2), 12, 12, rng), std::invalid_argument);
}

TEST_CASE("fixed mask query") {
  Rng rng(3);
  QueryMask mask{1, 0, 1};
  CHECK(sample_query(QuerySpec::fixed_mask(mask), 3, rng) == mask);
  CHECK_THROWS_AS(sample_query(QuerySpec::fixed_mask(mask), 4, rng), std::invalid_argument);
}

TEST_CASE("sample_query_with_targets resamples degenerate masks") {
  Rng rng(4);
  const auto q = sample_query_with_targets(QuerySpec::bernoulli(0.9), 1, 8, rng);
  CHECK(std::find(q.begin(), q.end(), std::uint8_t{0}) != q.end());
}

TEST_CASE("masked binary cross-entropy") {
  // uniform prediction costs exactly one bit per predicted variable
  const std::vector<std::uint8_t> v{1, 0, 1, 1};
  const std::vector<double> uniform(4, 0.5);
  const auto ce = masked_ce_binary(v, uniform, {0, 0, 0, 0});
  CHECK(ce.total_bits == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(ce.n_predicted == 4);
  CHECK(nce(ce) == doctest::Approx(1.0).epsilon(1e-12));

  // perfect predictions cost nearly nothing
  const std::vector<double> perfect{1.0, 0.0, 1.0, 1.0};
  CHECK(masked_ce_binary(v, perfect, {0, 0, 0, 0}).total_bits ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-9));

  // -log2(0.9) - log2(0.1)
  const auto two = masked_ce_binary({1, 0}, {0.9, 0.9}, {0, 0});
  CHECK(two.total_bits == doctest::Approx(3.47393).epsilon(1e-5));

  // evidence positions are ignored entirely
  const auto masked = masked_ce_binary({1, 0}, {0.123, 0.9}, {1, 0});
  const auto masked2 = masked_ce_binary({1, 0}, {0.987, 0.9}, {1, 0});
  CHECK(masked.total_bits == masked2.total_bits);
  CHECK(masked.n_predicted == 1);
}

TEST_CASE("masked gaussian cross-entropy") {
  // at the mean with unit variance: 0.5*log2(2*pi)
  const auto at_mean = masked_ce_gaussian({2.0}, {2.0}, {1.0}, {0});
  CHECK(at_mean.total_bits == doctest::Approx(1.32575).epsilon(1e-5));

  // peak density exactly one: var = 1/(2*pi)
  const auto unit_peak = masked_ce_gaussian({0.0}, {0.0}, {1.0 / (2.0 * 3.14159265358979323846)}, {0});
  CHECK(unit_peak.total_bits == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(masked_ce_gaussian({0.0}, {0.0}, {0.0}, {0}), std::domain_error);
  CHECK_THROWS_AS(masked_ce_gaussian({0.0}, {0.0}, {-1.0}, {0}), std::domain_error);

  // variance on evidence positions is never touched
  CHECK_NOTHROW(masked_ce_gaussian({0.0}, {0.0}, {-1.0}, {1}));
}

TEST_CASE("categorical cross-entropy") {
  const auto onehot = ce_categorical({2}, {{0.0, 0.0, 1.0}});
  CHECK(onehot.total_bits == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));

  const auto uniform = ce_categorical({0, 1, 2}, {{1.0 / 3, 1.0 / 3, 1.0 / 3},
                                                  {1.0 / 3, 1.0 / 3, 1.0 / 3},
                                                  {1.0 / 3, 1.0 / 3, 1.0 / 3}});
  CHECK(nce(uniform) == doctest::Approx(std::log2(3.0)).epsilon(1e-12));

  const auto half = ce_categorical({0}, {{0.5, 0.25, 0.25}});
  CHECK(half.total_bits == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("nce rejects empty predictions") {
  CHECK_THROWS_AS(nce(0.0, 0), std::invalid_argument);
  CHECK(nce(3.0, 3) == doctest::Approx(1.0));
}
