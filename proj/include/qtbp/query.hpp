// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "qtbp/rbm.hpp"
#include "qtbp/rng.hpp"

namespace qtbp {

// Distribution over query masks.
struct QuerySpec {
  enum class Kind { Bernoulli, FixedMask, Patch };

  Kind kind = Kind::Bernoulli;
  double p_observe = 0.5;       // Bernoulli: P(entry is evidence)
  std::size_t patch_h = 0;      // Patch: masked-out block size
  std::size_t patch_w = 0;
  QueryMask fixed;              // FixedMask: the stored mask

  static QuerySpec bernoulli(double p_observe);
  static QuerySpec fixed_mask(QueryMask mask);
  static QuerySpec patch(std::size_t h, std::size_t w);

  void validate() const;
};

// Draws one mask over an R x C grid (vectors are 1 x V grids). Patch
// queries place a contiguous patch of targets uniformly, fully inside the
// grid; everything else is evidence.
QueryMask sample_query(const QuerySpec &spec, std::size_t rows, std::size_t cols, Rng &rng);
QueryMask sample_query(const QuerySpec &spec, std::size_t n_variables, Rng &rng);

// Resamples until the mask has at least one target. Throws if the spec can
// never produce one (validated configs exclude that case up front).
QueryMask sample_query_with_targets(const QuerySpec &spec, std::size_t rows, std::size_t cols,
                                    Rng &rng);

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before logs.
inline constexpr double kProbClamp = 1e-12;

struct CeResult {
  double total_bits = 0.0;
  std::size_t n_predicted = 0;
};

// Cross-entropy in bits over target positions (q_j = 0) only.
CeResult masked_ce_binary(const std::vector<std::uint8_t> &v, const std::vector<double> &v_hat,
                          const QueryMask &q);

// Gaussian predictive negative log-density in bits over target positions.
CeResult masked_ce_gaussian(const std::vector<double> &v, const std::vector<double> &mean,
                            const std::vector<double> &var, const QueryMask &q);

// Categorical cross-entropy in bits over all positions. probs[i] holds the
// probability of each class at position i; truth[i] is the class index.
CeResult ce_categorical(const std::vector<std::uint8_t> &truth,
                        const std::vector<std::vector<double>> &probs);

// Average cross-entropy per predicted variable.
double nce(const CeResult &ce);
double nce(double total_bits, std::size_t n_predicted);

}  // namespace qtbp
