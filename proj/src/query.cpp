// SPDX-License-Identifier: Apache-2.0

#include "qtbp/query.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qtbp {

namespace {
constexpr double kLn2 = 0.6931471805599453094172321214582;
}

QuerySpec QuerySpec::bernoulli(double p_observe) {
  QuerySpec s;
  s.kind = Kind::Bernoulli;
  s.p_observe = p_observe;
  s.validate();
  return s;
}

QuerySpec QuerySpec::fixed_mask(QueryMask mask) {
  QuerySpec s;
  s.kind = Kind::FixedMask;
  s.fixed = std::move(mask);
  s.validate();
  return s;
}

QuerySpec QuerySpec::patch(std::size_t h, std::size_t w) {
  QuerySpec s;
  s.kind = Kind::Patch;
  s.patch_h = h;
  s.patch_w = w;
  s.validate();
  return s;
}

void QuerySpec::validate() const {
  switch (kind) {
    case Kind::Bernoulli:
      if (!(p_observe >= 0.0 && p_observe <= 1.0)) {
        throw std::invalid_argument("p_observe must lie in [0, 1]");
      }
      break;
    case Kind::FixedMask:
      for (auto b : fixed) {
        if (b != 0 && b != 1) throw std::invalid_argument("fixed mask entries must be 0 or 1");
      }
      break;
    case Kind::Patch:
      if (patch_h == 0 || patch_w == 0) {
        throw std::invalid_argument("patch dimensions must be positive");
      }
      break;
  }
}

QueryMask sample_query(const QuerySpec &spec, std::size_t rows, std::size_t cols, Rng &rng) {
  spec.validate();
  const std::size_t n = rows * cols;
  switch (spec.kind) {
    case QuerySpec::Kind::Bernoulli: {
      QueryMask q(n);
      for (auto &b : q) b = rng.bernoulli(spec.p_observe) ? 1 : 0;
      return q;
    }
    case QuerySpec::Kind::FixedMask: {
      if (spec.fixed.size() != n) throw std::invalid_argument("fixed mask size mismatch");
      return spec.fixed;
    }
    case QuerySpec::Kind::Patch: {
      if (spec.patch_h > rows || spec.patch_w > cols) {
        throw std::invalid_argument("patch does not fit inside the grid");
      }
      const std::size_t r0 = rng.index(rows - spec.patch_h + 1);
      const std::size_t c0 = rng.index(cols - spec.patch_w + 1);
      QueryMask q(n, 1);
      for (std::size_t r = r0; r < r0 + spec.patch_h; ++r) {
        for (std::size_t c = c0; c < c0 + spec.patch_w; ++c) q[r * cols + c] = 0;
      }
      return q;
    }
  }
  throw std::invalid_argument("unknown query kind");
}

QueryMask sample_query(const QuerySpec &spec, std::size_t n_variables, Rng &rng) {
  return sample_query(spec, 1, n_variables, rng);
}

QueryMask sample_query_with_targets(const QuerySpec &spec, std::size_t rows, std::size_t cols,
                                    Rng &rng) {
  constexpr int kMaxAttempts = 10000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    QueryMask q = sample_query(spec, rows, cols, rng);
    if (std::find(q.begin(), q.end(), std::uint8_t{0}) != q.end()) return q;
  }
  throw std::invalid_argument("query spec produced no targets after 10000 draws");
}

CeResult masked_ce_binary(const std::vector<std::uint8_t> &v, const std::vector<double> &v_hat,
                          const QueryMask &q) {
  if (v.size() != v_hat.size() || v.size() != q.size()) {
    throw std::invalid_argument("masked_ce_binary shape mismatch");
  }
  CeResult out;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (q[j]) continue;
    const double p = std::clamp(v_hat[j], kProbClamp, 1.0 - kProbClamp);
    out.total_bits -= v[j] ? std::log2(p) : std::log2(1.0 - p);
    ++out.n_predicted;
  }
  return out;
}

CeResult masked_ce_gaussian(const std::vector<double> &v, const std::vector<double> &mean,
                            const std::vector<double> &var, const QueryMask &q) {
  if (v.size() != mean.size() || v.size() != var.size() || v.size() != q.size()) {
    throw std::invalid_argument("masked_ce_gaussian shape mismatch");
  }
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // ln(2*pi)
  CeResult out;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (q[j]) continue;
    if (!(var[j] > 0.0)) throw std::domain_error("masked_ce_gaussian requires positive variance");
    const double d = v[j] - mean[j];
    const double nats = 0.5 * (kLog2Pi + std::log(var[j])) + d * d / (2.0 * var[j]);
    out.total_bits += nats / kLn2;
    ++out.n_predicted;
  }
  return out;
}

CeResult ce_categorical(const std::vector<std::uint8_t> &truth,
                        const std::vector<std::vector<double>> &probs) {
  if (truth.size() != probs.size()) throw std::invalid_argument("ce_categorical shape mismatch");
  CeResult out;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= probs[i].size()) throw std::invalid_argument("class index out of range");
    const double p = std::clamp(probs[i][truth[i]], kProbClamp, 1.0 - kProbClamp);
    out.total_bits -= std::log2(p);
    ++out.n_predicted;
  }
  return out;
}

double nce(const CeResult &ce) { return nce(ce.total_bits, ce.n_predicted); }

double nce(double total_bits, std::size_t n_predicted) {
  if (n_predicted == 0) throw std::invalid_argument("nce requires at least one predicted variable");
  return total_bits / static_cast<double>(n_predicted);
}

}  // namespace qtbp
