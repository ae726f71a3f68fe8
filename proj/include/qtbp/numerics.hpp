// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

namespace qtbp {

// Messages in logit space are clipped to this bound; logit(0) and logit(1)
// saturate here instead of overflowing to +-inf.
inline constexpr double kLogitClip = 1000.0;

// Message-passing temperature. 0 selects max-product, 1 sum-product;
// intermediate values interpolate.
class Temperature {
 public:
  explicit Temperature(double value);
  double value() const { return value_; }
  bool is_zero() const { return value_ == 0.0; }

 private:
  double value_;
};

// T*log(1 + exp(x/T)) for T > 0, max(x, 0) for T = 0. Safe for |x| up to
// 1e6 and arbitrarily small positive T.
double tempered_softplus(double x, Temperature T);

// Transfer function of a binary pairwise factor with agreement score 0 and
// disagreement score -w:
//
//   f_w(x) = sign(w) * clip(x, -|w|, |w|)
//          + sp(-|x + w|, T) - sp(-|x - w|, T)
//
// which at T=1 equals log(1+e^{x+w}) - log(1+e^{x-w}) - w and at T=0 the
// clipped max-product form. The decomposition never exponentiates a large
// positive argument.
double binary_transfer(double w, double x, Temperature T);

// Partial derivatives of binary_transfer. Requires T > 0 (training keeps
// the temperature strictly positive by construction).
struct BinaryTransferGrad {
  double dw = 0.0;
  double dx = 0.0;
  double dT = 0.0;
};
BinaryTransferGrad binary_transfer_grad(double w, double x, Temperature T);

// Partial derivatives of tempered_softplus (T > 0).
struct SoftplusGrad {
  double dx = 0.0;
  double dT = 0.0;
};
SoftplusGrad tempered_softplus_grad(double x, Temperature T);

// logit(p) = log(p) - log(1-p), saturating to +-kLogitClip at p = 0, 1.
double logit(double p);

// Numerically stable 1 / (1 + e^{-x}).
double sigmoid(double x);

// log sum_i exp(v[i]) with max subtraction.
double logsumexp(std::span<const double> v);

// T * logsumexp(v / T) for T > 0; max(v) for T = 0.
double tempered_logsumexp(std::span<const double> v, Temperature T);

// v - logsumexp(v); exponentials of the result sum to 1.
void log_normalize(std::span<double> v);
std::vector<double> log_normalized(std::vector<double> v);

}  // namespace qtbp
