// SPDX-License-Identifier: Apache-2.0

#include "qtbp/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qtbp {

namespace {

void require_finite(double v, const char *name) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string(name) + " must be finite");
  }
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// sp(-|y|, T): the softplus correction terms of binary_transfer only ever
// see nonpositive arguments, so exp never overflows here.
double softplus_of_negative_abs(double y, double T) {
  if (T == 0.0) return 0.0;
  return T * std::log1p(std::exp(-std::abs(y) / T));
}

}  // namespace

Temperature::Temperature(double value) : value_(value) {
  if (!std::isfinite(value) || value < 0.0) {
    throw std::invalid_argument("temperature must be finite and >= 0");
  }
}

double tempered_softplus(double x, Temperature T) {
  require_finite(x, "x");
  if (T.is_zero()) return std::max(x, 0.0);
  // T*log(1+e^{x/T}) = max(x,0) + T*log(1+e^{-|x|/T})
  return std::max(x, 0.0) + T.value() * std::log1p(std::exp(-std::abs(x) / T.value()));
}

SoftplusGrad tempered_softplus_grad(double x, Temperature T) {
  if (T.is_zero()) {
    throw std::invalid_argument("tempered_softplus_grad requires T > 0");
  }
  const double t = T.value();
  const double z = x / t;
  SoftplusGrad g;
  g.dx = sigmoid(z);
  // d/dT [T log(1+e^{x/T})] = log(1+e^{x/T}) - (x/T) sigmoid(x/T)
  const double log_term = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
  g.dT = log_term - z * g.dx;
  return g;
}

double binary_transfer(double w, double x, Temperature T) {
  require_finite(w, "w");
  require_finite(x, "x");
  const double aw = std::abs(w);
  const double max_product = (w < 0.0 ? -1.0 : 1.0) * std::clamp(x, -aw, aw);
  const double t = T.value();
  return max_product + softplus_of_negative_abs(x + w, t) -
         softplus_of_negative_abs(x - w, t);
}

BinaryTransferGrad binary_transfer_grad(double w, double x, Temperature T) {
  if (T.is_zero()) {
    throw std::invalid_argument("binary_transfer_grad requires T > 0");
  }
  const double t = T.value();
  const double aw = std::abs(w);
  const double sum = x + w;
  const double diff = x - w;

  // d/dz sp(-|z|, T) = -sign(z) * sigmoid(-|z|/T)
  // d/dT sp(-|z|, T) = log(1+e^{-|z|/T}) + (|z|/T) sigmoid(-|z|/T)
  const auto sp_parts = [t](double z, double &dz, double &dT) {
    const double a = std::abs(z) / t;
    if (a > 745.0) {  // exp(-a) underflows; both contributions vanish
      dz = 0.0;
      dT = 0.0;
      return;
    }
    const double s = sigmoid(-a);
    dz = -sign(z) * s;
    dT = std::log1p(std::exp(-a)) + a * s;
  };

  double dsum_dz, dsum_dT, ddiff_dz, ddiff_dT;
  sp_parts(sum, dsum_dz, dsum_dT);
  sp_parts(diff, ddiff_dz, ddiff_dT);

  BinaryTransferGrad g;
  const double inside = std::abs(x) < aw ? 1.0 : 0.0;
  g.dx = sign(w) * inside + dsum_dz - ddiff_dz;
  g.dw = sign(x) * (1.0 - inside) + dsum_dz + ddiff_dz;
  g.dT = dsum_dT - ddiff_dT;
  return g;
}

double logit(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("logit requires p in [0, 1]");
  }
  if (p == 0.0) return -kLogitClip;
  if (p == 1.0) return kLogitClip;
  return std::clamp(std::log(p) - std::log1p(-p), -kLogitClip, kLogitClip);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logsumexp(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("logsumexp of empty vector");
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;  // all -inf, or a +-inf entry dominates
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

double tempered_logsumexp(std::span<const double> v, Temperature T) {
  if (v.empty()) throw std::invalid_argument("tempered_logsumexp of empty vector");
  const double m = *std::max_element(v.begin(), v.end());
  if (T.is_zero()) return m;
  const double t = T.value();
  double acc = 0.0;
  for (double x : v) acc += std::exp((x - m) / t);
  return m + t * std::log(acc);
}

void log_normalize(std::span<double> v) {
  const double z = logsumexp(v);
  for (double &x : v) x -= z;
}

std::vector<double> log_normalized(std::vector<double> v) {
  log_normalize(v);
  return v;
}

}  // namespace qtbp
