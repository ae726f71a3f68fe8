// SPDX-License-Identifier: Apache-2.0

#include "qtbp/flatten.hpp"

#include <stdexcept>

namespace qtbp {

namespace {

void append(std::vector<double> &out, const Matrix &m) {
  out.insert(out.end(), m.values().begin(), m.values().end());
}

void append(std::vector<double> &out, const std::vector<double> &v) {
  out.insert(out.end(), v.begin(), v.end());
}

class Reader {
 public:
  explicit Reader(const std::vector<double> &flat) : flat_(flat) {}

  void take(Matrix &m) {
    for (double &x : m.values()) x = next();
  }
  void take(std::vector<double> &v) {
    for (double &x : v) x = next();
  }
  double next() {
    if (pos_ >= flat_.size()) throw std::invalid_argument("flat vector too short");
    return flat_[pos_++];
  }
  void finish() const {
    if (pos_ != flat_.size()) throw std::invalid_argument("flat vector size mismatch");
  }

 private:
  const std::vector<double> &flat_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<double> flatten(const RbmParams &p) {
  std::vector<double> out;
  out.reserve(p.W.size() + p.c_V.size() + p.c_H.size() + 1);
  append(out, p.W);
  append(out, p.c_V);
  append(out, p.c_H);
  out.push_back(p.tau);
  return out;
}

void unflatten(const std::vector<double> &flat, RbmParams &p) {
  Reader r(flat);
  r.take(p.W);
  r.take(p.c_V);
  r.take(p.c_H);
  p.tau = r.next();
  r.finish();
}

std::vector<double> flatten(const RbmGrad &g) {
  std::vector<double> out;
  append(out, g.W);
  append(out, g.c_V);
  append(out, g.c_H);
  out.push_back(g.tau);
  return out;
}

std::vector<double> flatten(const DbmParams &p) {
  std::vector<double> out;
  append(out, p.W_H1V);
  append(out, p.W_H2H1);
  append(out, p.c_V);
  append(out, p.c_H1);
  append(out, p.c_H2);
  out.push_back(p.tau);
  return out;
}

void unflatten(const std::vector<double> &flat, DbmParams &p) {
  Reader r(flat);
  r.take(p.W_H1V);
  r.take(p.W_H2H1);
  r.take(p.c_V);
  r.take(p.c_H1);
  r.take(p.c_H2);
  p.tau = r.next();
  r.finish();
}

std::vector<double> flatten(const DbmGrad &g) {
  std::vector<double> out;
  append(out, g.W_H1V);
  append(out, g.W_H2H1);
  append(out, g.c_V);
  append(out, g.c_H1);
  append(out, g.c_H2);
  out.push_back(g.tau);
  return out;
}

std::vector<double> flatten(const GrbmParams &p) {
  std::vector<double> out;
  append(out, p.W);
  append(out, p.b);
  append(out, p.c);
  return out;
}

void unflatten(const std::vector<double> &flat, GrbmParams &p) {
  Reader r(flat);
  r.take(p.W);
  r.take(p.b);
  r.take(p.c);
  r.finish();
}

std::vector<double> flatten(const GrbmGrad &g) {
  std::vector<double> out;
  append(out, g.W);
  append(out, g.b);
  append(out, g.c);
  return out;
}

std::vector<double> flatten(const GmrfParams &p) {
  std::vector<double> out;
  append(out, p.pot_ud);
  append(out, p.pot_lr);
  append(out, p.pot_d1);
  append(out, p.pot_d2);
  return out;
}

void unflatten(const std::vector<double> &flat, GmrfParams &p) {
  Reader r(flat);
  r.take(p.pot_ud);
  r.take(p.pot_lr);
  r.take(p.pot_d1);
  r.take(p.pot_d2);
  r.finish();
}

std::vector<double> flatten(const GmrfGrad &g) {
  std::vector<double> out;
  append(out, g.pot_ud);
  append(out, g.pot_lr);
  append(out, g.pot_d1);
  append(out, g.pot_d2);
  return out;
}

}  // namespace qtbp
