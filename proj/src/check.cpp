// SPDX-License-Identifier: Apache-2.0

#include "qtbp/check.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "qtbp/datasets.hpp"
#include "qtbp/flatten.hpp"
#include "qtbp/grad.hpp"
#include "qtbp/oracle.hpp"
#include "qtbp/query.hpp"

namespace qtbp::check {

namespace {

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::string format_err(const char *what, double worst, double bound) {
  std::ostringstream os;
  os.precision(3);
  os << what << " " << std::scientific << worst << " (bound " << bound << ")";
  return os.str();
}

RbmParams random_rbm(std::size_t H, std::size_t V, Rng &rng, double w_scale, double b_scale) {
  RbmParams p;
  p.W = Matrix(H, V);
  for (double &w : p.W.values()) w = rng.uniform(-w_scale, w_scale);
  p.c_V.resize(V);
  p.c_H.resize(H);
  for (double &c : p.c_V) c = rng.uniform(-b_scale, b_scale);
  for (double &c : p.c_H) c = rng.uniform(-b_scale, b_scale);
  p.tau = tau_for_temperature(1.0);
  return p;
}

double max_rel_err(const std::vector<double> &analytic, const std::vector<double> &fd) {
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

}  // namespace

SuiteResult tree_exactness_suite(std::uint64_t seed) {
  Timer timer;
  Rng rng = Rng::for_stream(seed, 101);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const RbmParams p = random_rbm(1, 8, rng, 1.0, 1.0);
    std::vector<double> x(8);
    for (double &v : x) v = rng.bernoulli(0.5) ? 1.0 : -1.0;
    QueryMask q(8);
    for (auto &b : q) b = rng.bernoulli(0.5) ? 1 : 0;

    const auto fwd = rbm_forward(p, x, q, 10);
    std::vector<std::size_t> targets;
    const auto exact = oracle::rbm_conditional_v1(p, x, q, &targets);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      worst = std::max(worst, std::abs(fwd.v_hat[targets[k]] - exact[k]));
    }
  }
  SuiteResult r;
  r.name = "tree-exactness";
  r.passed = worst < 1e-6;
  r.detail = format_err("max abs err", worst, 1e-6) + ", 100 instances";
  r.wall_s = timer.seconds();
  return r;
}

SuiteResult gradient_suite(std::uint64_t seed, double fault_scale) {
  Timer timer;
  Rng rng = Rng::for_stream(seed, 202);
  double worst = 0.0;
  std::ostringstream parts;

  const auto fault = [fault_scale](std::vector<double> g) {
    if (fault_scale != 0.0) {
      for (double &x : g) x *= 1.0 + fault_scale;
    }
    return g;
  };

  {  // RBM, V=6 H=4 N=5
    RbmParams p = random_rbm(4, 6, rng, 0.7, 0.5);
    p.tau = tau_for_temperature(0.9);
    std::vector<std::uint8_t> bits(6);
    QueryMask q(6);
    for (auto &b : bits) b = rng.bernoulli(0.5) ? 1 : 0;
    for (auto &b : q) b = rng.bernoulli(0.5) ? 1 : 0;
    q[0] = 0;
    RbmGrad grad = RbmGrad::zeros(p);
    rbm_loss_backward(p, bits, q, 5, &grad);
    const auto fd = oracle::finite_diff_grad(
        [&](const std::vector<double> &flat) {
          RbmParams at = p;
          unflatten(flat, at);
          return rbm_loss_backward(at, bits, q, 5, nullptr);
        },
        flatten(p));
    const double err = max_rel_err(fault(flatten(grad)), fd);
    parts << "rbm " << std::scientific << err;
    worst = std::max(worst, err);
  }
  {  // DBM, V=5 H1=3 H2=2 N=5
    Rng init = Rng::for_stream(seed, 203);
    DbmParams p;
    p.W_H1V = Matrix(3, 5);
    p.W_H2H1 = Matrix(2, 3);
    for (double &w : p.W_H1V.values()) w = init.uniform(-0.7, 0.7);
    for (double &w : p.W_H2H1.values()) w = init.uniform(-0.7, 0.7);
    p.c_V.resize(5);
    p.c_H1.resize(3);
    p.c_H2.resize(2);
    for (double &c : p.c_V) c = init.uniform(-0.5, 0.5);
    for (double &c : p.c_H1) c = init.uniform(-0.5, 0.5);
    for (double &c : p.c_H2) c = init.uniform(-0.5, 0.5);
    p.tau = tau_for_temperature(1.1);
    std::vector<std::uint8_t> bits{1, 0, 1, 1, 0};
    QueryMask q{1, 0, 0, 1, 0};
    DbmGrad grad = DbmGrad::zeros(p);
    dbm_loss_backward(p, bits, q, 5, &grad);
    const auto fd = oracle::finite_diff_grad(
        [&](const std::vector<double> &flat) {
          DbmParams at = p;
          unflatten(flat, at);
          return dbm_loss_backward(at, bits, q, 5, nullptr);
        },
        flatten(p));
    const double err = max_rel_err(fault(flatten(grad)), fd);
    parts << ", dbm " << std::scientific << err;
    worst = std::max(worst, err);
  }
  {  // GRBM, V=4 H=2 N=5
    Rng init = Rng::for_stream(seed, 204);
    GrbmParams p;
    p.W = Matrix(2, 4);
    for (double &w : p.W.values()) w = init.uniform(-0.6, 0.6);
    p.b.resize(4);
    p.c.resize(2);
    for (double &x : p.b) x = init.uniform(-0.8, 0.8);
    for (double &x : p.c) x = init.uniform(-0.8, 0.8);
    GrbmConfig cfg;
    cfg.n_layers = 5;
    std::vector<double> v{0.7, -1.2, 0.4, 1.9};
    QueryMask q{1, 0, 0, 1};
    GrbmGrad grad = GrbmGrad::zeros(p);
    grbm_loss_backward(p, cfg, v, q, &grad);
    const auto fd = oracle::finite_diff_grad(
        [&](const std::vector<double> &flat) {
          GrbmParams at = p;
          unflatten(flat, at);
          return grbm_loss_backward(at, cfg, v, q, nullptr);
        },
        flatten(p));
    const double err = max_rel_err(fault(flatten(grad)), fd);
    parts << ", grbm " << std::scientific << err;
    worst = std::max(worst, err);
  }
  {  // GMRF, 6x6 K=3 N=4
    Rng init = Rng::for_stream(seed, 205);
    GmrfParams p = init_gmrf(1, init);
    p.noise = GmrfNoise{0.85, 0.08, 0.03};
    ByteGrid image(6, 6), labels(6, 6);
    for (std::size_t r = 0; r < 6; ++r) {
      for (std::size_t c = 0; c < 6; ++c) {
        const bool inside = r >= 2 && r <= 4 && c >= 2 && c <= 4;
        const bool border = inside && (r == 2 || r == 4 || c == 2 || c == 4);
        labels.at(r, c) = border ? 2 : (inside ? 1 : 0);
        image.at(r, c) = (border && init.bernoulli(0.8)) || init.bernoulli(0.05) ? 1 : 0;
      }
    }
    GmrfGrad grad = GmrfGrad::zeros(p);
    gmrf_loss_backward(p, image, labels, 4, Temperature(1.0), &grad);
    const auto fd = oracle::finite_diff_grad(
        [&](const std::vector<double> &flat) {
          GmrfParams at = p;
          unflatten(flat, at);
          return gmrf_loss_backward(at, image, labels, 4, Temperature(1.0), nullptr);
        },
        flatten(p));
    const double err = max_rel_err(fault(flatten(grad)), fd);
    parts << ", gmrf " << std::scientific << err;
    worst = std::max(worst, err);
  }

  SuiteResult r;
  r.name = "gradient-exactness";
  r.passed = worst < 1e-4;
  r.detail = format_err("max rel err", worst, 1e-4) + " [" + parts.str() + "]";
  r.wall_s = timer.seconds();
  return r;
}

SuiteResult dbm_reduction_suite(std::uint64_t seed) {
  Timer timer;
  Rng rng = Rng::for_stream(seed, 303);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t V = 2 + rng.index(5);
    const std::size_t H1 = 1 + rng.index(4);
    const std::size_t H2 = 1 + rng.index(3);
    DbmParams d;
    d.W_H1V = Matrix(H1, V);
    for (double &w : d.W_H1V.values()) w = rng.uniform(-1.0, 1.0);
    d.W_H2H1 = Matrix(H2, H1);
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

    std::vector<double> x(V);
    for (double &v : x) v = rng.bernoulli(0.5) ? 1.0 : -1.0;
    QueryMask q(V);
    for (auto &b : q) b = rng.bernoulli(0.5) ? 1 : 0;

    const auto dbm = dbm_forward(d, x, q, 8);
    const auto rbm = rbm_forward(flat, x, q, 8);
    for (std::size_t j = 0; j < V; ++j) {
      worst = std::max(worst, std::abs(dbm.v_hat[j] - rbm.v_hat[j]));
    }
  }
  SuiteResult r;
  r.name = "dbm-reduction";
  r.passed = worst <= 1e-15;
  r.detail = format_err("max abs err", worst, 1e-15) + ", 50 instances";
  r.wall_s = timer.seconds();
  return r;
}

SuiteResult kernel_property_suite(std::uint64_t seed) {
  Timer timer;
  Rng rng = Rng::for_stream(seed, 404);
  double worst_odd = 0.0, worst_sat = 0.0, worst_mono = 0.0, worst_limit = 0.0, worst_sp = 0.0;
  for (int rep = 0; rep < 10000; ++rep) {
    const double w = rng.uniform(-10.0, 10.0);
    const double x = rng.uniform(-50.0, 50.0);
    const double t = rng.uniform(0.0, 1.0);
    const Temperature T(t);

    worst_odd = std::max(worst_odd,
                         std::abs(binary_transfer(w, -x, T) + binary_transfer(w, x, T)));
    worst_sat = std::max(worst_sat, std::abs(binary_transfer(w, x, T)) - std::abs(w));

    const double step = rng.uniform(0.0, 5.0);
    const double mono = (binary_transfer(w, x + step, T) - binary_transfer(w, x, T)) *
                        (w >= 0.0 ? 1.0 : -1.0);
    worst_mono = std::max(worst_mono, -mono);

    worst_limit = std::max(worst_limit, std::abs(binary_transfer(w, x, Temperature(1e-6)) -
                                                 binary_transfer(w, x, Temperature(0.0))));

    const double gap = tempered_softplus(x, T) - std::max(x, 0.0);
    worst_sp = std::max({worst_sp, -gap, gap - t * std::log(2.0)});
  }
  const bool passed = worst_odd < 1e-12 && worst_sat <= 1e-12 && worst_mono <= 1e-12 &&
                      worst_limit < 1e-4 && worst_sp <= 1e-12;
  SuiteResult r;
  r.name = "kernel-properties";
  r.passed = passed;
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << "odd " << worst_odd << ", sat " << worst_sat << ", mono "
     << worst_mono << ", T->0 " << worst_limit << ", sp band " << worst_sp
     << ", 10000 cases each";
  r.detail = os.str();
  r.wall_s = timer.seconds();
  return r;
}

SuiteResult gmrf_invariance_suite(std::uint64_t seed) {
  Timer timer;
  Rng rng = Rng::for_stream(seed, 505);
  double worst_shift = 0.0, worst_norm = 0.0;
  std::size_t cases = 0;
  for (int rep = 0; rep < 35; ++rep) {
    GmrfParams p = init_gmrf(1 + rng.index(3), rng);
    for (Matrix *t : {&p.pot_ud, &p.pot_lr, &p.pot_d1, &p.pot_d2}) {
      for (double &v : t->values()) v = rng.uniform(-0.8, 0.8);
    }
    p.noise = GmrfNoise{rng.uniform(0.6, 0.95), rng.uniform(0.01, 0.2), rng.uniform(0.01, 0.2)};
    ByteGrid image(8, 8);
    for (auto &v : image.v) v = rng.bernoulli(0.4) ? 1 : 0;

    const auto base = gmrf_forward(p, image, 5);
    for (std::size_t px = 0; px < image.size(); ++px) {
      double sum = 0.0;
      for (std::size_t k = 0; k < p.K; ++k) sum += base.beliefs[px * p.K + k];
      worst_norm = std::max(worst_norm, std::abs(sum - 1.0));
      ++cases;
    }

    GmrfParams shifted = p;
    Matrix *mutable_tables[4] = {&shifted.pot_ud, &shifted.pot_lr, &shifted.pot_d1,
                                 &shifted.pot_d2};
    const std::size_t which = rng.index(4);
    const double c = rng.uniform(-4.0, 4.0);
    for (double &v : mutable_tables[which]->values()) v += c;
    const auto moved = gmrf_forward(shifted, image, 5);
    for (std::size_t i = 0; i < base.beliefs.size(); ++i) {
      worst_shift = std::max(worst_shift, std::abs(base.beliefs[i] - moved.beliefs[i]));
      ++cases;
    }
  }
  SuiteResult r;
  r.name = "gmrf-invariances";
  r.passed = worst_shift < 1e-9 && worst_norm < 1e-9 && cases >= 10000;
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << "additive-shift " << worst_shift << ", normalization " << worst_norm
     << ", " << cases << " checked values";
  r.detail = os.str();
  r.wall_s = timer.seconds();
  return r;
}

SuiteResult loopy_sanity_suite(std::uint64_t seed) {
  Timer timer;
  Rng rng = Rng::for_stream(seed, 606);
  double worst_avg_tv = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    GmrfParams p = init_gmrf(1, rng);
    for (Matrix *t : {&p.pot_ud, &p.pot_lr, &p.pot_d1, &p.pot_d2}) {
      for (double &v : t->values()) v = rng.normal(0.0, 0.3);
    }
    p.noise = GmrfNoise{0.8, 0.1, 0.05};
    ByteGrid image(3, 3);
    for (auto &v : image.v) v = rng.bernoulli(0.4) ? 1 : 0;

    const auto fwd = gmrf_forward(p, image, 20);
    const auto exact = oracle::gmrf_exact_marginals(p, image);
    double tv_sum = 0.0;
    for (std::size_t px = 0; px < 9; ++px) {
      double tv = 0.0;
      for (std::size_t k = 0; k < p.K; ++k) {
        tv += std::abs(fwd.beliefs[px * p.K + k] - exact[px][k]);
      }
      tv_sum += 0.5 * tv;
    }
    worst_avg_tv = std::max(worst_avg_tv, tv_sum / 9.0);
  }
  SuiteResult r;
  r.name = "loopy-sanity";
  r.passed = worst_avg_tv < 0.05;
  r.detail = format_err("worst avg total variation", worst_avg_tv, 0.05) + ", 5 instances";
  r.wall_s = timer.seconds();
  return r;
}

SuiteResult grbm_suite(std::uint64_t seed) {
  Timer timer;
  Rng rng = Rng::for_stream(seed, 707);
  bool passed = true;
  std::string note = "prior/clamp recovery, depth independence, 1000-draw fuzz";

  GrbmParams p;
  p.W = Matrix(2, 3);
  p.b = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  p.c = {0.3, -0.2};
  GrbmConfig cfg;
  cfg.n_layers = 6;

  const auto prior = grbm_forward(p, {0, 0, 0}, {0, 0, 0}, cfg);
  for (std::size_t j = 0; j < 3; ++j) {
    passed = passed && std::abs(prior.mean[j] - p.b[j]) < 1e-12 &&
             std::abs(prior.var[j] - 1.0) < 1e-12;
  }
  const auto clamped = grbm_forward(p, {1.5, -0.5, 0.25}, {1, 1, 1}, cfg);
  passed = passed && std::abs(clamped.mean[0] - 1.5) < 1e-9 &&
           std::abs(clamped.var[0] - cfg.epsilon) < 1e-12;

  GrbmConfig shallow = cfg;
  shallow.n_layers = 1;
  const auto deep = grbm_forward(p, {0, 0, 0}, {0, 0, 0}, cfg);
  const auto once = grbm_forward(p, {0, 0, 0}, {0, 0, 0}, shallow);
  passed = passed && deep.mean == once.mean && deep.var == once.var;

  for (int rep = 0; rep < 1000 && passed; ++rep) {
    GrbmParams fz;
    fz.W = Matrix(2, 4);
    for (double &w : fz.W.values()) w = rng.uniform(-1.0, 1.0);
    fz.b.resize(4);
    fz.c.resize(2);
    for (double &x : fz.b) x = rng.uniform(-2.0, 2.0);
    for (double &x : fz.c) x = rng.uniform(-2.0, 2.0);
    std::vector<double> v(4);
    for (double &x : v) x = rng.uniform(-3.0, 3.0);
    QueryMask q(4);
    for (auto &b : q) b = rng.bernoulli(0.5) ? 1 : 0;
    GrbmConfig fuzz_cfg;
    fuzz_cfg.n_layers = 8;
    const auto out = grbm_forward(fz, v, q, fuzz_cfg);
    for (std::size_t j = 0; j < 4; ++j) {
      passed = passed && std::isfinite(out.mean[j]) && out.var[j] > 0.0;
    }
  }

  SuiteResult r;
  r.name = "grbm-forward";
  r.passed = passed;
  r.detail = note;
  r.wall_s = timer.seconds();
  return r;
}

SuiteResult oracle_suite(std::uint64_t seed) {
  Timer timer;
  Rng rng = Rng::for_stream(seed, 808);
  bool passed = true;
  double worst = 0.0;

  for (int rep = 0; rep < 10; ++rep) {
    const RbmParams p = random_rbm(2, 3, rng, 1.5, 1.0);
    const auto pgm = oracle::rbm_pgm(p);
    const auto marg =
        oracle::exact_conditional_marginals(pgm, oracle::Evidence(5), {0, 1, 2, 3, 4});
    for (const auto &m : marg) {
      worst = std::max(worst, std::abs(m[0] + m[1] - 1.0));
    }
    // conditioning consistency on variable pairs
    for (int b = 0; b < 2; ++b) {
      oracle::Evidence cond(5);
      cond[1] = b;
      const double p_ab = oracle::exact_conditional_marginals(pgm, cond, {0})[0][1];
      const double p_b = marg[1][static_cast<std::size_t>(b)];
      oracle::Evidence both(5);
      both[0] = 1;
      const double p_ba =
          oracle::exact_conditional_marginals(pgm, both, {1})[0][static_cast<std::size_t>(b)];
      const double p_a = marg[0][1];
      worst = std::max(worst, std::abs(p_ab * p_b - p_ba * p_a));
    }
  }
  passed = worst < 1e-10;

  // sampling frequency on the joint-flip-symmetric single-edge model
  RbmParams sym;
  sym.W = Matrix(1, 1);
  sym.W(0, 0) = 1.0;
  sym.c_V = {0.0};
  sym.c_H = {0.0};
  sym.tau = tau_for_temperature(1.0);
  const auto samples = oracle::exact_sample(oracle::rbm_pgm(sym), 100000, rng);
  double ones = 0.0;
  for (const auto &s : samples) ones += s[0];
  const double freq = ones / 100000.0;
  passed = passed && freq > 0.495 && freq < 0.505;

  SuiteResult r;
  r.name = "oracle-self-checks";
  r.passed = passed;
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << "max inconsistency " << worst << ", sample freq " << freq;
  r.detail = os.str();
  r.wall_s = timer.seconds();
  return r;
}

std::vector<SuiteResult> run_suites(const std::string &scope, std::uint64_t seed) {
  std::vector<SuiteResult> out;
  const bool all = scope == "all" || scope.empty();
  if (all || scope == "numerics") out.push_back(kernel_property_suite(seed));
  if (all || scope == "oracle") out.push_back(oracle_suite(seed));
  if (all || scope == "rbm") out.push_back(tree_exactness_suite(seed));
  if (all || scope == "dbm") out.push_back(dbm_reduction_suite(seed));
  if (all || scope == "grbm") out.push_back(grbm_suite(seed));
  if (all || scope == "gmrf") {
    out.push_back(gmrf_invariance_suite(seed));
    out.push_back(loopy_sanity_suite(seed));
  }
  if (all || scope == "grad") out.push_back(gradient_suite(seed));
  if (out.empty()) throw std::invalid_argument("unknown check scope: " + scope);
  return out;
}

}  // namespace qtbp::check
