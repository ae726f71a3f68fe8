// SPDX-License-Identifier: Apache-2.0

#include "qtbp/train.hpp"

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "qtbp/datasets.hpp"
#include "qtbp/flatten.hpp"
#include "qtbp/oracle.hpp"

using namespace qtbp;

namespace {

std::vector<std::vector<std::uint8_t>> sample_rbm_rows(const RbmParams &truth, std::size_t n,
                                                       Rng &rng) {
  const auto samples = oracle::exact_sample(oracle::rbm_pgm(truth), n, rng);
  std::vector<std::vector<std::uint8_t>> rows;
  rows.reserve(n);
  for (const auto &s : samples) {
    std::vector<std::uint8_t> row(truth.visible());
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = static_cast<std::uint8_t>(s[j]);
    rows.push_back(std::move(row));
  }
  return rows;
}

RbmParams random_truth(std::size_t H, std::size_t V, Rng &rng) {
  RbmParams p;
  p.W = Matrix(H, V);
  for (double &w : p.W.values()) w = rng.uniform(-1.0, 1.0);
  p.c_V.resize(V);
  p.c_H.resize(H);
  for (double &c : p.c_V) c = rng.uniform(-1.0, 1.0);
  for (double &c : p.c_H) c = rng.uniform(-1.0, 1.0);
  p.tau = tau_for_temperature(1.0);
  return p;
}

}  // namespace

TEST_CASE("adam first step moves by about lr in the gradient sign direction") {
  AdamState state = AdamState::fresh(3);
  std::vector<double> params{1.0, -2.0, 0.5};
  const std::vector<double> grads{0.3, -0.7, 0.0};
  adam_step(state, params, grads, 0.01);
  CHECK(params[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(params[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
  CHECK(params[2] == 0.5);  // zero gradient leaves the entry unchanged

  // constant gradient direction keeps moving the same way
  adam_step(state, params, grads, 0.01);
  CHECK(params[0] < 1.0 - 0.01);
  CHECK(params[1] > -2.0 + 0.01);
}

TEST_CASE("full-batch gradient descent is monotone on a fixed minibatch") {
  Rng rng(31);
  RbmParams p = init_rbm(5, 10, rng);
  const RbmParams truth = random_truth(5, 10, rng);
  auto rows = sample_rbm_rows(truth, 32, rng);
  std::vector<QueryMask> masks;
  for (std::size_t s = 0; s < rows.size(); ++s) {
    QueryMask q(10, 0);
    for (std::size_t j = 0; j < 10; ++j) q[j] = rng.bernoulli(0.5) ? 1 : 0;
    q[rng.index(10)] = 0;
    masks.push_back(q);
  }

  const auto batch_loss_grad = [&](const RbmParams &at, RbmGrad *grad) {
    double nats = 0.0;
    for (std::size_t s = 0; s < rows.size(); ++s) {
      nats += rbm_loss_backward(at, rows[s], masks[s], 10, grad);
    }
    return nats / static_cast<double>(rows.size());
  };

  double prev = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 50; ++step) {
    RbmGrad grad = RbmGrad::zeros(p);
    const double loss = batch_loss_grad(p, &grad);
    CHECK(loss <= prev + 1e-12);
    prev = loss;
    grad.scale(1.0 / static_cast<double>(rows.size()));
    auto flat = flatten(p);
    const auto g = flatten(grad);
    for (std::size_t i = 0; i < flat.size(); ++i) flat[i] -= 1e-3 * g[i];
    unflatten(flat, p);
  }
}

TEST_CASE("training reduces validation NCE and is deterministic") {
  Rng rng(32);
  const RbmParams truth = random_truth(4, 8, rng);
  auto rows = sample_rbm_rows(truth, 600, rng);
  const auto idx = split_indices(rows.size(), {0.8, 0.2, 0.0}, 7);
  auto train_rows = take(rows, idx.train);
  auto val_rows = take(rows, idx.validation);

  TrainConfig cfg;
  cfg.n_layers = 6;
  cfg.lr_grid = {0.02};
  cfg.batch_size = 120;
  cfg.max_epochs = 12;
  cfg.patience = 3;
  cfg.seed = 99;
  cfg.query = QuerySpec::bernoulli(0.5);

  Rng init_rng(1);
  const RbmParams init = init_rbm(4, 8, init_rng);

  RbmObjective obj_a(init, train_rows, val_rows, cfg.query, cfg.n_layers);
  const auto res_a = train(obj_a, cfg);
  CHECK(res_a.best_val_nce < 1.0);
  CHECK(res_a.best.kind == "rbm");
  CHECK(res_a.best.n_layers == 6);

  RbmObjective obj_b(init, train_rows, val_rows, cfg.query, cfg.n_layers);
  const auto res_b = train(obj_b, cfg);
  CHECK(res_a.best == res_b.best);
  REQUIRE(res_a.metrics.size() == res_b.metrics.size());
  for (std::size_t i = 0; i < res_a.metrics.size(); ++i) {
    CHECK(res_a.metrics[i].loss_bits == res_b.metrics[i].loss_bits);
    CHECK(res_a.metrics[i].nce == res_b.metrics[i].nce);
    CHECK(res_a.metrics[i].epoch == res_b.metrics[i].epoch);
    CHECK(res_a.metrics[i].split == res_b.metrics[i].split);
  }
}

TEST_CASE("patience zero stops at the first non-improving epoch") {
  Rng rng(33);
  const RbmParams truth = random_truth(2, 6, rng);
  auto rows = sample_rbm_rows(truth, 80, rng);
  auto val_rows = sample_rbm_rows(truth, 40, rng);

  TrainConfig cfg;
  cfg.n_layers = 4;
  // an absurd rate so validation degrades immediately
  cfg.lr_grid = {5.0};
  cfg.batch_size = 40;
  cfg.max_epochs = 50;
  cfg.patience = 0;
  cfg.seed = 5;
  cfg.query = QuerySpec::bernoulli(0.5);

  Rng init_rng(2);
  RbmObjective obj(init_rbm(2, 6, init_rng), rows, val_rows, cfg.query, cfg.n_layers);
  const auto res = train(obj, cfg);
  // count epochs actually run for this lr: first non-improving epoch ends it
  std::size_t val_epochs = 0;
  double best = std::numeric_limits<double>::infinity();
  bool stopped_on_regression = false;
  for (const auto &m : res.metrics) {
    if (m.split != "val") continue;
    ++val_epochs;
    if (m.nce < best) {
      best = m.nce;
    } else {
      stopped_on_regression = true;
      CHECK(&m == &res.metrics.back());
    }
  }
  CHECK(val_epochs < 50);
  CHECK((stopped_on_regression || val_epochs < 50));
}

TEST_CASE("divergent learning rates are recorded and skipped") {
  Rng rng(34);
  const RbmParams truth = random_truth(2, 6, rng);
  auto rows = sample_rbm_rows(truth, 60, rng);
  auto val_rows = sample_rbm_rows(truth, 30, rng);

  TrainConfig cfg;
  cfg.n_layers = 4;
  cfg.lr_grid = {1e308, 0.02};  // the first rate overflows the parameters
  cfg.batch_size = 30;
  cfg.max_epochs = 3;
  cfg.patience = 1;
  cfg.seed = 6;
  cfg.query = QuerySpec::bernoulli(0.5);

  Rng init_rng(3);
  RbmObjective obj(init_rbm(2, 6, init_rng), rows, val_rows, cfg.query, cfg.n_layers);
  const auto res = train(obj, cfg);
  CHECK(res.best_lr == 0.02);
  CHECK(!res.events.empty());
}

TEST_CASE("epoch records serialize as json lines") {
  EpochRecord r;
  r.epoch = 3;
  r.split = "val";
  r.loss_bits = 1.5;
  r.nce = 0.75;
  r.lr = 0.01;
  r.wall_ms = 12.5;
  CHECK(to_jsonl(r) ==
        R"({"epoch":3,"split":"val","loss_bits":1.5,"nce":0.75,"lr":0.01,"wall_ms":12.5})");
}

TEST_CASE("threaded batch gradients match single-threaded") {
  Rng rng(35);
  const RbmParams truth = random_truth(3, 7, rng);
  auto rows = sample_rbm_rows(truth, 24, rng);

  Rng init_rng(4);
  RbmObjective obj(init_rbm(3, 7, init_rng), rows, rows, QuerySpec::bernoulli(0.5), 5);
  std::vector<std::size_t> batch(rows.size());
  for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;

  Rng q1(77), q2(77);
  std::vector<double> g1, g2;
  const auto s1 = obj.batch_gradient(batch, q1, 1, g1);
  const auto s2 = obj.batch_gradient(batch, q2, 3, g2);
  CHECK(s1.loss_nats == doctest::Approx(s2.loss_nats).epsilon(1e-12));
  REQUIRE(g1.size() == g2.size());
  for (std::size_t i = 0; i < g1.size(); ++i) {
    CHECK(g1[i] == doctest::Approx(g2[i]).epsilon(1e-10));
  }
}

TEST_CASE("config validation rejects degenerate queries") {
  TrainConfig cfg;
  cfg.query = QuerySpec::bernoulli(1.0);
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.query = QuerySpec::fixed_mask(QueryMask{1, 1, 1});
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.query = QuerySpec::bernoulli(0.5);
  CHECK_NOTHROW(cfg.validate());
}
