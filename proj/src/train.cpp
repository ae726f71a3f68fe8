// SPDX-License-Identifier: Apache-2.0

#include "qtbp/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "qtbp/flatten.hpp"

namespace qtbp {

namespace {

constexpr double kLn2 = 0.6931471805599453094172321214582;

bool all_finite(const std::vector<double> &v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Runs fn(s) for every sample index in `batch`, chunked over `threads`
// workers; per-chunk partials are reduced in chunk order so the result is
// independent of scheduling.
template <typename PerSample>
void for_samples_ordered(const std::vector<std::size_t> &batch, int threads, PerSample fn) {
  const std::size_t n = batch.size();
  const std::size_t n_chunks = std::max<std::size_t>(
      1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n));
  if (n_chunks == 1) {
    for (std::size_t s = 0; s < n; ++s) fn(s, 0);
    return;
  }
  std::vector<std::thread> workers;
  const std::size_t per = (n + n_chunks - 1) / n_chunks;
  for (std::size_t chunk = 0; chunk < n_chunks; ++chunk) {
    const std::size_t lo = chunk * per;
    const std::size_t hi = std::min(n, lo + per);
    workers.emplace_back([lo, hi, chunk, &fn]() {
      for (std::size_t s = lo; s < hi; ++s) fn(s, chunk);
    });
  }
  for (auto &w : workers) w.join();
}

}  // namespace

void adam_step(AdamState &state, std::vector<double> &params, const std::vector<double> &grads,
               double lr, const AdamConfig &cfg) {
  if (state.m.size() != params.size() || grads.size() != params.size()) {
    throw std::invalid_argument("adam_step shape mismatch");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

void TrainConfig::validate() const {
  if (n_layers < 1) throw std::invalid_argument("n_layers must be >= 1");
  if (lr_grid.empty()) throw std::invalid_argument("lr grid must not be empty");
  for (double lr : lr_grid) {
    if (!(lr > 0.0)) throw std::invalid_argument("learning rates must be positive");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (patience < 0) throw std::invalid_argument("patience must be >= 0");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  query.validate();
  if (query.kind == QuerySpec::Kind::Bernoulli && query.p_observe >= 1.0) {
    throw std::invalid_argument("query p_observe = 1 can never produce a prediction target");
  }
  if (query.kind == QuerySpec::Kind::FixedMask &&
      std::find(query.fixed.begin(), query.fixed.end(), std::uint8_t{0}) == query.fixed.end()) {
    throw std::invalid_argument("fixed query mask has no prediction targets");
  }
}

std::string to_jsonl(const EpochRecord &r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["split"] = r.split;
  j["loss_bits"] = r.loss_bits;
  j["nce"] = r.nce;
  j["lr"] = r.lr;
  j["wall_ms"] = r.wall_ms;
  return j.dump();
}

TrainResult train(TrainableObjective &objective, const TrainConfig &cfg) {
  cfg.validate();
  if (objective.train_count() == 0) throw std::invalid_argument("empty training split");

  const std::vector<double> initial = objective.params_flat();
  const std::uint64_t eval_seed = Rng::for_stream(cfg.seed, 0xe7a1).next_u64();

  TrainResult result;
  result.best_val_nce = std::numeric_limits<double>::infinity();
  bool have_best = false;

  for (std::size_t lr_idx = 0; lr_idx < cfg.lr_grid.size(); ++lr_idx) {
    const double lr = cfg.lr_grid[lr_idx];
    objective.set_params_flat(initial);
    AdamState adam = AdamState::fresh(initial.size());
    Rng shuffle_rng = Rng::for_stream(cfg.seed, 0x5u + lr_idx);
    Rng query_rng = Rng::for_stream(cfg.seed, 0x90u + lr_idx);

    std::vector<std::size_t> order(objective.train_count());
    std::iota(order.begin(), order.end(), std::size_t{0});

    double lr_best_nce = std::numeric_limits<double>::infinity();
    Checkpoint lr_best;
    std::uint64_t lr_best_epoch = 0;
    int epochs_since_improvement = 0;
    bool diverged = false;

    for (int epoch = 1; epoch <= cfg.max_epochs && !diverged; ++epoch) {
      const double t0 = now_ms();
      shuffle_rng.shuffle(order);

      double epoch_nats = 0.0;
      CeResult epoch_ce;
      std::size_t epoch_samples = 0;
      std::vector<double> grad;
      std::vector<double> flat = objective.params_flat();

      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
        const std::vector<std::size_t> batch(order.begin() + static_cast<long>(start),
                                             order.begin() + static_cast<long>(stop));
        BatchStats stats;
        try {
          stats = objective.batch_gradient(batch, query_rng, cfg.threads, grad);
        } catch (const std::exception &e) {
          result.events.push_back({std::string("numerical failure: ") + e.what(), lr});
          diverged = true;
          break;
        }
        if (!std::isfinite(stats.loss_nats) || !all_finite(grad)) {
          result.events.push_back({"divergence: non-finite loss or gradient", lr});
          diverged = true;
          break;
        }
        epoch_nats += stats.loss_nats;
        epoch_ce.total_bits += stats.ce.total_bits;
        epoch_ce.n_predicted += stats.ce.n_predicted;
        epoch_samples += batch.size();

        adam_step(adam, flat, grad, lr);
        if (!all_finite(flat)) {
          result.events.push_back({"divergence: non-finite parameters", lr});
          diverged = true;
          break;
        }
        objective.set_params_flat(flat);
      }
      if (diverged) break;

      EpochRecord train_rec;
      train_rec.epoch = static_cast<std::uint64_t>(epoch);
      train_rec.split = "train";
      train_rec.loss_bits = epoch_nats / kLn2 / static_cast<double>(epoch_samples);
      train_rec.nce = nce(epoch_ce);
      train_rec.lr = lr;
      train_rec.wall_ms = now_ms() - t0;
      result.metrics.push_back(train_rec);

      CeResult val;
      try {
        val = objective.evaluate_validation(eval_seed);
      } catch (const std::domain_error &e) {
        result.events.push_back({std::string("validation failure: ") + e.what(), lr});
        break;
      }
      const double val_nce = nce(val);
      EpochRecord val_rec;
      val_rec.epoch = static_cast<std::uint64_t>(epoch);
      val_rec.split = "val";
      val_rec.loss_bits =
          val.total_bits / static_cast<double>(std::max<std::size_t>(1, objective.validation_count()));
      val_rec.nce = val_nce;
      val_rec.lr = lr;
      val_rec.wall_ms = now_ms() - t0;
      result.metrics.push_back(val_rec);

      if (val_nce < lr_best_nce) {
        lr_best_nce = val_nce;
        lr_best = objective.snapshot();
        lr_best_epoch = static_cast<std::uint64_t>(epoch);
        epochs_since_improvement = 0;
      } else {
        ++epochs_since_improvement;
        if (epochs_since_improvement > cfg.patience) break;
      }
    }

    if (!diverged && lr_best_nce < result.best_val_nce) {
      result.best = lr_best;
      result.best.epoch = lr_best_epoch;
      result.best.best_val_nce = lr_best_nce;
      result.best.seed = cfg.seed;
      result.best.n_layers = static_cast<std::uint32_t>(cfg.n_layers);
      result.best_val_nce = lr_best_nce;
      result.best_lr = lr;
      have_best = true;
    }
  }

  if (!have_best) {
    throw std::runtime_error("training diverged for every learning rate in the grid");
  }
  return result;
}

// ---------------------------------------------------------------------------
// RBM / DBM objectives

RbmObjective::RbmObjective(RbmParams params, std::vector<std::vector<std::uint8_t>> train_rows,
                           std::vector<std::vector<std::uint8_t>> val_rows, QuerySpec query,
                           int n_layers, bool learn_temperature)
    : params_(std::move(params)),
      train_rows_(std::move(train_rows)),
      val_rows_(std::move(val_rows)),
      query_(std::move(query)),
      n_layers_(n_layers),
      learn_temperature_(learn_temperature) {
  params_.validate();
}

std::vector<double> RbmObjective::params_flat() const { return flatten(params_); }
void RbmObjective::set_params_flat(const std::vector<double> &flat) { unflatten(flat, params_); }

BatchStats RbmObjective::batch_gradient(const std::vector<std::size_t> &batch, Rng &query_rng,
                                        int threads, std::vector<double> &grad_out) {
  const std::size_t V = params_.visible();
  std::vector<QueryMask> masks(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    masks[s] = sample_query_with_targets(query_, 1, V, query_rng);
  }

  const std::size_t n_chunks = std::max<std::size_t>(
      1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), batch.size()));
  std::vector<RbmGrad> partial(n_chunks, RbmGrad::zeros(params_));
  std::vector<double> nats(batch.size(), 0.0);
  std::vector<CeResult> ces(batch.size());

  for_samples_ordered(batch, threads, [&](std::size_t s, std::size_t chunk) {
    const auto &row = train_rows_[batch[s]];
    const auto fwd = rbm_forward(params_, to_signed(row), masks[s], n_layers_);
    nats[s] = rbm_backward(params_, row, masks[s], fwd.trace, partial[chunk]);
    ces[s] = masked_ce_binary(row, fwd.v_hat, masks[s]);
  });

  BatchStats stats;
  for (std::size_t chunk = 0; chunk < n_chunks; ++chunk) {
    const auto flat = flatten(partial[chunk]);
    if (chunk == 0) {
      grad_out = flat;
    } else {
      for (std::size_t i = 0; i < grad_out.size(); ++i) grad_out[i] += flat[i];
    }
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (double &g : grad_out) g *= inv_b;
  if (!learn_temperature_) grad_out.back() = 0.0;  // tau is the last slot
  for (std::size_t s = 0; s < batch.size(); ++s) {
    stats.loss_nats += nats[s];
    stats.ce.total_bits += ces[s].total_bits;
    stats.ce.n_predicted += ces[s].n_predicted;
  }
  return stats;
}

CeResult RbmObjective::evaluate_validation(std::uint64_t query_seed) {
  Rng rng(query_seed);
  CeResult total;
  for (const auto &row : val_rows_) {
    const QueryMask q = sample_query_with_targets(query_, 1, params_.visible(), rng);
    const auto fwd = rbm_forward(params_, to_signed(row), q, n_layers_);
    const CeResult ce = masked_ce_binary(row, fwd.v_hat, q);
    total.total_bits += ce.total_bits;
    total.n_predicted += ce.n_predicted;
  }
  return total;
}

Checkpoint RbmObjective::snapshot() const { return make_checkpoint(params_); }

DbmObjective::DbmObjective(DbmParams params, std::vector<std::vector<std::uint8_t>> train_rows,
                           std::vector<std::vector<std::uint8_t>> val_rows, QuerySpec query,
                           int n_layers, bool learn_temperature)
    : params_(std::move(params)),
      train_rows_(std::move(train_rows)),
      val_rows_(std::move(val_rows)),
      query_(std::move(query)),
      n_layers_(n_layers),
      learn_temperature_(learn_temperature) {
  params_.validate();
}

std::vector<double> DbmObjective::params_flat() const { return flatten(params_); }
void DbmObjective::set_params_flat(const std::vector<double> &flat) { unflatten(flat, params_); }

BatchStats DbmObjective::batch_gradient(const std::vector<std::size_t> &batch, Rng &query_rng,
                                        int threads, std::vector<double> &grad_out) {
  const std::size_t V = params_.visible();
  std::vector<QueryMask> masks(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    masks[s] = sample_query_with_targets(query_, 1, V, query_rng);
  }
  const std::size_t n_chunks = std::max<std::size_t>(
      1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), batch.size()));
  std::vector<DbmGrad> partial(n_chunks, DbmGrad::zeros(params_));
  std::vector<double> nats(batch.size(), 0.0);
  std::vector<CeResult> ces(batch.size());

  for_samples_ordered(batch, threads, [&](std::size_t s, std::size_t chunk) {
    const auto &row = train_rows_[batch[s]];
    const auto fwd = dbm_forward(params_, to_signed(row), masks[s], n_layers_);
    nats[s] = dbm_backward(params_, row, masks[s], fwd.trace, partial[chunk]);
    ces[s] = masked_ce_binary(row, fwd.v_hat, masks[s]);
  });

  BatchStats stats;
  for (std::size_t chunk = 0; chunk < n_chunks; ++chunk) {
    const auto flat = flatten(partial[chunk]);
    if (chunk == 0) {
      grad_out = flat;
    } else {
      for (std::size_t i = 0; i < grad_out.size(); ++i) grad_out[i] += flat[i];
    }
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (double &g : grad_out) g *= inv_b;
  if (!learn_temperature_) grad_out.back() = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    stats.loss_nats += nats[s];
    stats.ce.total_bits += ces[s].total_bits;
    stats.ce.n_predicted += ces[s].n_predicted;
  }
  return stats;
}

CeResult DbmObjective::evaluate_validation(std::uint64_t query_seed) {
  Rng rng(query_seed);
  CeResult total;
  for (const auto &row : val_rows_) {
    const QueryMask q = sample_query_with_targets(query_, 1, params_.visible(), rng);
    const auto fwd = dbm_forward(params_, to_signed(row), q, n_layers_);
    const CeResult ce = masked_ce_binary(row, fwd.v_hat, q);
    total.total_bits += ce.total_bits;
    total.n_predicted += ce.n_predicted;
  }
  return total;
}

Checkpoint DbmObjective::snapshot() const { return make_checkpoint(params_); }

// ---------------------------------------------------------------------------
// GRBM objective

GrbmObjective::GrbmObjective(GrbmParams params, GrbmConfig cfg,
                             std::vector<std::vector<double>> train_rows,
                             std::vector<std::vector<double>> val_rows, QuerySpec query,
                             std::size_t grid_rows, std::size_t grid_cols)
    : params_(std::move(params)),
      cfg_(cfg),
      train_rows_(std::move(train_rows)),
      val_rows_(std::move(val_rows)),
      query_(std::move(query)),
      grid_rows_(grid_rows),
      grid_cols_(grid_cols) {
  params_.validate();
  cfg_.validate();
  if (grid_rows_ * grid_cols_ != params_.visible()) {
    throw std::invalid_argument("grid shape does not match the visible dimension");
  }
}

std::vector<double> GrbmObjective::params_flat() const { return flatten(params_); }
void GrbmObjective::set_params_flat(const std::vector<double> &flat) { unflatten(flat, params_); }

BatchStats GrbmObjective::batch_gradient(const std::vector<std::size_t> &batch, Rng &query_rng,
                                         int threads, std::vector<double> &grad_out) {
  std::vector<QueryMask> masks(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    masks[s] = sample_query_with_targets(query_, grid_rows_, grid_cols_, query_rng);
  }
  const std::size_t n_chunks = std::max<std::size_t>(
      1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), batch.size()));
  std::vector<GrbmGrad> partial(n_chunks, GrbmGrad::zeros(params_));
  std::vector<double> nats(batch.size(), 0.0);
  std::vector<CeResult> ces(batch.size());

  for_samples_ordered(batch, threads, [&](std::size_t s, std::size_t chunk) {
    const auto &row = train_rows_[batch[s]];
    const auto fwd = grbm_forward(params_, row, masks[s], cfg_);
    nats[s] = grbm_backward(params_, cfg_, row, masks[s], fwd.trace, partial[chunk]);
    ces[s] = masked_ce_gaussian(row, fwd.mean, fwd.var, masks[s]);
  });

  BatchStats stats;
  for (std::size_t chunk = 0; chunk < n_chunks; ++chunk) {
    const auto flat = flatten(partial[chunk]);
    if (chunk == 0) {
      grad_out = flat;
    } else {
      for (std::size_t i = 0; i < grad_out.size(); ++i) grad_out[i] += flat[i];
    }
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (double &g : grad_out) g *= inv_b;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    stats.loss_nats += nats[s];
    stats.ce.total_bits += ces[s].total_bits;
    stats.ce.n_predicted += ces[s].n_predicted;
  }
  return stats;
}

CeResult GrbmObjective::evaluate_validation(std::uint64_t query_seed) {
  Rng rng(query_seed);
  CeResult total;
  for (const auto &row : val_rows_) {
    const QueryMask q = sample_query_with_targets(query_, grid_rows_, grid_cols_, rng);
    const auto fwd = grbm_forward(params_, row, q, cfg_);
    const CeResult ce = masked_ce_gaussian(row, fwd.mean, fwd.var, q);
    total.total_bits += ce.total_bits;
    total.n_predicted += ce.n_predicted;
  }
  return total;
}

Checkpoint GrbmObjective::snapshot() const { return make_checkpoint(params_, cfg_.epsilon); }

// ---------------------------------------------------------------------------
// GMRF objective

GmrfObjective::GmrfObjective(GmrfParams params, std::vector<std::pair<ByteGrid, ByteGrid>> train_pairs,
                             std::vector<std::pair<ByteGrid, ByteGrid>> val_pairs, int n_layers)
    : params_(std::move(params)),
      train_pairs_(std::move(train_pairs)),
      val_pairs_(std::move(val_pairs)),
      n_layers_(n_layers) {
  params_.validate();
}

std::vector<double> GmrfObjective::params_flat() const { return flatten(params_); }
void GmrfObjective::set_params_flat(const std::vector<double> &flat) { unflatten(flat, params_); }

BatchStats GmrfObjective::batch_gradient(const std::vector<std::size_t> &batch, Rng &query_rng,
                                         int threads, std::vector<double> &grad_out) {
  (void)query_rng;  // the GMRF query is fixed
  const std::size_t n_chunks = std::max<std::size_t>(
      1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), batch.size()));
  std::vector<GmrfGrad> partial(n_chunks, GmrfGrad::zeros(params_));
  std::vector<double> nats(batch.size(), 0.0);
  std::vector<CeResult> ces(batch.size());
  // per-chunk scratch: one trace allocation serves every sample in turn
  std::vector<GmrfTrace> scratch(n_chunks);
  std::vector<std::vector<double>> scratch_beliefs(n_chunks);

  for_samples_ordered(batch, threads, [&](std::size_t s, std::size_t chunk) {
    const auto &[image, labels] = train_pairs_[batch[s]];
    // training traces skip the log copies; the reverse sweep runs on the
    // probability mirrors
    gmrf_forward_reuse(params_, image, n_layers_, Temperature(1.0), false, scratch[chunk],
                       scratch_beliefs[chunk]);
    nats[s] = gmrf_backward(params_, labels, scratch[chunk], Temperature(1.0), partial[chunk]);
    const auto agg = aggregate_labels(scratch_beliefs[chunk], params_.K);
    std::vector<std::vector<double>> probs(agg.size());
    for (std::size_t px = 0; px < agg.size(); ++px) {
      probs[px] = {agg[px].out, agg[px].in, agg[px].contour};
    }
    ces[s] = ce_categorical(labels.v, probs);
  });

  BatchStats stats;
  for (std::size_t chunk = 0; chunk < n_chunks; ++chunk) {
    const auto flat = flatten(partial[chunk]);
    if (chunk == 0) {
      grad_out = flat;
    } else {
      for (std::size_t i = 0; i < grad_out.size(); ++i) grad_out[i] += flat[i];
    }
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (double &g : grad_out) g *= inv_b;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    stats.loss_nats += nats[s];
    stats.ce.total_bits += ces[s].total_bits;
    stats.ce.n_predicted += ces[s].n_predicted;
  }
  return stats;
}

CeResult GmrfObjective::evaluate_validation(std::uint64_t query_seed) {
  (void)query_seed;
  CeResult total;
  for (const auto &[image, labels] : val_pairs_) {
    const auto fwd = gmrf_forward(params_, image, n_layers_, Temperature(1.0));
    const auto agg = aggregate_labels(fwd.beliefs, params_.K);
    std::vector<std::vector<double>> probs(agg.size());
    for (std::size_t px = 0; px < agg.size(); ++px) {
      probs[px] = {agg[px].out, agg[px].in, agg[px].contour};
    }
    const CeResult ce = ce_categorical(labels.v, probs);
    total.total_bits += ce.total_bits;
    total.n_predicted += ce.n_predicted;
  }
  return total;
}

Checkpoint GmrfObjective::snapshot() const { return make_checkpoint(params_); }

}  // namespace qtbp
