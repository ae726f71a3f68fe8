// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "qtbp/checkpoint.hpp"
#include "qtbp/grad.hpp"
#include "qtbp/grid.hpp"
#include "qtbp/query.hpp"
#include "qtbp/rng.hpp"

namespace qtbp {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;

  static AdamState fresh(std::size_t n) {
    return AdamState{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0};
  }
};

// Standard bias-corrected Adam update, elementwise on the flat layout.
void adam_step(AdamState &state, std::vector<double> &params, const std::vector<double> &grads,
               double lr, const AdamConfig &cfg = AdamConfig{});

struct TrainConfig {
  int n_layers = 10;
  std::vector<double> lr_grid = {0.001, 0.003, 0.01, 0.03};
  std::size_t batch_size = 500;
  int max_epochs = 50;
  int patience = 5;
  std::uint64_t seed = 0;
  QuerySpec query = QuerySpec::bernoulli(0.5);
  int threads = 1;

  void validate() const;
};

struct EpochRecord {
  std::uint64_t epoch = 0;
  std::string split;  // "train" | "val"
  double loss_bits = 0.0;
  double nce = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;
};

std::string to_jsonl(const EpochRecord &record);

struct TrainEvent {
  std::string message;
  double lr = 0.0;
};

struct BatchStats {
  double loss_nats = 0.0;  // sum of the optimized per-sample losses
  CeResult ce;             // metric totals for NCE reporting
};

// Per-model adapter the generic loop drives. Query masks for a batch are
// sampled sequentially up front, so gradient workers can run in parallel
// with a reduction whose order is fixed by sample index.
class TrainableObjective {
 public:
  virtual ~TrainableObjective() = default;

  virtual std::size_t train_count() const = 0;
  virtual std::size_t validation_count() const = 0;
  virtual std::vector<double> params_flat() const = 0;
  virtual void set_params_flat(const std::vector<double> &flat) = 0;

  // Mean gradient over the batch into grad_out (flat layout).
  virtual BatchStats batch_gradient(const std::vector<std::size_t> &batch, Rng &query_rng,
                                    int threads, std::vector<double> &grad_out) = 0;

  // Validation NCE under the configured query spec; the seed is fixed
  // across epochs so the masks are comparable.
  virtual CeResult evaluate_validation(std::uint64_t query_seed) = 0;

  virtual Checkpoint snapshot() const = 0;
};

struct TrainResult {
  Checkpoint best;
  double best_val_nce = 0.0;
  double best_lr = 0.0;
  std::vector<EpochRecord> metrics;
  std::vector<TrainEvent> events;
};

// Epochs of seeded shuffled minibatches with Adam; keeps the best
// validation checkpoint, stops after `patience` epochs without
// improvement, and when several learning rates are given runs the full
// procedure per rate from the same initialization and returns the best
// validation checkpoint overall. A non-finite loss aborts that rate and
// records the event.
TrainResult train(TrainableObjective &objective, const TrainConfig &cfg);

// Concrete objectives.

class RbmObjective : public TrainableObjective {
 public:
  RbmObjective(RbmParams params, std::vector<std::vector<std::uint8_t>> train_rows,
               std::vector<std::vector<std::uint8_t>> val_rows, QuerySpec query, int n_layers,
               bool learn_temperature = true);

  std::size_t train_count() const override { return train_rows_.size(); }
  std::size_t validation_count() const override { return val_rows_.size(); }
  std::vector<double> params_flat() const override;
  void set_params_flat(const std::vector<double> &flat) override;
  BatchStats batch_gradient(const std::vector<std::size_t> &batch, Rng &query_rng, int threads,
                            std::vector<double> &grad_out) override;
  CeResult evaluate_validation(std::uint64_t query_seed) override;
  Checkpoint snapshot() const override;

  const RbmParams &params() const { return params_; }

 private:
  RbmParams params_;
  std::vector<std::vector<std::uint8_t>> train_rows_;
  std::vector<std::vector<std::uint8_t>> val_rows_;
  QuerySpec query_;
  int n_layers_;
  bool learn_temperature_;
};

class DbmObjective : public TrainableObjective {
 public:
  DbmObjective(DbmParams params, std::vector<std::vector<std::uint8_t>> train_rows,
               std::vector<std::vector<std::uint8_t>> val_rows, QuerySpec query, int n_layers,
               bool learn_temperature = true);

  std::size_t train_count() const override { return train_rows_.size(); }
  std::size_t validation_count() const override { return val_rows_.size(); }
  std::vector<double> params_flat() const override;
  void set_params_flat(const std::vector<double> &flat) override;
  BatchStats batch_gradient(const std::vector<std::size_t> &batch, Rng &query_rng, int threads,
                            std::vector<double> &grad_out) override;
  CeResult evaluate_validation(std::uint64_t query_seed) override;
  Checkpoint snapshot() const override;

  const DbmParams &params() const { return params_; }

 private:
  DbmParams params_;
  std::vector<std::vector<std::uint8_t>> train_rows_;
  std::vector<std::vector<std::uint8_t>> val_rows_;
  QuerySpec query_;
  int n_layers_;
  bool learn_temperature_;
};

class GrbmObjective : public TrainableObjective {
 public:
  GrbmObjective(GrbmParams params, GrbmConfig cfg, std::vector<std::vector<double>> train_rows,
                std::vector<std::vector<double>> val_rows, QuerySpec query, std::size_t grid_rows,
                std::size_t grid_cols);

  std::size_t train_count() const override { return train_rows_.size(); }
  std::size_t validation_count() const override { return val_rows_.size(); }
  std::vector<double> params_flat() const override;
  void set_params_flat(const std::vector<double> &flat) override;
  BatchStats batch_gradient(const std::vector<std::size_t> &batch, Rng &query_rng, int threads,
                            std::vector<double> &grad_out) override;
  CeResult evaluate_validation(std::uint64_t query_seed) override;
  Checkpoint snapshot() const override;

  const GrbmParams &params() const { return params_; }
  const GrbmConfig &config() const { return cfg_; }

 private:
  GrbmParams params_;
  GrbmConfig cfg_;
  std::vector<std::vector<double>> train_rows_;
  std::vector<std::vector<double>> val_rows_;
  QuerySpec query_;
  std::size_t grid_rows_;
  std::size_t grid_cols_;
};

class GmrfObjective : public TrainableObjective {
 public:
  // The GMRF query is fixed: the image is evidence, every label is a
  // target, so the loss is the mean per-pixel 3-class cross-entropy.
  GmrfObjective(GmrfParams params, std::vector<std::pair<ByteGrid, ByteGrid>> train_pairs,
                std::vector<std::pair<ByteGrid, ByteGrid>> val_pairs, int n_layers);

  std::size_t train_count() const override { return train_pairs_.size(); }
  std::size_t validation_count() const override { return val_pairs_.size(); }
  std::vector<double> params_flat() const override;
  void set_params_flat(const std::vector<double> &flat) override;
  BatchStats batch_gradient(const std::vector<std::size_t> &batch, Rng &query_rng, int threads,
                            std::vector<double> &grad_out) override;
  CeResult evaluate_validation(std::uint64_t query_seed) override;
  Checkpoint snapshot() const override;

  const GmrfParams &params() const { return params_; }

 private:
  GmrfParams params_;
  std::vector<std::pair<ByteGrid, ByteGrid>> train_pairs_;  // (image, labels)
  std::vector<std::pair<ByteGrid, ByteGrid>> val_pairs_;
  int n_layers_;
};

}  // namespace qtbp
