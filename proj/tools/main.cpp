// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "config.hpp"
#include "json.hpp"
#include "qtbp/check.hpp"
#include "qtbp/checkpoint.hpp"
#include "qtbp/datasets.hpp"
#include "qtbp/errors.hpp"
#include "qtbp/flatten.hpp"
#include "qtbp/oracle.hpp"
#include "qtbp/train.hpp"

namespace qtbp::cli {
namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct ConfigUsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::uint64_t require_seed(const Settings &s) { return s.seed.value_or(0); }

void write_text(const std::string &path, const std::string &content) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  f << content;
}

RbmParams random_truth_rbm(std::size_t hidden, std::size_t visible, Rng &rng) {
  RbmParams p;
  p.W = Matrix(hidden, visible);
  for (double &w : p.W.values()) w = rng.uniform(-1.0, 1.0);
  p.c_V.resize(visible);
  p.c_H.resize(hidden);
  for (double &c : p.c_V) c = rng.uniform(-1.0, 1.0);
  for (double &c : p.c_H) c = rng.uniform(-1.0, 1.0);
  p.tau = tau_for_temperature(1.0);
  return p;
}

// ---------------------------------------------------------------------------
// gen-data

int cmd_gen_data(const Settings &s, const std::string &kind, std::size_t n, double p_drop,
                 std::size_t n_spurious, std::size_t spur_len, const std::string &shape) {
  if (!s.out) throw ConfigUsageError("gen-data needs --out");
  if (n == 0) throw ConfigUsageError("--n must be positive");
  const std::uint64_t seed = require_seed(s);
  fs::create_directories(*s.out);
  Rng rng(seed);

  nlohmann::ordered_json manifest;
  manifest["kind"] = kind;
  manifest["n"] = n;
  manifest["seed"] = seed;

  if (kind == "border") {
    BorderGenConfig cfg;
    cfg.rows = static_cast<std::size_t>(s.rows.value_or(12));
    cfg.cols = static_cast<std::size_t>(s.cols.value_or(static_cast<int>(cfg.rows)));
    cfg.p_drop = p_drop;
    cfg.n_spurious = n_spurious;
    cfg.spur_len = spur_len;
    if (shape == "rectangle") {
      cfg.shape = ShapeKind::Rectangle;
    } else if (shape == "ellipse") {
      cfg.shape = ShapeKind::Ellipse;
    } else {
      throw ConfigUsageError("--shape must be rectangle or ellipse");
    }
    const auto pairs = gen_border_ownership(n, cfg, rng);
    const auto path = (fs::path(*s.out) / "pairs.txt").string();
    save_border_pairs(path, pairs);
    manifest["rows"] = cfg.rows;
    manifest["cols"] = cfg.cols;
    manifest["p_drop"] = cfg.p_drop;
    manifest["n_spurious"] = cfg.n_spurious;
    manifest["file"] = path;
  } else if (kind == "rbm") {
    const auto hidden = static_cast<std::size_t>(s.hidden.value_or(5));
    const auto visible = static_cast<std::size_t>(s.rows.value_or(1)) *
                         static_cast<std::size_t>(s.cols.value_or(10));
    if (hidden < 1 || visible < 1) throw ConfigUsageError("rbm data needs positive dimensions");
    const RbmParams truth = random_truth_rbm(hidden, visible, rng);
    const auto samples = oracle::exact_sample(oracle::rbm_pgm(truth), n, rng);
    BinaryDataset data;
    data.rows.reserve(n);
    for (const auto &joint : samples) {
      std::vector<std::uint8_t> row(visible);
      for (std::size_t j = 0; j < visible; ++j) row[j] = static_cast<std::uint8_t>(joint[j]);
      data.rows.push_back(std::move(row));
    }
    const auto path = (fs::path(*s.out) / "samples.txt").string();
    save_binary(path, data);
    const auto truth_path = (fs::path(*s.out) / "truth.ckpt").string();
    Checkpoint truth_ck = make_checkpoint(truth);
    truth_ck.seed = seed;
    truth_ck.n_layers = static_cast<std::uint32_t>(s.layers.value_or(10));
    save_checkpoint(truth_path, truth_ck);
    manifest["visible"] = visible;
    manifest["hidden"] = hidden;
    manifest["file"] = path;
    manifest["truth"] = truth_path;
  } else if (kind == "grbm") {
    const auto rows = static_cast<std::size_t>(s.rows.value_or(12));
    const auto cols = static_cast<std::size_t>(s.cols.value_or(12));
    const auto hidden = static_cast<std::size_t>(s.hidden.value_or(6));
    GrbmParams truth;
    const auto data = gen_grbm_texture(n, rows, cols, hidden, rng, &truth);
    const auto path = (fs::path(*s.out) / "samples.csv").string();
    save_continuous(path, data);
    const auto truth_path = (fs::path(*s.out) / "truth.ckpt").string();
    save_checkpoint(truth_path, make_checkpoint(truth, 1e-4));
    manifest["rows"] = rows;
    manifest["cols"] = cols;
    manifest["hidden"] = hidden;
    manifest["file"] = path;
    manifest["truth"] = truth_path;
  } else {
    throw ConfigUsageError("--kind must be border, rbm or grbm");
  }

  write_text((fs::path(*s.out) / "manifest.json").string(), manifest.dump(2) + "\n");
  std::cout << manifest.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

TrainConfig build_train_config(const Settings &s, int default_layers, double default_lr) {
  TrainConfig cfg;
  cfg.n_layers = s.layers.value_or(default_layers);
  cfg.lr_grid = s.lr ? parse_lr_list(*s.lr) : std::vector<double>{default_lr};
  cfg.batch_size = static_cast<std::size_t>(s.batch_size.value_or(50));
  cfg.max_epochs = s.max_epochs.value_or(30);
  cfg.patience = s.patience.value_or(5);
  cfg.seed = require_seed(s);
  cfg.threads = s.threads.value_or(1);
  if (s.query) cfg.query = parse_query_spec(*s.query);
  return cfg;
}

void write_metrics(const std::string &path, const TrainResult &result) {
  std::string out;
  for (const auto &rec : result.metrics) out += to_jsonl(rec) + "\n";
  for (const auto &event : result.events) {
    nlohmann::ordered_json j;
    j["event"] = event.message;
    j["lr"] = event.lr;
    out += j.dump() + "\n";
  }
  write_text(path, out);
}

int cmd_train(const Settings &s) {
  if (!s.model) throw ConfigUsageError("train needs --model");
  if (!s.data) throw ConfigUsageError("train needs --data");
  if (!s.out) throw ConfigUsageError("train needs --out");
  const std::string model = *s.model;
  const std::uint64_t seed = require_seed(s);
  const auto fractions = s.split ? parse_split(*s.split) : std::array<double, 3>{0.8, 0.1, 0.1};
  fs::create_directories(*s.out);

  bool learn_temperature = true;
  std::optional<double> fixed_temperature;
  if (s.temperature) {
    if (*s.temperature == "learned") {
      learn_temperature = true;
    } else if (s.temperature->rfind("fixed:", 0) == 0) {
      learn_temperature = false;
      fixed_temperature = std::stod(s.temperature->substr(6));
    } else {
      throw ConfigUsageError("temperature must be 'learned' or 'fixed:<value>'");
    }
  }

  TrainResult result;
  Rng init_rng = Rng::for_stream(seed, 0x1417);

  if (model == "rbm" || model == "dbm") {
    const BinaryDataset data = load_binary(*s.data);
    if (data.size() == 0) throw ConfigUsageError("dataset is empty");
    const auto idx = split_indices(data.size(), fractions, seed);
    auto train_rows = take(data.rows, idx.train);
    auto val_rows = take(data.rows, idx.validation);
    if (train_rows.empty() || val_rows.empty()) {
      throw ConfigUsageError("train/validation splits must be nonempty");
    }
    TrainConfig cfg = build_train_config(s, 10, 0.01);
    if (model == "rbm") {
      const auto hidden = static_cast<std::size_t>(s.hidden.value_or(0));
      if (hidden == 0) throw ConfigUsageError("rbm training needs --hidden");
      RbmParams init = init_rbm(hidden, data.width(), init_rng);
      if (fixed_temperature) init.tau = tau_for_temperature(*fixed_temperature);
      RbmObjective obj(std::move(init), std::move(train_rows), std::move(val_rows), cfg.query,
                       cfg.n_layers, learn_temperature);
      result = train(obj, cfg);
    } else {
      const auto h1 = static_cast<std::size_t>(s.hidden.value_or(0));
      const auto h2 = static_cast<std::size_t>(s.hidden2.value_or(0));
      if (h1 == 0 || h2 == 0) throw ConfigUsageError("dbm training needs --hidden and --hidden2");
      DbmParams init = init_dbm(h1, h2, data.width(), init_rng);
      if (fixed_temperature) init.tau = tau_for_temperature(*fixed_temperature);
      DbmObjective obj(std::move(init), std::move(train_rows), std::move(val_rows), cfg.query,
                       cfg.n_layers, learn_temperature);
      result = train(obj, cfg);
    }
  } else if (model == "grbm") {
    const ContinuousDataset data = load_continuous(*s.data);
    if (data.size() == 0) throw ConfigUsageError("dataset is empty");
    const auto grid_rows = static_cast<std::size_t>(s.rows.value_or(1));
    const auto grid_cols =
        static_cast<std::size_t>(s.cols.value_or(static_cast<int>(data.width())));
    if (grid_rows * grid_cols != data.width()) {
      throw ConfigUsageError("rows*cols must match the data width");
    }
    const auto hidden = static_cast<std::size_t>(s.hidden.value_or(0));
    if (hidden == 0) throw ConfigUsageError("grbm training needs --hidden");
    if (s.temperature) throw ConfigUsageError("grbm carries no temperature parameter");
    const auto idx = split_indices(data.size(), fractions, seed);
    auto train_rows = take(data.rows, idx.train);
    auto val_rows = take(data.rows, idx.validation);
    if (train_rows.empty() || val_rows.empty()) {
      throw ConfigUsageError("train/validation splits must be nonempty");
    }
    TrainConfig cfg = build_train_config(s, 15, 0.005);
    GrbmConfig gcfg;
    gcfg.epsilon = s.epsilon.value_or(1e-4);
    gcfg.n_layers = cfg.n_layers;
    GrbmObjective obj(init_grbm(hidden, data.width(), init_rng), gcfg, std::move(train_rows),
                      std::move(val_rows), cfg.query, grid_rows, grid_cols);
    result = train(obj, cfg);
  } else if (model == "gmrf") {
    const auto pairs = load_border_pairs(*s.data);
    if (pairs.empty()) throw ConfigUsageError("dataset is empty");
    if (fixed_temperature && *fixed_temperature != 1.0) {
      throw ConfigUsageError("the gmrf is trained at fixed temperature 1");
    }
    const auto idx = split_indices(pairs.size(), fractions, seed);
    std::vector<std::pair<ByteGrid, ByteGrid>> train_pairs, val_pairs;
    std::vector<ByteGrid> noise_images, noise_labels;
    for (std::size_t i : idx.train) {
      train_pairs.emplace_back(pairs[i].image, pairs[i].labels);
      noise_images.push_back(pairs[i].image);
      noise_labels.push_back(pairs[i].labels);
    }
    for (std::size_t i : idx.validation) val_pairs.emplace_back(pairs[i].image, pairs[i].labels);
    if (train_pairs.empty() || val_pairs.empty()) {
      throw ConfigUsageError("train/validation splits must be nonempty");
    }
    TrainConfig cfg = build_train_config(s, 15, 0.01);
    cfg.query = QuerySpec::bernoulli(0.5);  // unused: the gmrf query is fixed
    GmrfParams init = init_gmrf(static_cast<std::size_t>(s.clones.value_or(8)), init_rng);
    init.noise = estimate_noise(noise_images, noise_labels);
    GmrfObjective obj(std::move(init), std::move(train_pairs), std::move(val_pairs), cfg.n_layers);
    result = train(obj, cfg);
  } else {
    throw ConfigUsageError("--model must be rbm, dbm, grbm or gmrf");
  }

  const auto ckpt_path = (fs::path(*s.out) / "model.ckpt").string();
  save_checkpoint(ckpt_path, result.best);
  write_metrics((fs::path(*s.out) / "metrics.jsonl").string(), result);
  std::printf("best validation NCE %.6f bits (lr %g, epoch %llu)\n", result.best_val_nce,
              result.best_lr, static_cast<unsigned long long>(result.best.epoch));
  std::printf("checkpoint written to %s\n", ckpt_path.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const Settings &s, const std::string &ckpt_path, const std::string &report_path) {
  if (ckpt_path.empty()) throw ConfigUsageError("eval needs --checkpoint");
  if (!s.data) throw ConfigUsageError("eval needs --data");
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const std::uint64_t seed = require_seed(s);
  const int n_layers = s.layers.value_or(ck.n_layers > 0 ? static_cast<int>(ck.n_layers) : 10);

  nlohmann::ordered_json report;
  report["kind"] = ck.kind;
  report["checkpoint"] = ckpt_path;
  report["data"] = *s.data;
  report["seed"] = seed;
  report["layers"] = n_layers;

  CeResult total;
  if (ck.kind == "rbm" || ck.kind == "dbm") {
    const BinaryDataset data = load_binary(*s.data);
    if (data.size() == 0) throw ConfigUsageError("dataset is empty");
    const QuerySpec query = s.query ? parse_query_spec(*s.query) : QuerySpec::bernoulli(0.5);
    Rng rng(seed);
    for (const auto &row : data.rows) {
      const QueryMask q = sample_query_with_targets(query, 1, data.width(), rng);
      std::vector<double> v_hat;
      if (ck.kind == "rbm") {
        v_hat = rbm_forward(rbm_from_checkpoint(ck), to_signed(row), q, n_layers).v_hat;
      } else {
        v_hat = dbm_forward(dbm_from_checkpoint(ck), to_signed(row), q, n_layers).v_hat;
      }
      const CeResult ce = masked_ce_binary(row, v_hat, q);
      total.total_bits += ce.total_bits;
      total.n_predicted += ce.n_predicted;
    }
    report["n_samples"] = data.size();
  } else if (ck.kind == "grbm") {
    const ContinuousDataset data = load_continuous(*s.data);
    if (data.size() == 0) throw ConfigUsageError("dataset is empty");
    double epsilon = 1e-4;
    const GrbmParams params = grbm_from_checkpoint(ck, &epsilon);
    GrbmConfig cfg;
    cfg.epsilon = s.epsilon.value_or(epsilon);
    cfg.n_layers = n_layers;
    const auto grid_rows = static_cast<std::size_t>(s.rows.value_or(1));
    const auto grid_cols =
        static_cast<std::size_t>(s.cols.value_or(static_cast<int>(data.width())));
    if (grid_rows * grid_cols != data.width()) {
      throw ConfigUsageError("rows*cols must match the data width");
    }
    const QuerySpec query = s.query ? parse_query_spec(*s.query) : QuerySpec::bernoulli(0.5);
    Rng rng(seed);
    for (const auto &row : data.rows) {
      const QueryMask q = sample_query_with_targets(query, grid_rows, grid_cols, rng);
      const auto fwd = grbm_forward(params, row, q, cfg);
      const CeResult ce = masked_ce_gaussian(row, fwd.mean, fwd.var, q);
      total.total_bits += ce.total_bits;
      total.n_predicted += ce.n_predicted;
    }
    report["n_samples"] = data.size();
  } else if (ck.kind == "gmrf") {
    const auto pairs = load_border_pairs(*s.data);
    if (pairs.empty()) throw ConfigUsageError("dataset is empty");
    const GmrfParams params = gmrf_from_checkpoint(ck);
    double iou_sum = 0.0;
    for (const auto &pair : pairs) {
      const auto fwd = gmrf_forward(params, pair.image, n_layers, Temperature(1.0));
      const auto agg = aggregate_labels(fwd.beliefs, params.K);
      std::vector<std::vector<double>> probs(agg.size());
      for (std::size_t px = 0; px < agg.size(); ++px) {
        probs[px] = {agg[px].out, agg[px].in, agg[px].contour};
      }
      const CeResult ce = ce_categorical(pair.labels.v, probs);
      total.total_bits += ce.total_bits;
      total.n_predicted += ce.n_predicted;
      iou_sum += iou(decode_labels(agg, pair.image.rows, pair.image.cols), pair.labels);
    }
    report["n_samples"] = pairs.size();
    report["iou"] = iou_sum / static_cast<double>(pairs.size());
    std::printf("IOU %.4f\n", iou_sum / static_cast<double>(pairs.size()));
  } else {
    throw FormatError("checkpoint kind '" + ck.kind + "' is not evaluable");
  }

  const double nce_bits = nce(total);
  report["total_bits"] = total.total_bits;
  report["n_predicted"] = total.n_predicted;
  report["nce_bits"] = nce_bits;
  std::printf("NCE %.6f bits over %zu predicted variables\n", nce_bits, total.n_predicted);
  if (!report_path.empty()) write_text(report_path, report.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// infer

int cmd_infer(const Settings &s, const std::string &ckpt_path, const std::string &input_path,
              const std::string &mask_path, const std::string &out_path) {
  if (ckpt_path.empty()) throw ConfigUsageError("infer needs --checkpoint");
  if (input_path.empty()) throw ConfigUsageError("infer needs --input");
  if (out_path.empty()) throw ConfigUsageError("infer needs --out");
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const int n_layers = s.layers.value_or(ck.n_layers > 0 ? static_cast<int>(ck.n_layers) : 10);

  std::ostringstream out;
  out.precision(10);

  if (ck.kind == "rbm" || ck.kind == "dbm") {
    if (mask_path.empty()) throw ConfigUsageError("infer needs --mask for this model kind");
    const BinaryDataset data = load_binary(input_path);
    const BinaryDataset mask_rows = load_binary(mask_path);
    if (mask_rows.size() != 1 && mask_rows.size() != data.size()) {
      throw ConfigUsageError("mask file must hold one row or one row per input");
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      const QueryMask q = mask_rows.size() == 1 ? mask_rows.rows[0] : mask_rows.rows[i];
      std::vector<double> v_hat;
      if (ck.kind == "rbm") {
        v_hat = rbm_forward(rbm_from_checkpoint(ck), to_signed(data.rows[i]), q, n_layers).v_hat;
      } else {
        v_hat = dbm_forward(dbm_from_checkpoint(ck), to_signed(data.rows[i]), q, n_layers).v_hat;
      }
      for (std::size_t j = 0; j < v_hat.size(); ++j) {
        if (j) out << ' ';
        out << v_hat[j];
      }
      out << '\n';
    }
  } else if (ck.kind == "grbm") {
    if (mask_path.empty()) throw ConfigUsageError("infer needs --mask for this model kind");
    const ContinuousDataset data = load_continuous(input_path);
    const BinaryDataset mask_rows = load_binary(mask_path);
    if (mask_rows.size() != 1 && mask_rows.size() != data.size()) {
      throw ConfigUsageError("mask file must hold one row or one row per input");
    }
    double epsilon = 1e-4;
    const GrbmParams params = grbm_from_checkpoint(ck, &epsilon);
    GrbmConfig cfg;
    cfg.epsilon = s.epsilon.value_or(epsilon);
    cfg.n_layers = n_layers;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const QueryMask q = mask_rows.size() == 1 ? mask_rows.rows[0] : mask_rows.rows[i];
      const auto fwd = grbm_forward(params, data.rows[i], q, cfg);
      // per unit: mean variance pairs
      for (std::size_t j = 0; j < fwd.mean.size(); ++j) {
        if (j) out << ' ';
        out << fwd.mean[j] << ' ' << fwd.var[j];
      }
      out << '\n';
    }
  } else if (ck.kind == "gmrf") {
    const auto pairs = load_border_pairs(input_path);
    const GmrfParams params = gmrf_from_checkpoint(ck);
    for (const auto &pair : pairs) {
      const auto fwd = gmrf_forward(params, pair.image, n_layers, Temperature(1.0));
      const auto agg = aggregate_labels(fwd.beliefs, params.K);
      out << pair.image.rows << ' ' << pair.image.cols << '\n';
      for (std::size_t r = 0; r < pair.image.rows; ++r) {
        for (std::size_t c = 0; c < pair.image.cols; ++c) {
          const auto &p = agg[r * pair.image.cols + c];
          if (c) out << ' ';
          out << p.out << ' ' << p.in << ' ' << p.contour;
        }
        out << '\n';
      }
      out << '\n';
    }
  } else {
    throw FormatError("checkpoint kind '" + ck.kind + "' is not inferable");
  }

  write_text(out_path, out.str());
  std::printf("marginals written to %s\n", out_path.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// check

int cmd_check(const std::string &scope, std::uint64_t seed) {
  bool all_passed = true;
  for (const auto &result : check::run_suites(scope, seed)) {
    std::printf("[%s] %-20s %s (%.2fs)\n", result.passed ? "PASS" : "FAIL", result.name.c_str(),
                result.detail.c_str(), result.wall_s);
    all_passed = all_passed && result.passed;
  }
  return all_passed ? kExitOk : kExitRuntime;
}

int run(int argc, char **argv) {
  CLI::App app{"query-trained belief propagation networks"};
  app.require_subcommand(1);

  Settings s;
  std::string config_path;

  const auto add_common = [&](CLI::App *cmd) {
    cmd->add_option("--config", config_path, "flat key = value config file");
    cmd->add_option("--seed", s.seed, "rng seed");
    cmd->add_option("--threads", s.threads, "worker cap for batch gradients");
  };

  // gen-data
  auto *gen = app.add_subcommand("gen-data", "write synthetic datasets");
  std::string gen_kind = "border";
  std::size_t gen_n = 100;
  double gen_p_drop = 0.2;
  std::size_t gen_spurious = 8;
  std::size_t gen_spur_len = 3;
  std::string gen_shape = "rectangle";
  int gen_size = 0;
  add_common(gen);
  gen->add_option("--kind", gen_kind, "border | rbm | grbm");
  gen->add_option("--n", gen_n, "number of samples/pairs");
  gen->add_option("--out", s.out, "output directory");
  gen->add_option("--rows", s.rows, "grid rows");
  gen->add_option("--cols", s.cols, "grid cols");
  gen->add_option("--size", gen_size, "square grid side (sets rows and cols)");
  gen->add_option("--visible", s.cols, "visible units for rbm data (alias of --cols)");
  gen->add_option("--hidden", s.hidden, "hidden units of the generating model");
  gen->add_option("--p-drop", gen_p_drop, "contour dropout probability");
  gen->add_option("--n-spurious", gen_spurious, "spurious segments per image");
  gen->add_option("--spur-len", gen_spur_len, "spurious segment length");
  gen->add_option("--shape", gen_shape, "rectangle | ellipse");

  // train
  auto *tr = app.add_subcommand("train", "train a query network");
  add_common(tr);
  tr->add_option("--model", s.model, "rbm | dbm | grbm | gmrf");
  tr->add_option("--data", s.data, "dataset file");
  tr->add_option("--out", s.out, "output directory");
  tr->add_option("--layers", s.layers, "unrolled BP layers");
  tr->add_option("--lr", s.lr, "learning rate or comma grid");
  tr->add_option("--batch-size", s.batch_size, "minibatch size");
  tr->add_option("--max-epochs", s.max_epochs, "epoch cap");
  tr->add_option("--patience", s.patience, "early stopping patience");
  tr->add_option("--query", s.query, "bernoulli:<p> | patch:<h>x<w> | fixed:<path>");
  tr->add_option("--hidden", s.hidden, "hidden units (rbm/grbm; dbm first layer)");
  tr->add_option("--hidden2", s.hidden2, "dbm second hidden layer");
  tr->add_option("--clones", s.clones, "gmrf contour clones");
  tr->add_option("--epsilon", s.epsilon, "grbm observation variance");
  tr->add_option("--temperature", s.temperature, "learned | fixed:<value>");
  tr->add_option("--split", s.split, "train,val,test fractions");
  tr->add_option("--rows", s.rows, "grid rows (grbm)");
  tr->add_option("--cols", s.cols, "grid cols (grbm)");

  // eval
  auto *ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_report;
  add_common(ev);
  ev->add_option("--checkpoint", eval_ckpt, "checkpoint file");
  ev->add_option("--data", s.data, "dataset file");
  ev->add_option("--query", s.query, "query spec");
  ev->add_option("--layers", s.layers, "override the stored layer count");
  ev->add_option("--rows", s.rows, "grid rows (grbm)");
  ev->add_option("--cols", s.cols, "grid cols (grbm)");
  ev->add_option("--epsilon", s.epsilon, "grbm observation variance");
  ev->add_option("--report", eval_report, "write a JSON report here");

  // infer
  auto *in = app.add_subcommand("infer", "single-batch marginal inference");
  std::string infer_ckpt, infer_input, infer_mask, infer_out;
  add_common(in);
  in->add_option("--checkpoint", infer_ckpt, "checkpoint file");
  in->add_option("--input", infer_input, "input file");
  in->add_option("--mask", infer_mask, "query mask file (rbm/dbm/grbm)");
  in->add_option("--out", infer_out, "output marginals file");
  in->add_option("--layers", s.layers, "override the stored layer count");
  in->add_option("--epsilon", s.epsilon, "grbm observation variance");

  // check
  auto *chk = app.add_subcommand("check", "run the verification suites");
  std::string check_scope = "all";
  add_common(chk);
  chk->add_option("--scope", check_scope, "all | numerics | oracle | rbm | dbm | grbm | gmrf | grad");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (!config_path.empty()) s.fill_from_file(config_path);
    if (gen_size > 0) {
      if (!s.rows) s.rows = gen_size;
      if (!s.cols) s.cols = gen_size;
    }

    if (gen->parsed()) {
      return cmd_gen_data(s, gen_kind, gen_n, gen_p_drop, gen_spurious, gen_spur_len, gen_shape);
    }
    if (tr->parsed()) return cmd_train(s);
    if (ev->parsed()) return cmd_eval(s, eval_ckpt, eval_report);
    if (in->parsed()) return cmd_infer(s, infer_ckpt, infer_input, infer_mask, infer_out);
    if (chk->parsed()) return cmd_check(check_scope, s.seed.value_or(12345));
    return kExitConfig;
  } catch (const std::invalid_argument &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace
}  // namespace qtbp::cli

int main(int argc, char **argv) { return qtbp::cli::run(argc, argv); }
