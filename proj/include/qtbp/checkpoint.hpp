// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qtbp/gmrf.hpp"
#include "qtbp/grbm.hpp"
#include "qtbp/rbm.hpp"

namespace qtbp {

// Binary container: magic "QTBP", a version integer, a model-kind tag,
// training metadata, then named tensors with explicit shapes. All
// integers and the 64-bit floats are little-endian; save/load round-trips
// bit-exactly.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Tensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> values;

  friend bool operator==(const Tensor &, const Tensor &) = default;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string kind;  // "rbm" | "dbm" | "grbm" | "gmrf"
  std::uint64_t epoch = 0;
  double best_val_nce = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t n_layers = 0;
  std::vector<Tensor> tensors;

  const Tensor &tensor(const std::string &name) const;
  friend bool operator==(const Checkpoint &, const Checkpoint &) = default;
};

void save_checkpoint(const std::string &path, const Checkpoint &ck);
Checkpoint load_checkpoint(const std::string &path);

// Model <-> checkpoint conversions. Loading into the wrong kind raises a
// FormatError naming both kinds.
Checkpoint make_checkpoint(const RbmParams &p);
Checkpoint make_checkpoint(const DbmParams &p);
Checkpoint make_checkpoint(const GrbmParams &p, double epsilon);
Checkpoint make_checkpoint(const GmrfParams &p);

RbmParams rbm_from_checkpoint(const Checkpoint &ck);
DbmParams dbm_from_checkpoint(const Checkpoint &ck);
GrbmParams grbm_from_checkpoint(const Checkpoint &ck, double *epsilon = nullptr);
GmrfParams gmrf_from_checkpoint(const Checkpoint &ck);

}  // namespace qtbp
