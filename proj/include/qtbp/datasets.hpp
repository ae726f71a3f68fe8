// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "qtbp/grbm.hpp"
#include "qtbp/grid.hpp"
#include "qtbp/rbm.hpp"
#include "qtbp/rng.hpp"

namespace qtbp {

// One {0,1} sample per line, space-separated.
struct BinaryDataset {
  std::vector<std::vector<std::uint8_t>> rows;

  std::size_t size() const { return rows.size(); }
  std::size_t width() const { return rows.empty() ? 0 : rows.front().size(); }
};

BinaryDataset load_binary(const std::string &path);
void save_binary(const std::string &path, const BinaryDataset &data);

// Comma-separated reals per line; values outside [0,1] are accepted with a
// warning on stderr.
struct ContinuousDataset {
  std::vector<std::vector<double>> rows;

  std::size_t size() const { return rows.size(); }
  std::size_t width() const { return rows.empty() ? 0 : rows.front().size(); }
};

ContinuousDataset load_continuous(const std::string &path);
void save_continuous(const std::string &path, const ContinuousDataset &data);

// Noisy contour image plus its noiseless CONTOUR-IN-OUT segmentation.
struct BorderOwnershipPair {
  ByteGrid image;   // binary
  ByteGrid labels;  // SegLabel values
};

enum class ShapeKind { Rectangle, Ellipse };

struct BorderGenConfig {
  std::size_t rows = 12;
  std::size_t cols = 12;
  ShapeKind shape = ShapeKind::Rectangle;
  double p_drop = 0.2;       // contour pixels go dark with this probability
  std::size_t n_spurious = 8;  // straight 3-pixel segments forced to 1
  std::size_t spur_len = 3;
};

// Random filled shape with a >= 2 pixel margin; labels are exact (interior
// IN, 8-connected boundary CONTOUR, rest OUT), the image is the noisy
// contour. Every CONTOUR pixel touches at least one IN and one OUT pixel.
std::vector<BorderOwnershipPair> gen_border_ownership(std::size_t n, const BorderGenConfig &cfg,
                                                      Rng &rng);

// Pair file format: per pair a header "R C", R label rows, a blank line,
// R image rows, then a blank line before the next pair.
void save_border_pairs(const std::string &path, const std::vector<BorderOwnershipPair> &pairs);
std::vector<BorderOwnershipPair> load_border_pairs(const std::string &path);

// Continuous texture sampler: exact draws from a ground-truth GRBM whose
// hidden units gate smooth spatial bumps, giving correlated pixels that a
// trained GRBM can exploit. Returns the generating parameters through
// `truth` when requested.
ContinuousDataset gen_grbm_texture(std::size_t n, std::size_t rows, std::size_t cols,
                                   std::size_t n_hidden, Rng &rng, GrbmParams *truth = nullptr);

// Seeded permutation followed by contiguous cuts; fractions must sum to 1.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

SplitIndices split_indices(std::size_t n, const std::array<double, 3> &fractions,
                           std::uint64_t seed);

template <typename Row>
std::vector<Row> take(const std::vector<Row> &rows, const std::vector<std::size_t> &idx) {
  std::vector<Row> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(rows[i]);
  return out;
}

}  // namespace qtbp
