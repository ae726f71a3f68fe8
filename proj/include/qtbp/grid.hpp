// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

namespace qtbp {

// Row-major grid of small integers; used for binary images and for
// segmentation label grids.
struct ByteGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> v;

  ByteGrid() = default;
  ByteGrid(std::size_t r, std::size_t c, std::uint8_t fill = 0) : rows(r), cols(c), v(r * c, fill) {}

  std::uint8_t &at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  std::uint8_t at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
  std::size_t size() const { return v.size(); }

  friend bool operator==(const ByteGrid &a, const ByteGrid &b) {
    return a.rows == b.rows && a.cols == b.cols && a.v == b.v;
  }
};

// Segmentation classes. The label grid stores these values directly.
enum class SegLabel : std::uint8_t { Out = 0, In = 1, Contour = 2 };

}  // namespace qtbp
