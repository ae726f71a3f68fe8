// SPDX-License-Identifier: Apache-2.0

#include "qtbp/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "qtbp/errors.hpp"
#include "qtbp/oracle.hpp"

namespace qtbp {

namespace {

[[noreturn]] void parse_fail(const std::string &path, std::size_t line, const std::string &what) {
  throw FormatError(path + ":" + std::to_string(line) + ": " + what);
}

bool in_shape_rect(double r, double c, const std::array<double, 4> &rect) {
  return r >= rect[0] && r <= rect[1] && c >= rect[2] && c <= rect[3];
}

}  // namespace

BinaryDataset load_binary(const std::string &path) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open " + path);
  BinaryDataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream iss(line);
    std::vector<std::uint8_t> row;
    std::string tok;
    while (iss >> tok) {
      if (tok == "0") {
        row.push_back(0);
      } else if (tok == "1") {
        row.push_back(1);
      } else {
        parse_fail(path, line_no, "token '" + tok + "' is not 0 or 1");
      }
    }
    if (row.empty()) continue;
    if (!data.rows.empty() && row.size() != data.rows.front().size()) {
      parse_fail(path, line_no, "ragged row: expected " +
                                    std::to_string(data.rows.front().size()) + " tokens, got " +
                                    std::to_string(row.size()));
    }
    data.rows.push_back(std::move(row));
  }
  return data;
}

void save_binary(const std::string &path, const BinaryDataset &data) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  for (const auto &row : data.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) f << ' ';
      f << static_cast<int>(row[j]);
    }
    f << '\n';
  }
}

ContinuousDataset load_continuous(const std::string &path) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open " + path);
  ContinuousDataset data;
  std::string line;
  std::size_t line_no = 0;
  bool warned = false;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream iss(line);
    std::string tok;
    while (std::getline(iss, tok, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
        if (used != tok.size()) throw std::invalid_argument(tok);
        if (!std::isfinite(v)) parse_fail(path, line_no, "non-finite value '" + tok + "'");
        if (!warned && (v < 0.0 || v > 1.0)) {
          std::cerr << path << ":" << line_no << ": warning: value outside [0,1] accepted\n";
          warned = true;
        }
        row.push_back(v);
      } catch (const std::invalid_argument &) {
        parse_fail(path, line_no, "cannot parse '" + tok + "' as a real number");
      } catch (const std::out_of_range &) {
        parse_fail(path, line_no, "value '" + tok + "' out of range");
      }
    }
    if (row.empty()) continue;
    if (!data.rows.empty() && row.size() != data.rows.front().size()) {
      parse_fail(path, line_no, "ragged row");
    }
    data.rows.push_back(std::move(row));
  }
  return data;
}

void save_continuous(const std::string &path, const ContinuousDataset &data) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  f.precision(17);
  for (const auto &row : data.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) f << ',';
      f << row[j];
    }
    f << '\n';
  }
}

std::vector<BorderOwnershipPair> gen_border_ownership(std::size_t n, const BorderGenConfig &cfg,
                                                      Rng &rng) {
  const std::size_t R = cfg.rows, C = cfg.cols;
  if (R < 7 || C < 7) {
    throw std::invalid_argument("grid too small for a shape with a 2-pixel margin");
  }
  if (!(cfg.p_drop >= 0.0 && cfg.p_drop <= 1.0)) {
    throw std::invalid_argument("p_drop must be in [0,1]");
  }
  if (cfg.spur_len < 1 || cfg.spur_len > std::min(R, C)) {
    throw std::invalid_argument("spurious segment length does not fit the grid");
  }

  const auto label_shape = [&](const ByteGrid &inside) {
    ByteGrid labels(R, C, static_cast<std::uint8_t>(SegLabel::Out));
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        if (!inside.at(r, c)) continue;
        bool boundary = false;
        for (int dr = -1; dr <= 1 && !boundary; ++dr) {
          for (int dc = -1; dc <= 1 && !boundary; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const long rr = static_cast<long>(r) + dr;
            const long cc = static_cast<long>(c) + dc;
            if (rr < 0 || cc < 0 || rr >= static_cast<long>(R) || cc >= static_cast<long>(C) ||
                !inside.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc))) {
              boundary = true;
            }
          }
        }
        labels.at(r, c) = boundary ? static_cast<std::uint8_t>(SegLabel::Contour)
                                   : static_cast<std::uint8_t>(SegLabel::In);
      }
    }
    return labels;
  };

  // CONTOUR pixels must touch both IN and OUT under 8-connectivity.
  const auto labels_valid = [](const ByteGrid &labels) {
    for (std::size_t r = 0; r < labels.rows; ++r) {
      for (std::size_t c = 0; c < labels.cols; ++c) {
        if (labels.at(r, c) != static_cast<std::uint8_t>(SegLabel::Contour)) continue;
        bool has_in = false, has_out = false;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const long rr = static_cast<long>(r) + dr;
            const long cc = static_cast<long>(c) + dc;
            if (rr < 0 || cc < 0 || rr >= static_cast<long>(labels.rows) ||
                cc >= static_cast<long>(labels.cols)) {
              has_out = true;  // outside the grid counts as OUT
              continue;
            }
            const auto v = labels.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
            has_in = has_in || v == static_cast<std::uint8_t>(SegLabel::In);
            has_out = has_out || v == static_cast<std::uint8_t>(SegLabel::Out);
          }
        }
        if (!has_in || !has_out) return false;
      }
    }
    return true;
  };

  std::vector<BorderOwnershipPair> pairs;
  pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ByteGrid labels;
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 100) throw std::invalid_argument("could not generate a valid shape");
      ByteGrid inside(R, C);
      if (cfg.shape == ShapeKind::Rectangle) {
        const std::size_t h = 3 + rng.index(R - 6);
        const std::size_t w = 3 + rng.index(C - 6);
        const std::size_t r0 = 2 + rng.index(R - 3 - h);
        const std::size_t c0 = 2 + rng.index(C - 3 - w);
        for (std::size_t r = r0; r < r0 + h; ++r) {
          for (std::size_t c = c0; c < c0 + w; ++c) inside.at(r, c) = 1;
        }
      } else {
        const double a = rng.uniform(1.8, (static_cast<double>(R) - 5.0) / 2.0);
        const double b = rng.uniform(1.8, (static_cast<double>(C) - 5.0) / 2.0);
        const double cr = rng.uniform(2.0 + a, static_cast<double>(R) - 3.0 - a);
        const double cc = rng.uniform(2.0 + b, static_cast<double>(C) - 3.0 - b);
        for (std::size_t r = 0; r < R; ++r) {
          for (std::size_t c = 0; c < C; ++c) {
            const double dr = (static_cast<double>(r) - cr) / a;
            const double dc = (static_cast<double>(c) - cc) / b;
            inside.at(r, c) = dr * dr + dc * dc <= 1.0 ? 1 : 0;
          }
        }
      }
      labels = label_shape(inside);
      bool has_in = false;
      for (auto v : labels.v) has_in = has_in || v == static_cast<std::uint8_t>(SegLabel::In);
      if (has_in && labels_valid(labels)) break;
    }

    ByteGrid image(R, C);
    for (std::size_t px = 0; px < labels.size(); ++px) {
      if (labels.v[px] == static_cast<std::uint8_t>(SegLabel::Contour)) {
        image.v[px] = rng.bernoulli(1.0 - cfg.p_drop) ? 1 : 0;
      }
    }
    // spurious straight segments, axis-aligned or diagonal
    for (std::size_t s = 0; s < cfg.n_spurious; ++s) {
      static constexpr std::array<std::array<int, 2>, 4> kOrient = {
          {{0, 1}, {1, 0}, {1, 1}, {1, -1}}};
      const auto &o = kOrient[rng.index(4)];
      const long span_r = o[0] * static_cast<long>(cfg.spur_len - 1);
      const long span_c = o[1] * static_cast<long>(cfg.spur_len - 1);
      const std::size_t r_room = R - static_cast<std::size_t>(std::abs(span_r));
      const std::size_t c_room = C - static_cast<std::size_t>(std::abs(span_c));
      long r = static_cast<long>(rng.index(r_room));
      long c = static_cast<long>(rng.index(c_room));
      if (span_c < 0) c += -span_c;
      for (std::size_t step = 0; step < cfg.spur_len; ++step) {
        image.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = 1;
        r += o[0];
        c += o[1];
      }
    }
    pairs.push_back(BorderOwnershipPair{std::move(image), std::move(labels)});
  }
  return pairs;
}

void save_border_pairs(const std::string &path, const std::vector<BorderOwnershipPair> &pairs) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  for (const auto &pair : pairs) {
    f << pair.labels.rows << ' ' << pair.labels.cols << '\n';
    for (std::size_t r = 0; r < pair.labels.rows; ++r) {
      for (std::size_t c = 0; c < pair.labels.cols; ++c) {
        if (c) f << ' ';
        f << static_cast<int>(pair.labels.at(r, c));
      }
      f << '\n';
    }
    f << '\n';
    for (std::size_t r = 0; r < pair.image.rows; ++r) {
      for (std::size_t c = 0; c < pair.image.cols; ++c) {
        if (c) f << ' ';
        f << static_cast<int>(pair.image.at(r, c));
      }
      f << '\n';
    }
    f << '\n';
  }
}

std::vector<BorderOwnershipPair> load_border_pairs(const std::string &path) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open " + path);
  std::vector<BorderOwnershipPair> pairs;
  std::string line;
  std::size_t line_no = 0;

  const auto next_content_line = [&](std::string &out) {
    while (std::getline(f, line)) {
      ++line_no;
      if (!line.empty()) {
        out = line;
        return true;
      }
    }
    return false;
  };

  std::string header;
  while (next_content_line(header)) {
    std::istringstream hs(header);
    std::size_t R = 0, C = 0;
    if (!(hs >> R >> C) || R == 0 || C == 0) {
      parse_fail(path, line_no, "expected a 'R C' header");
    }
    const auto read_grid = [&](ByteGrid &g, int max_value, const char *what) {
      g = ByteGrid(R, C);
      for (std::size_t r = 0; r < R; ++r) {
        std::string row;
        if (!next_content_line(row)) parse_fail(path, line_no, std::string("truncated ") + what);
        std::istringstream rs(row);
        for (std::size_t c = 0; c < C; ++c) {
          int v = 0;
          if (!(rs >> v) || v < 0 || v > max_value) {
            parse_fail(path, line_no, std::string("bad ") + what + " value");
          }
          g.at(r, c) = static_cast<std::uint8_t>(v);
        }
      }
    };
    BorderOwnershipPair pair;
    read_grid(pair.labels, 2, "label row");
    read_grid(pair.image, 1, "image row");
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

ContinuousDataset gen_grbm_texture(std::size_t n, std::size_t rows, std::size_t cols,
                                   std::size_t n_hidden, Rng &rng, GrbmParams *truth) {
  const std::size_t V = rows * cols;
  GrbmParams gt;
  gt.W = Matrix(n_hidden, V);
  gt.b.resize(V);
  gt.c.resize(n_hidden);

  // visible means: a gentle diagonal ramp
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      gt.b[r * cols + c] =
          0.5 + 0.5 * (static_cast<double>(r) + static_cast<double>(c)) /
                    static_cast<double>(rows + cols - 2);
    }
  }
  // each hidden unit gates a smooth signed bump
  for (std::size_t i = 0; i < n_hidden; ++i) {
    const double cr = rng.uniform(1.0, static_cast<double>(rows) - 2.0);
    const double cc = rng.uniform(1.0, static_cast<double>(cols) - 2.0);
    const double amp = rng.bernoulli(0.5) ? 1.0 : -1.0;
    const double width = rng.uniform(1.5, 3.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double d2 = (static_cast<double>(r) - cr) * (static_cast<double>(r) - cr) +
                          (static_cast<double>(c) - cc) * (static_cast<double>(c) - cc);
        gt.W(i, r * cols + c) = amp * std::exp(-d2 / (2.0 * width * width));
      }
    }
    gt.c[i] = rng.uniform(-1.0, 1.0);
  }

  // exact sampling: enumerate p(h) over 2^H states, then v | h is Gaussian
  if (n_hidden > 16) throw std::invalid_argument("texture sampler enumerates at most 16 hidden units");
  const std::size_t n_states = std::size_t{1} << n_hidden;
  std::vector<double> logp(n_states);
  for (std::size_t h = 0; h < n_states; ++h) {
    // log p(h) up to a constant: c^T h + ||b + W^T h||^2 / 2 - ||b||^2 / 2
    double ch = 0.0;
    double quad = 0.0;
    for (std::size_t j = 0; j < V; ++j) {
      double mean_j = gt.b[j];
      for (std::size_t i = 0; i < n_hidden; ++i) {
        if (h & (std::size_t{1} << i)) mean_j += gt.W(i, j);
      }
      quad += mean_j * mean_j - gt.b[j] * gt.b[j];
    }
    for (std::size_t i = 0; i < n_hidden; ++i) {
      if (h & (std::size_t{1} << i)) ch += gt.c[i];
    }
    logp[h] = ch + 0.5 * quad;
  }
  const double m = *std::max_element(logp.begin(), logp.end());
  std::vector<double> cdf(n_states);
  double acc = 0.0;
  for (std::size_t h = 0; h < n_states; ++h) {
    acc += std::exp(logp[h] - m);
    cdf[h] = acc;
  }

  ContinuousDataset data;
  data.rows.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double u = rng.uniform() * acc;
    const std::size_t h = static_cast<std::size_t>(
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    std::vector<double> row(V);
    for (std::size_t j = 0; j < V; ++j) {
      double mean_j = gt.b[j];
      for (std::size_t i = 0; i < n_hidden; ++i) {
        if (h & (std::size_t{1} << i)) mean_j += gt.W(i, j);
      }
      row[j] = mean_j + rng.normal();
    }
    data.rows.push_back(std::move(row));
  }
  if (truth != nullptr) *truth = gt;
  return data;
}

SplitIndices split_indices(std::size_t n, const std::array<double, 3> &fractions,
                           std::uint64_t seed) {
  double sum = 0.0;
  for (double fr : fractions) {
    if (!(fr >= 0.0)) throw std::invalid_argument("split fractions must be nonnegative");
    sum += fr;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(perm);

  const auto cut1 =
      static_cast<std::size_t>(std::floor(fractions[0] * static_cast<double>(n) + 1e-9));
  const auto cut2 = static_cast<std::size_t>(
      std::floor((fractions[0] + fractions[1]) * static_cast<double>(n) + 1e-9));
  SplitIndices s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<long>(cut1));
  s.validation.assign(perm.begin() + static_cast<long>(cut1), perm.begin() + static_cast<long>(cut2));
  s.test.assign(perm.begin() + static_cast<long>(cut2), perm.end());
  return s;
}

}  // namespace qtbp
