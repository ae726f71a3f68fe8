// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "qtbp/query.hpp"

namespace qtbp::cli {

// Flat key = value settings shared by the config file and the command
// line; flags override file values. Unknown keys are rejected before any
// compute starts.
struct Settings {
  std::optional<std::string> model;
  std::optional<std::string> data;
  std::optional<std::string> out;
  std::optional<int> layers;
  std::optional<std::string> lr;  // single value or comma grid
  std::optional<int> batch_size;
  std::optional<int> max_epochs;
  std::optional<int> patience;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> query;
  std::optional<int> hidden;
  std::optional<int> hidden2;
  std::optional<int> clones;
  std::optional<double> epsilon;
  std::optional<std::string> temperature;  // "learned" | "fixed:<x>"
  std::optional<std::string> split;        // "0.8,0.1,0.1"
  std::optional<int> rows;
  std::optional<int> cols;
  std::optional<int> threads;

  // file values fill only the fields the command line left unset
  void fill_from_file(const std::string &path);
};

// One "key = value" per line, '#' comments.
std::map<std::string, std::string> parse_flat_config(const std::string &path);

QuerySpec parse_query_spec(const std::string &text);
std::vector<double> parse_lr_list(const std::string &text);
std::array<double, 3> parse_split(const std::string &text);

}  // namespace qtbp::cli
