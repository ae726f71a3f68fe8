// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "qtbp/datasets.hpp"

namespace qtbp::cli {

namespace {

std::string trim(const std::string &s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

const std::set<std::string> kKnownKeys = {
    "model",   "data",    "out",     "layers",  "lr",          "batch_size", "max_epochs",
    "patience", "seed",   "query",   "hidden",  "hidden2",     "clones",     "epsilon",
    "temperature", "split", "rows",  "cols",    "threads"};

int to_int(const std::string &key, const std::string &value) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception &) {
    throw std::invalid_argument("config key '" + key + "': cannot parse integer '" + value + "'");
  }
}

double to_double(const std::string &key, const std::string &value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception &) {
    throw std::invalid_argument("config key '" + key + "': cannot parse number '" + value + "'");
  }
}

}  // namespace

std::map<std::string, std::string> parse_flat_config(const std::string &path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config file " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": expected 'key = value'");
    }
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (kKnownKeys.find(key) == kKnownKeys.end()) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": unknown key '" + key +
                                  "'");
    }
    if (out.count(key)) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": duplicate key '" +
                                  key + "'");
    }
    out[key] = value;
  }
  return out;
}

void Settings::fill_from_file(const std::string &path) {
  const auto kv = parse_flat_config(path);
  const auto has = [&kv](const char *k) { return kv.find(k) != kv.end(); };
  const auto get = [&kv](const char *k) { return kv.at(k); };

  if (!model && has("model")) model = get("model");
  if (!data && has("data")) data = get("data");
  if (!out && has("out")) out = get("out");
  if (!layers && has("layers")) layers = to_int("layers", get("layers"));
  if (!lr && has("lr")) lr = get("lr");
  if (!batch_size && has("batch_size")) batch_size = to_int("batch_size", get("batch_size"));
  if (!max_epochs && has("max_epochs")) max_epochs = to_int("max_epochs", get("max_epochs"));
  if (!patience && has("patience")) patience = to_int("patience", get("patience"));
  if (!seed && has("seed")) {
    seed = static_cast<std::uint64_t>(std::stoull(get("seed")));
  }
  if (!query && has("query")) query = get("query");
  if (!hidden && has("hidden")) hidden = to_int("hidden", get("hidden"));
  if (!hidden2 && has("hidden2")) hidden2 = to_int("hidden2", get("hidden2"));
  if (!clones && has("clones")) clones = to_int("clones", get("clones"));
  if (!epsilon && has("epsilon")) epsilon = to_double("epsilon", get("epsilon"));
  if (!temperature && has("temperature")) temperature = get("temperature");
  if (!split && has("split")) split = get("split");
  if (!rows && has("rows")) rows = to_int("rows", get("rows"));
  if (!cols && has("cols")) cols = to_int("cols", get("cols"));
  if (!threads && has("threads")) threads = to_int("threads", get("threads"));
}

QuerySpec parse_query_spec(const std::string &text) {
  const auto colon = text.find(':');
  const std::string kind = colon == std::string::npos ? text : text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (kind == "bernoulli") {
    if (arg.empty()) throw std::invalid_argument("query bernoulli needs a probability");
    return QuerySpec::bernoulli(to_double("query", arg));
  }
  if (kind == "patch") {
    const auto x = arg.find('x');
    if (x == std::string::npos) throw std::invalid_argument("query patch needs HxW, e.g. patch:5x5");
    return QuerySpec::patch(static_cast<std::size_t>(to_int("query", arg.substr(0, x))),
                            static_cast<std::size_t>(to_int("query", arg.substr(x + 1))));
  }
  if (kind == "fixed") {
    if (arg.empty()) throw std::invalid_argument("query fixed needs a mask file path");
    const auto mask_data = load_binary(arg);
    if (mask_data.size() != 1) {
      throw std::invalid_argument("fixed mask file must contain exactly one row");
    }
    return QuerySpec::fixed_mask(mask_data.rows.front());
  }
  throw std::invalid_argument("unknown query kind '" + kind +
                              "' (expected bernoulli:<p>, patch:<h>x<w> or fixed:<path>)");
}

std::vector<double> parse_lr_list(const std::string &text) {
  std::vector<double> out;
  std::istringstream iss(text);
  std::string tok;
  while (std::getline(iss, tok, ',')) {
    out.push_back(to_double("lr", trim(tok)));
  }
  if (out.empty()) throw std::invalid_argument("empty learning-rate list");
  return out;
}

std::array<double, 3> parse_split(const std::string &text) {
  std::istringstream iss(text);
  std::array<double, 3> out{};
  std::string tok;
  for (int i = 0; i < 3; ++i) {
    if (!std::getline(iss, tok, ',')) throw std::invalid_argument("split needs three fractions");
    out[static_cast<std::size_t>(i)] = to_double("split", trim(tok));
  }
  if (std::getline(iss, tok, ',')) throw std::invalid_argument("split needs exactly three fractions");
  return out;
}

}  // namespace qtbp::cli
