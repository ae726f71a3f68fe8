// SPDX-License-Identifier: Apache-2.0

#include "qtbp/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "qtbp/errors.hpp"
#include "qtbp/rng.hpp"

using namespace qtbp;

namespace {

std::string temp_path(const char *name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

Checkpoint sample_checkpoint() {
  Rng rng(1);
  RbmParams p = init_rbm(3, 5, rng);
  p.c_V[0] = -0.0;  // signed zero must survive the round trip
  p.c_V[1] = 1e-300;
  Checkpoint ck = make_checkpoint(p);
  ck.epoch = 17;
  ck.best_val_nce = 0.8125;
  ck.seed = 424242;
  ck.n_layers = 10;
  return ck;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
  const auto path = temp_path("qtbp_ck_roundtrip.ckpt");
  const Checkpoint ck = sample_checkpoint();
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back == ck);

  // a second save produces identical bytes
  const auto path2 = temp_path("qtbp_ck_roundtrip2.ckpt");
  save_checkpoint(path2, back);
  std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  const std::string bytes_b((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(bytes_a == bytes_b);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("params survive the checkpoint round trip") {
  Rng rng(2);
  const auto path = temp_path("qtbp_ck_params.ckpt");

  RbmParams rbm = init_rbm(4, 6, rng);
  save_checkpoint(path, make_checkpoint(rbm));
  const RbmParams rbm2 = rbm_from_checkpoint(load_checkpoint(path));
  CHECK(rbm2.W == rbm.W);
  CHECK(rbm2.c_V == rbm.c_V);
  CHECK(rbm2.tau == rbm.tau);

  DbmParams dbm = init_dbm(3, 2, 5, rng);
  save_checkpoint(path, make_checkpoint(dbm));
  const DbmParams dbm2 = dbm_from_checkpoint(load_checkpoint(path));
  CHECK(dbm2.W_H1V == dbm.W_H1V);
  CHECK(dbm2.W_H2H1 == dbm.W_H2H1);

  GrbmParams grbm = init_grbm(2, 4, rng);
  save_checkpoint(path, make_checkpoint(grbm, 1e-4));
  double eps = 0.0;
  const GrbmParams grbm2 = grbm_from_checkpoint(load_checkpoint(path), &eps);
  CHECK(grbm2.W == grbm.W);
  CHECK(eps == 1e-4);

  GmrfParams gmrf = init_gmrf(3, rng);
  gmrf.noise = GmrfNoise{0.8, 0.05, 0.01};
  save_checkpoint(path, make_checkpoint(gmrf));
  const GmrfParams gmrf2 = gmrf_from_checkpoint(load_checkpoint(path));
  CHECK(gmrf2.pot_ud == gmrf.pot_ud);
  CHECK(gmrf2.K == gmrf.K);
  CHECK(gmrf2.noise.p_contour == 0.8);
  std::remove(path.c_str());
}

TEST_CASE("kind mismatches are rejected") {
  const auto path = temp_path("qtbp_ck_kind.ckpt");
  Rng rng(3);
  save_checkpoint(path, make_checkpoint(init_rbm(2, 3, rng)));
  const Checkpoint ck = load_checkpoint(path);
  CHECK_THROWS_AS(dbm_from_checkpoint(ck), FormatError);
  CHECK_THROWS_AS(grbm_from_checkpoint(ck), FormatError);
  std::remove(path.c_str());
}

TEST_CASE("corrupt files are rejected with the offending field") {
  const auto path = temp_path("qtbp_ck_corrupt.ckpt");
  save_checkpoint(path, sample_checkpoint());

  // truncation
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  out.close();
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);

  // bad magic
  std::ofstream bad(path, std::ios::binary | std::ios::trunc);
  bad << "NOPE" << bytes.substr(4);
  bad.close();
  try {
    load_checkpoint(path);
    FAIL("expected FormatError");
  } catch (const FormatError &e) {
    CHECK(std::string(e.what()).find("magic") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("missing files and missing tensors") {
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/qtbp.ckpt"), FormatError);
  Checkpoint ck = sample_checkpoint();
  CHECK_THROWS_AS(ck.tensor("nope"), FormatError);
}
