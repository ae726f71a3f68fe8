// SPDX-License-Identifier: Apache-2.0

#include "qtbp/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "qtbp/errors.hpp"

namespace qtbp {

namespace {

constexpr char kMagic[4] = {'Q', 'T', 'B', 'P'};

void put_u32(std::string &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string &out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string &out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(out, bits);
}

class ByteReader {
 public:
  ByteReader(const std::string &data, const std::string &path) : data_(data), path_(path) {}

  std::uint32_t u32(const char *field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t u64(const char *field) {
    need(8, field);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  double f64(const char *field) {
    const std::uint64_t bits = u64(field);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  std::string str(const char *field) {
    const std::uint32_t len = u32(field);
    need(len, field);
    std::string s = data_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  void expect_end() const {
    if (pos_ != data_.size()) {
      throw FormatError(path_ + ": trailing bytes after checkpoint payload");
    }
  }

 private:
  void need(std::size_t n, const char *field) const {
    if (pos_ + n > data_.size()) {
      throw FormatError(path_ + ": truncated while reading " + field);
    }
  }

  const std::string &data_;
  std::string path_;
  std::size_t pos_ = 0;
};

Matrix tensor_matrix(const Tensor &t) {
  if (t.shape.size() != 2) throw FormatError("tensor " + t.name + " is not a matrix");
  Matrix m(static_cast<std::size_t>(t.shape[0]), static_cast<std::size_t>(t.shape[1]));
  m.values() = t.values;
  return m;
}

Tensor matrix_tensor(std::string name, const Matrix &m) {
  return Tensor{std::move(name), {m.rows(), m.cols()}, m.values()};
}

Tensor vector_tensor(std::string name, const std::vector<double> &v) {
  return Tensor{std::move(name), {v.size()}, v};
}

Tensor scalar_tensor(std::string name, double v) { return Tensor{std::move(name), {1}, {v}}; }

void require_kind(const Checkpoint &ck, const std::string &expected) {
  if (ck.kind != expected) {
    throw FormatError("checkpoint kind mismatch: have '" + ck.kind + "', expected '" + expected +
                      "'");
  }
}

}  // namespace

const Tensor &Checkpoint::tensor(const std::string &name) const {
  for (const Tensor &t : tensors) {
    if (t.name == name) return t;
  }
  throw FormatError("checkpoint is missing tensor '" + name + "'");
}

void save_checkpoint(const std::string &path, const Checkpoint &ck) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, ck.version);
  put_u32(out, static_cast<std::uint32_t>(ck.kind.size()));
  out.append(ck.kind);
  put_u64(out, ck.epoch);
  put_f64(out, ck.best_val_nce);
  put_u64(out, ck.seed);
  put_u32(out, ck.n_layers);
  put_u32(out, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const Tensor &t : ck.tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.append(t.name);
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    std::uint64_t count = 1;
    for (std::uint64_t d : t.shape) {
      put_u64(out, d);
      count *= d;
    }
    if (count != t.values.size()) {
      throw FormatError("tensor " + t.name + " shape does not match its data");
    }
    for (double v : t.values) put_f64(out, v);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string &path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  ByteReader r(data, path);
  if (data.size() < 4 || std::memcmp(data.data(), kMagic, 4) != 0) {
    throw FormatError(path + ": bad magic, not a QTBP checkpoint");
  }
  (void)r.u32("magic");

  Checkpoint ck;
  ck.version = r.u32("version");
  if (ck.version != kCheckpointVersion) {
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(ck.version));
  }
  ck.kind = r.str("kind");
  ck.epoch = r.u64("epoch");
  ck.best_val_nce = r.f64("best_val_nce");
  ck.seed = r.u64("seed");
  ck.n_layers = r.u32("n_layers");
  const std::uint32_t n_tensors = r.u32("tensor count");
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    Tensor t;
    t.name = r.str("tensor name");
    const std::uint32_t ndim = r.u32("tensor rank");
    std::uint64_t count = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      t.shape.push_back(r.u64("tensor shape"));
      count *= t.shape.back();
    }
    if (count > (std::uint64_t{1} << 32)) {
      throw FormatError(path + ": tensor " + t.name + " implausibly large");
    }
    t.values.resize(static_cast<std::size_t>(count));
    for (std::uint64_t v = 0; v < count; ++v) {
      t.values[static_cast<std::size_t>(v)] = r.f64("tensor data");
    }
    ck.tensors.push_back(std::move(t));
  }
  r.expect_end();
  return ck;
}

Checkpoint make_checkpoint(const RbmParams &p) {
  Checkpoint ck;
  ck.kind = "rbm";
  ck.tensors = {matrix_tensor("W", p.W), vector_tensor("c_V", p.c_V), vector_tensor("c_H", p.c_H),
                scalar_tensor("tau", p.tau)};
  return ck;
}

Checkpoint make_checkpoint(const DbmParams &p) {
  Checkpoint ck;
  ck.kind = "dbm";
  ck.tensors = {matrix_tensor("W_H1V", p.W_H1V), matrix_tensor("W_H2H1", p.W_H2H1),
                vector_tensor("c_V", p.c_V),     vector_tensor("c_H1", p.c_H1),
                vector_tensor("c_H2", p.c_H2),   scalar_tensor("tau", p.tau)};
  return ck;
}

Checkpoint make_checkpoint(const GrbmParams &p, double epsilon) {
  Checkpoint ck;
  ck.kind = "grbm";
  ck.tensors = {matrix_tensor("W", p.W), vector_tensor("b", p.b), vector_tensor("c", p.c),
                scalar_tensor("epsilon", epsilon)};
  return ck;
}

Checkpoint make_checkpoint(const GmrfParams &p) {
  Checkpoint ck;
  ck.kind = "gmrf";
  ck.tensors = {matrix_tensor("pot_ud", p.pot_ud), matrix_tensor("pot_lr", p.pot_lr),
                matrix_tensor("pot_d1", p.pot_d1), matrix_tensor("pot_d2", p.pot_d2),
                vector_tensor("noise", {p.noise.p_contour, p.noise.p_in, p.noise.p_out})};
  return ck;
}

RbmParams rbm_from_checkpoint(const Checkpoint &ck) {
  require_kind(ck, "rbm");
  RbmParams p;
  p.W = tensor_matrix(ck.tensor("W"));
  p.c_V = ck.tensor("c_V").values;
  p.c_H = ck.tensor("c_H").values;
  p.tau = ck.tensor("tau").values.at(0);
  p.validate();
  return p;
}

DbmParams dbm_from_checkpoint(const Checkpoint &ck) {
  require_kind(ck, "dbm");
  DbmParams p;
  p.W_H1V = tensor_matrix(ck.tensor("W_H1V"));
  p.W_H2H1 = tensor_matrix(ck.tensor("W_H2H1"));
  p.c_V = ck.tensor("c_V").values;
  p.c_H1 = ck.tensor("c_H1").values;
  p.c_H2 = ck.tensor("c_H2").values;
  p.tau = ck.tensor("tau").values.at(0);
  p.validate();
  return p;
}

GrbmParams grbm_from_checkpoint(const Checkpoint &ck, double *epsilon) {
  require_kind(ck, "grbm");
  GrbmParams p;
  p.W = tensor_matrix(ck.tensor("W"));
  p.b = ck.tensor("b").values;
  p.c = ck.tensor("c").values;
  p.validate();
  if (epsilon != nullptr) *epsilon = ck.tensor("epsilon").values.at(0);
  return p;
}

GmrfParams gmrf_from_checkpoint(const Checkpoint &ck) {
  require_kind(ck, "gmrf");
  GmrfParams p;
  p.pot_ud = tensor_matrix(ck.tensor("pot_ud"));
  p.pot_lr = tensor_matrix(ck.tensor("pot_lr"));
  p.pot_d1 = tensor_matrix(ck.tensor("pot_d1"));
  p.pot_d2 = tensor_matrix(ck.tensor("pot_d2"));
  const auto &noise = ck.tensor("noise").values;
  if (noise.size() != 3) throw FormatError("noise tensor must have 3 entries");
  p.noise = GmrfNoise{noise[0], noise[1], noise[2]};
  p.K = p.pot_ud.rows();
  p.validate();
  return p;
}

}  // namespace qtbp
