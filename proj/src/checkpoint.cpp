#include "c2al/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace c2al {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'C', '2', 'A', 'L'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void bytes(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
  void matrix(const Matrix& m) { raw(m.data(), sizeof(double) * m.size()); }
  void vector(const Vector& v) { raw(v.data(), sizeof(double) * v.size()); }

  void write_to(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw IoError("checkpoint: cannot open " + path.string() + " for writing");
    }
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) {
      throw IoError("checkpoint: write failed for " + path.string());
    }
  }

 private:
  void raw(const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> buf) : buf_(std::move(buf)) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  Matrix matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    raw(m.data(), sizeof(double) * m.size());
    return m;
  }
  Vector vector(Index n) {
    Vector v(n);
    raw(v.data(), sizeof(double) * n);
    return v;
  }
  bool exhausted() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > buf_.size()) {
      throw IoError("corrupt checkpoint: truncated file");
    }
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

void write_head(Writer& w, const Mlp& head) {
  for (std::size_t l = 0; l < head.weights.size(); ++l) {
    w.matrix(head.weights[l]);
    w.vector(head.biases[l]);
  }
}

Mlp read_head(Reader& r, const ModelConfig& cfg) {
  Mlp head;
  Index in_dim = static_cast<Index>(cfg.embed_dim) * cfg.compress_dim;
  for (int width : cfg.head_hidden) {
    head.weights.push_back(r.matrix(width, in_dim));
    head.biases.push_back(r.vector(width));
    in_dim = width;
  }
  head.weights.push_back(r.matrix(1, in_dim));
  head.biases.push_back(r.vector(1));
  return head;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const ModelConfig& config,
                     const std::filesystem::path& path) {
  config.validate();
  if (params.head_aux.has_value() != params.tail_aux.has_value()) {
    throw ContractError("checkpoint: aux heads must be present as a pair");
  }
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  const std::string cfg_json = config.to_json_string();
  w.u32(static_cast<std::uint32_t>(cfg_json.size()));
  w.bytes(cfg_json.data(), cfg_json.size());
  w.u8(params.has_aux() ? 1 : 0);
  for (const Matrix& e : params.embeddings) {
    w.matrix(e);
  }
  w.matrix(params.attention);
  write_head(w, params.primary_head);
  if (params.has_aux()) {
    write_head(w, *params.head_aux);
    write_head(w, *params.tail_aux);
  }
  w.write_to(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("checkpoint: cannot open " + path.string());
  }
  std::vector<char> buf(std::istreambuf_iterator<char>(in), {});
  Reader r(std::move(buf));

  const std::string magic = r.str(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw IoError("corrupt checkpoint: bad magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw IoError("corrupt checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t cfg_len = r.u32();
  Checkpoint ckpt;
  ckpt.config = ModelConfig::from_json_string(r.str(cfg_len));
  const std::uint8_t aux_flag = r.u8();
  if (aux_flag > 1) {
    throw IoError("corrupt checkpoint: bad aux flag");
  }

  const ModelConfig& cfg = ckpt.config;
  ckpt.params.embeddings.reserve(cfg.num_slots);
  for (int slot = 0; slot < cfg.num_slots; ++slot) {
    ckpt.params.embeddings.push_back(r.matrix(cfg.vocab_sizes[slot], cfg.embed_dim));
  }
  ckpt.params.attention = r.matrix(cfg.embed_dim, cfg.compress_dim);
  ckpt.params.primary_head = read_head(r, cfg);
  if (aux_flag == 1) {
    ckpt.params.head_aux = read_head(r, cfg);
    ckpt.params.tail_aux = read_head(r, cfg);
  }
  if (!r.exhausted()) {
    throw IoError("corrupt checkpoint: trailing bytes");
  }
  return ckpt;
}

}  // namespace c2al
