#pragma once

// Binary checkpoint container.
//
//   magic "SRLCKPT\0" | u32 version | u32 section count
//   section*: u32 kind | u64 payload bytes | payload
//   u64 FNV-1a hash of every preceding byte
//
// All integers and floats are little-endian. Metadata is UTF-8 "key=value\n"
// lines. Tensors are written as u32 rows, u32 cols, then rows*cols f32 values
// in column-major order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "srl/numerics/adam.hpp"
#include "srl/numerics/mlp.hpp"

namespace srl::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { corrupted, version_mismatch, io };
  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
  std::map<std::string, std::string> extra;
  std::vector<std::pair<std::string, MlpParams>> networks;
  std::vector<std::pair<std::string, AdamState>> optimizers;

  const MlpParams& network(const std::string& name) const {
    for (const auto& [n, p] : networks)
      if (n == name) return p;
    throw std::out_of_range("checkpoint has no network '" + name + "'");
  }
  const AdamState& optimizer(const std::string& name) const {
    for (const auto& [n, s] : optimizers)
      if (n == name) return s;
    throw std::out_of_range("checkpoint has no optimizer '" + name + "'");
  }
};

namespace detail {

enum class Section : std::uint32_t { metadata = 1, network = 2, optimizer = 3 };

inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  template <class M>
  void tensor(const M& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) f32(m.data()[i]);
  }
  void raw(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  template <class T>
  void put_le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::uint64_t u64() { return get_le<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(get_le<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  Matrix tensor() {
    const std::uint32_t rows = u32();
    const std::uint32_t cols = u32();
    const std::uint64_t n = static_cast<std::uint64_t>(rows) * cols;
    need(n * 4);
    Matrix m(rows, cols);
    for (std::uint64_t i = 0; i < n; ++i) m.data()[i] = f32();
    return m;
  }
  std::span<const std::uint8_t> take(std::uint64_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_)
      throw CheckpointError(CheckpointError::Kind::corrupted, "checkpoint payload truncated");
  }
  template <class T>
  T get_le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline constexpr char kMagic[8] = {'S', 'R', 'L', 'C', 'K', 'P', 'T', '\0'};

inline void write_network(Writer& w, const std::string& name, const MlpParams& p) {
  w.str(name);
  w.u32(static_cast<std::uint32_t>(p.layer_sizes.size()));
  for (int s : p.layer_sizes) w.u32(static_cast<std::uint32_t>(s));
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    w.tensor(p.weights[l]);
    w.tensor(p.biases[l]);
  }
}

inline std::pair<std::string, MlpParams> read_network(Reader& r) {
  std::string name = r.str();
  const std::uint32_t n = r.u32();
  if (n < 2 || n > 1024) throw CheckpointError(CheckpointError::Kind::corrupted, "bad layer count");
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i < n; ++i) sizes.push_back(static_cast<int>(r.u32()));
  MlpParams p;
  try {
    p = MlpParams::zeros(sizes);
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(CheckpointError::Kind::corrupted, e.what());
  }
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    Matrix w = r.tensor();
    Matrix b = r.tensor();
    if (w.rows() != p.weights[l].rows() || w.cols() != p.weights[l].cols() ||
        b.rows() != p.biases[l].size() || b.cols() != 1)
      throw CheckpointError(CheckpointError::Kind::corrupted, "tensor shape disagrees with layer sizes");
    p.weights[l] = std::move(w);
    p.biases[l] = b.col(0);
  }
  p.touch();
  return {std::move(name), std::move(p)};
}

}  // namespace detail

/// Serializes parameters, optimizer states and metadata.
inline std::vector<std::uint8_t> save_checkpoint(const Checkpoint& ck) {
  using detail::Section;
  detail::Writer out;
  out.raw({reinterpret_cast<const std::uint8_t*>(detail::kMagic), sizeof(detail::kMagic)});
  out.u32(kCheckpointVersion);
  out.u32(static_cast<std::uint32_t>(1 + ck.networks.size() + ck.optimizers.size()));

  auto section = [&](Section kind, detail::Writer& payload) {
    out.u32(static_cast<std::uint32_t>(kind));
    out.u64(payload.bytes().size());
    out.raw(payload.bytes());
  };

  {
    std::ostringstream meta;
    meta << "config_hash=" << ck.config_hash << "\n"
         << "seed=" << ck.seed << "\n"
         << "iteration=" << ck.iteration << "\n";
    for (const auto& [k, v] : ck.extra) {
      if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
        throw std::invalid_argument("checkpoint metadata keys/values may not contain '=' or newlines");
      meta << k << "=" << v << "\n";
    }
    detail::Writer w;
    const std::string text = meta.str();
    w.raw({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
    section(Section::metadata, w);
  }
  for (const auto& [name, params] : ck.networks) {
    detail::Writer w;
    detail::write_network(w, name, params);
    section(Section::network, w);
  }
  for (const auto& [name, st] : ck.optimizers) {
    detail::Writer w;
    w.str(name);
    w.u64(st.step_count);
    w.f64(st.learning_rate);
    w.f64(st.lr_decay);
    w.f64(st.beta1);
    w.f64(st.beta2);
    w.f64(st.epsilon);
    w.u32(static_cast<std::uint32_t>(st.first_moment.weights.size()));
    for (std::size_t l = 0; l < st.first_moment.weights.size(); ++l) {
      w.tensor(st.first_moment.weights[l]);
      w.tensor(st.first_moment.biases[l]);
      w.tensor(st.second_moment.weights[l]);
      w.tensor(st.second_moment.biases[l]);
    }
    section(Section::optimizer, w);
  }
  const std::uint64_t h = detail::fnv1a(out.bytes());
  out.u64(h);
  return std::move(out.bytes());
}

inline Checkpoint load_checkpoint(std::span<const std::uint8_t> bytes) {
  using detail::Section;
  using Kind = CheckpointError::Kind;
  if (bytes.size() < sizeof(detail::kMagic) + 16)
    throw CheckpointError(Kind::corrupted, "checkpoint payload truncated");
  if (std::memcmp(bytes.data(), detail::kMagic, sizeof(detail::kMagic)) != 0)
    throw CheckpointError(Kind::corrupted, "not a checkpoint (bad magic)");

  detail::Reader header(bytes.subspan(sizeof(detail::kMagic), 4));
  const std::uint32_t version = header.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError(Kind::version_mismatch, "checkpoint version " + std::to_string(version) +
                                                      ", expected " +
                                                      std::to_string(kCheckpointVersion));

  const auto body = bytes.first(bytes.size() - 8);
  detail::Reader trailer(bytes.last(8));
  if (trailer.u64() != detail::fnv1a(body))
    throw CheckpointError(Kind::corrupted, "checkpoint checksum mismatch");

  detail::Reader r(body.subspan(sizeof(detail::kMagic) + 4));
  const std::uint32_t sections = r.u32();
  Checkpoint ck;
  bool saw_meta = false;
  for (std::uint32_t s = 0; s < sections; ++s) {
    const auto kind = static_cast<Section>(r.u32());
    const std::uint64_t len = r.u64();
    detail::Reader p(r.take(len));
    switch (kind) {
      case Section::metadata: {
        auto raw = p.take(len);
        std::istringstream in(std::string(reinterpret_cast<const char*>(raw.data()), raw.size()));
        std::string line;
        while (std::getline(in, line)) {
          const auto eq = line.find('=');
          if (eq == std::string::npos) throw CheckpointError(Kind::corrupted, "bad metadata line");
          std::string key = line.substr(0, eq), value = line.substr(eq + 1);
          try {
            if (key == "config_hash") ck.config_hash = std::stoull(value);
            else if (key == "seed") ck.seed = std::stoull(value);
            else if (key == "iteration") ck.iteration = std::stoull(value);
            else ck.extra[key] = value;
          } catch (const std::logic_error&) {
            throw CheckpointError(Kind::corrupted, "bad metadata value for " + key);
          }
        }
        saw_meta = true;
        break;
      }
      case Section::network:
        ck.networks.push_back(detail::read_network(p));
        break;
      case Section::optimizer: {
        AdamState st;
        std::string name = p.str();
        st.step_count = p.u64();
        st.learning_rate = p.f64();
        st.lr_decay = p.f64();
        st.beta1 = p.f64();
        st.beta2 = p.f64();
        st.epsilon = p.f64();
        const std::uint32_t layers = p.u32();
        if (layers > 1024) throw CheckpointError(Kind::corrupted, "bad optimizer layer count");
        for (std::uint32_t l = 0; l < layers; ++l) {
          st.first_moment.weights.push_back(p.tensor());
          st.first_moment.biases.push_back(p.tensor().col(0));
          st.second_moment.weights.push_back(p.tensor());
          st.second_moment.biases.push_back(p.tensor().col(0));
        }
        ck.optimizers.emplace_back(std::move(name), std::move(st));
        break;
      }
      default:
        throw CheckpointError(Kind::corrupted, "unknown checkpoint section");
    }
    if (!p.done()) throw CheckpointError(Kind::corrupted, "trailing bytes in checkpoint section");
  }
  if (!r.done()) throw CheckpointError(Kind::corrupted, "trailing bytes after sections");
  if (!saw_meta) throw CheckpointError(Kind::corrupted, "checkpoint has no metadata");
  return ck;
}

inline void write_checkpoint_file(const std::string& path, const Checkpoint& ck) {
  const auto bytes = save_checkpoint(ck);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError(CheckpointError::Kind::io, "cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw CheckpointError(CheckpointError::Kind::io, "failed writing " + path);
}

inline Checkpoint read_checkpoint_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError(CheckpointError::Kind::io, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return load_checkpoint(bytes);
}

}  // namespace srl::nn
