#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "herdpipe/core/error.hpp"
#include "herdpipe/io/files.hpp"
#include "herdpipe/io/jsonl.hpp"
#include "herdpipe/learn/bilstm.hpp"
#include "herdpipe/learn/mlp.hpp"

namespace herdpipe::learn {

// MDL1 layout, little-endian:
//   "MDL1" | kind u32 | n_shape u32 | shape u32 x n_shape |
//   n_params u64 | params f64 x n_params | config_len u32 | config JSON bytes

enum class ModelKind : std::uint32_t { mlp = 1, bilstm = 2 };

inline std::string to_string(ModelKind k) { return k == ModelKind::mlp ? "mlp" : "bilstm"; }

inline ModelKind model_kind_from(const std::string& s) {
  if (s == "mlp") return ModelKind::mlp;
  if (s == "bilstm") return ModelKind::bilstm;
  throw Error(Errc::invalid_config, "unknown model kind '" + s + "' (expected mlp or bilstm)");
}

struct Checkpoint {
  ModelKind kind = ModelKind::mlp;
  std::vector<std::uint32_t> shape;
  VectorXd params;
  io::json config = io::json::object();
};

namespace detail {

inline void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b, std::string origin) : b_(b), origin_(std::move(origin)) {}
  std::uint64_t le(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw Error(Errc::truncation, origin_ + " is truncated at byte " + std::to_string(pos_));
  }

 private:
  const std::vector<std::uint8_t>& b_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  std::vector<std::uint8_t> out{'M', 'D', 'L', '1'};
  detail::put_le(out, static_cast<std::uint32_t>(ck.kind), 4);
  detail::put_le(out, ck.shape.size(), 4);
  for (auto s : ck.shape) detail::put_le(out, s, 4);
  detail::put_le(out, static_cast<std::uint64_t>(ck.params.size()), 8);
  for (Index i = 0; i < ck.params.size(); ++i) detail::put_le(out, std::bit_cast<std::uint64_t>(ck.params[i]), 8);
  const std::string cfg = ck.config.dump();
  detail::put_le(out, cfg.size(), 4);
  out.insert(out.end(), cfg.begin(), cfg.end());
  return out;
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>") {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "MDL1", 4) != 0)
    throw Error(Errc::format, origin + " is not an MDL1 model checkpoint");
  detail::Reader r(bytes, origin);
  r.str(4);
  Checkpoint ck;
  const auto kind = static_cast<std::uint32_t>(r.le(4));
  if (kind != 1 && kind != 2) throw Error(Errc::format, origin + " has unknown model kind " + std::to_string(kind));
  ck.kind = static_cast<ModelKind>(kind);
  const auto n_shape = static_cast<std::size_t>(r.le(4));
  r.need(4 * n_shape);
  for (std::size_t i = 0; i < n_shape; ++i) ck.shape.push_back(static_cast<std::uint32_t>(r.le(4)));
  const auto n = r.le(8);
  if (n > (bytes.size() / 8)) throw Error(Errc::truncation, origin + " declares more parameters than it holds");
  ck.params.resize(static_cast<Index>(n));
  for (std::uint64_t i = 0; i < n; ++i) ck.params[static_cast<Index>(i)] = std::bit_cast<double>(r.le(8));
  const auto len = static_cast<std::size_t>(r.le(4));
  try {
    ck.config = io::json::parse(r.str(len));
  } catch (const io::json::parse_error& e) {
    throw Error(Errc::format, origin + " has a malformed config echo: " + e.what());
  }
  if (!r.done()) throw Error(Errc::format, origin + " has trailing bytes");
  return ck;
}

inline void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  io::write_bytes(path, encode_checkpoint(ck));
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_bytes(path), path.string());
}

inline Checkpoint make_checkpoint(const MlpParams& p, io::json config) {
  config["dropout"] = p.shape.dropout;
  return {ModelKind::mlp,
          {static_cast<std::uint32_t>(p.shape.input_dim), static_cast<std::uint32_t>(p.shape.hidden1),
           static_cast<std::uint32_t>(p.shape.hidden2), static_cast<std::uint32_t>(p.shape.classes)},
          p.values,
          std::move(config)};
}

inline Checkpoint make_checkpoint(const BiLstmParams& p, io::json config) {
  config["dropout"] = p.shape.dropout;
  return {ModelKind::bilstm,
          {static_cast<std::uint32_t>(p.shape.input_dim), static_cast<std::uint32_t>(p.shape.hidden),
           static_cast<std::uint32_t>(p.shape.head_hidden), static_cast<std::uint32_t>(p.shape.classes)},
          p.values,
          std::move(config)};
}

namespace detail {

template <class Params>
Params restore(const Checkpoint& ck, Params p) {
  if (p.values.size() != ck.params.size())
    throw Error(Errc::format, "checkpoint holds " + std::to_string(ck.params.size()) + " parameters, shape needs " +
                                  std::to_string(p.values.size()));
  p.values = ck.params;
  return p;
}

inline double dropout_of(const Checkpoint& ck, double fallback) {
  return ck.config.contains("dropout") ? ck.config["dropout"].get<double>() : fallback;
}

}  // namespace detail

inline MlpParams mlp_from_checkpoint(const Checkpoint& ck) {
  if (ck.kind != ModelKind::mlp || ck.shape.size() != 4) throw Error(Errc::format, "checkpoint is not an MLP");
  MlpShape s{static_cast<int>(ck.shape[0]), static_cast<int>(ck.shape[1]), static_cast<int>(ck.shape[2]),
             static_cast<int>(ck.shape[3]), detail::dropout_of(ck, 0.5)};
  return detail::restore(ck, MlpParams(s));
}

inline BiLstmParams bilstm_from_checkpoint(const Checkpoint& ck) {
  if (ck.kind != ModelKind::bilstm || ck.shape.size() != 4) throw Error(Errc::format, "checkpoint is not a BiLSTM");
  BiLstmShape s{static_cast<int>(ck.shape[0]), static_cast<int>(ck.shape[1]), static_cast<int>(ck.shape[2]),
                static_cast<int>(ck.shape[3]), detail::dropout_of(ck, 0.3)};
  return detail::restore(ck, BiLstmParams(s));
}

}  // namespace herdpipe::learn
