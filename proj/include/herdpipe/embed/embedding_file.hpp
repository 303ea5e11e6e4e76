#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <vector>

#include "herdpipe/core/error.hpp"
#include "herdpipe/io/files.hpp"

namespace herdpipe {

// EMB1 layout: "EMB1" | dim (u32 LE) | dim x f32 LE.

inline constexpr char kEmbeddingMagic[4] = {'E', 'M', 'B', '1'};

namespace detail {

inline void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32_le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_embedding(std::span<const float> vector) {
  if (vector.empty()) throw Error(Errc::invalid_input, "embedding dim must be >= 1");
  std::vector<std::uint8_t> out(kEmbeddingMagic, kEmbeddingMagic + 4);
  out.reserve(8 + 4 * vector.size());
  detail::put_u32_le(out, static_cast<std::uint32_t>(vector.size()));
  for (float v : vector) detail::put_u32_le(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline std::vector<float> decode_embedding(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>") {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kEmbeddingMagic, 4) != 0)
    throw Error(Errc::not_an_embedding, origin + " does not start with EMB1");
  if (bytes.size() < 8) throw Error(Errc::truncation, origin + " is missing its dimension field");
  const std::uint32_t dim = detail::get_u32_le(bytes.data() + 4);
  const std::size_t expected = 8 + 4 * static_cast<std::size_t>(dim);
  if (dim == 0) throw Error(Errc::not_an_embedding, origin + " declares dim 0");
  if (bytes.size() < expected)
    throw Error(Errc::truncation, origin + " holds " + std::to_string(bytes.size()) + " bytes, expected " +
                                      std::to_string(expected));
  if (bytes.size() > expected) throw Error(Errc::not_an_embedding, origin + " has trailing bytes");
  std::vector<float> v(dim);
  for (std::uint32_t i = 0; i < dim; ++i) v[i] = std::bit_cast<float>(detail::get_u32_le(bytes.data() + 8 + 4 * i));
  return v;
}

inline void write_embedding(const std::filesystem::path& path, std::span<const float> vector) {
  io::write_bytes(path, encode_embedding(vector));
}

inline std::vector<float> read_embedding(const std::filesystem::path& path) {
  const auto bytes = io::read_bytes(path);
  return decode_embedding(bytes, path.string());
}

}  // namespace herdpipe
