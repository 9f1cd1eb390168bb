#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "stratacast/error.hpp"

namespace stratacast::detail {

inline std::uint32_t to_le(std::uint32_t x) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((x & 0xffu) << 24) | ((x & 0xff00u) << 8) | ((x >> 8) & 0xff00u) | (x >> 24);
  }
  return x;
}

inline void write_u32(std::ostream& out, std::uint32_t x) {
  x = to_le(x);
  out.write(reinterpret_cast<const char*>(&x), sizeof x);
}

inline std::uint32_t read_u32(std::istream& in) {
  std::uint32_t x = 0;
  in.read(reinterpret_cast<char*>(&x), sizeof x);
  return to_le(x);
}

inline void write_f32(std::ostream& out, std::span<const float> values) {
  for (float f : values) write_u32(out, std::bit_cast<std::uint32_t>(f));
}

inline std::vector<float> read_f32(std::istream& in, std::size_t count) {
  std::vector<float> out(count);
  for (auto& f : out) f = std::bit_cast<float>(read_u32(in));
  return out;
}

// Raw little-endian f32 blob with no header.
inline void write_f32_file(const std::filesystem::path& path, std::span<const float> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::io, fmt::format("cannot open '{}' for writing", path.string()));
  write_f32(out, values);
  require(static_cast<bool>(out), ErrorKind::io, fmt::format("write failed for '{}'", path.string()));
}

inline std::vector<float> read_f32_file(const std::filesystem::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  require(static_cast<bool>(in), ErrorKind::io, fmt::format("cannot open '{}'", path.string()));
  const auto size = static_cast<std::uint64_t>(in.tellg());
  require(size == count * 4, ErrorKind::io,
          fmt::format("'{}' holds {} bytes, expected {}", path.string(), size, count * 4));
  in.seekg(0);
  auto values = read_f32(in, count);
  require(static_cast<bool>(in), ErrorKind::io, fmt::format("truncated '{}'", path.string()));
  return values;
}

}  // namespace stratacast::detail
