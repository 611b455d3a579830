#pragma once

// Little-endian stream helpers shared by the binary file formats. Writers
// never fail silently; readers return false on a short read so each caller
// can throw its own typed error.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

namespace adafuse::binio {

inline void put_bytes(std::ostream& os, const void* src, std::size_t n) {
  os.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
}

inline bool get_bytes(std::istream& is, void* dst, std::size_t n) {
  is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(is.gcount()) == n;
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {
      static_cast<unsigned char>(v & 0xFF),
      static_cast<unsigned char>((v >> 8) & 0xFF),
      static_cast<unsigned char>((v >> 16) & 0xFF),
      static_cast<unsigned char>((v >> 24) & 0xFF),
  };
  put_bytes(os, b, 4);
}

inline bool get_u32(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!get_bytes(is, b, 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) |
      (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, static_cast<std::uint32_t>(v & 0xFFFFFFFFull));
  put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline bool get_u64(std::istream& is, std::uint64_t& v) {
  std::uint32_t lo = 0, hi = 0;
  if (!get_u32(is, lo) || !get_u32(is, hi)) return false;
  v = static_cast<std::uint64_t>(lo) | (static_cast<std::uint64_t>(hi) << 32);
  return true;
}

inline void put_f32(std::ostream& os, float v) {
  put_u32(os, std::bit_cast<std::uint32_t>(v));
}

inline bool get_f32(std::istream& is, float& v) {
  std::uint32_t u = 0;
  if (!get_u32(is, u)) return false;
  v = std::bit_cast<float>(u);
  return true;
}

// In-memory variants used when a payload is checksummed before writing.
inline void append_f32(std::string& buf, float v) {
  const std::uint32_t u = std::bit_cast<std::uint32_t>(v);
  buf.push_back(static_cast<char>(u & 0xFF));
  buf.push_back(static_cast<char>((u >> 8) & 0xFF));
  buf.push_back(static_cast<char>((u >> 16) & 0xFF));
  buf.push_back(static_cast<char>((u >> 24) & 0xFF));
}

inline float read_f32(const unsigned char* p) {
  const std::uint32_t u = static_cast<std::uint32_t>(p[0]) |
                          (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) |
                          (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(u);
}

} // namespace adafuse::binio
