#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "ssp/errors.hpp"

namespace ssp::binio {

// Explicit little-endian scalar IO so the file formats are byte-stable
// across platforms.

inline void put_u8(std::ostream& out, uint8_t v) {
  out.put(static_cast<char>(v));
}
inline void put_u16(std::ostream& out, uint16_t v) {
  out.put(static_cast<char>(v & 0xff));
  out.put(static_cast<char>((v >> 8) & 0xff));
}
inline void put_u32(std::ostream& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f32(std::ostream& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

inline void read_bytes(std::istream& in, void* dst, size_t n,
                       const std::string& path) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n)
    throw load_error(load_errc::truncated, path + ": unexpected end of file");
}

inline uint8_t get_u8(std::istream& in, const std::string& path) {
  uint8_t b;
  read_bytes(in, &b, 1, path);
  return b;
}
inline uint16_t get_u16(std::istream& in, const std::string& path) {
  uint8_t b[2];
  read_bytes(in, b, 2, path);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}
inline uint32_t get_u32(std::istream& in, const std::string& path) {
  uint8_t b[4];
  read_bytes(in, b, 4, path);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}
inline float get_f32(std::istream& in, const std::string& path) {
  uint32_t bits = get_u32(in, path);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace ssp::binio
