#ifndef UDA_BINARY_IO_HPP
#define UDA_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "uda/error.hpp"

// Little-endian primitives shared by the dataset, checkpoint and bank files.
namespace uda::binio {

template <typename UInt>
void put_uint(std::ostream& os, UInt value) {
  char bytes[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF);
  }
  os.write(bytes, sizeof(UInt));
}

template <typename UInt>
UInt get_uint(std::istream& is, const char* what) {
  unsigned char bytes[sizeof(UInt)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(UInt))) {
    throw Error(ErrorKind::Format, std::string("truncated file while reading ") + what);
  }
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    value |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  }
  return static_cast<UInt>(value);
}

inline void put_f32(std::ostream& os, float value) { put_uint(os, std::bit_cast<std::uint32_t>(value)); }

inline float get_f32(std::istream& is, const char* what) {
  return std::bit_cast<float>(get_uint<std::uint32_t>(is, what));
}

inline void put_i32(std::ostream& os, std::int32_t value) {
  put_uint(os, static_cast<std::uint32_t>(value));
}

inline std::int32_t get_i32(std::istream& is, const char* what) {
  return static_cast<std::int32_t>(get_uint<std::uint32_t>(is, what));
}

inline void put_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

inline void expect_magic(std::istream& is, const char (&magic)[5]) {
  char got[4] = {};
  if (!is.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw Error(ErrorKind::Format, std::string("bad magic, expected ") + magic);
  }
}

inline void expect_version(std::istream& is, std::uint16_t expected) {
  const auto version = get_uint<std::uint16_t>(is, "version");
  if (version != expected) {
    throw Error(ErrorKind::Format, "unsupported version " + std::to_string(version));
  }
}

}  // namespace uda::binio

#endif  // UDA_BINARY_IO_HPP
