// Copyright (c) 2026, The idlike Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IDLIKE_BINARY_IO_HPP_
#define IDLIKE_BINARY_IO_HPP_

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "idlike/errors.hpp"

// Little-endian primitives, independent of host byte order.
namespace idlike::binio {

template <class U>
void put_uint(std::ostream& out, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <class U>
U get_uint(std::istream& in) {
  unsigned char buf[sizeof(U)];
  in.read(reinterpret_cast<char*>(buf), sizeof(U));
  enforce(in.gcount() == static_cast<std::streamsize>(sizeof(U)), ErrorCode::FormatError, "unexpected end of file");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

inline void put_f32(std::ostream& out, float f) { put_uint<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f)); }

inline float get_f32(std::istream& in) { return std::bit_cast<float>(get_uint<std::uint32_t>(in)); }

inline void put_bytes(std::ostream& out, std::string_view s) { out.write(s.data(), static_cast<std::streamsize>(s.size())); }

inline std::string get_bytes(std::istream& in, std::size_t n) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  enforce(in.gcount() == static_cast<std::streamsize>(n), ErrorCode::FormatError, "unexpected end of file");
  return s;
}

/// u32 length prefix followed by raw bytes.
inline void put_string(std::ostream& out, std::string_view s) {
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  put_bytes(out, s);
}

inline std::string get_string(std::istream& in) { return get_bytes(in, get_uint<std::uint32_t>(in)); }

}  // namespace idlike::binio

#endif  // IDLIKE_BINARY_IO_HPP_
