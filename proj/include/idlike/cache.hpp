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

#ifndef IDLIKE_CACHE_HPP_
#define IDLIKE_CACHE_HPP_

#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "idlike/binary_io.hpp"
#include "idlike/embedcore.hpp"
#include "idlike/errors.hpp"

namespace idlike {

/*
 * Embedding cache layout (all integers little-endian):
 *
 *   offset 0   char[8]  magic "IDLKEMB1"
 *   offset 8   u32      version (1)
 *   offset 12  u32      dim
 *   offset 16  u64      count
 *   offset 24  f32[count * dim]  row-major values
 *
 * The sidecar "<file>.idx" is UTF-8 text, one line per row:
 *   sample_id <TAB> row [<TAB> label]
 */
inline constexpr std::string_view kCacheMagic = "IDLKEMB1";
inline constexpr std::uint32_t kCacheVersion = 1;
inline constexpr std::size_t kCacheHeaderBytes = 24;

struct CacheIndexEntry {
  std::string sample_id;
  std::size_t row = 0;
  std::optional<std::size_t> label;

  friend bool operator==(const CacheIndexEntry&, const CacheIndexEntry&) = default;
};

struct EmbeddingCache {
  std::size_t dim = 0;
  std::vector<float> values;  // count x dim
  std::vector<CacheIndexEntry> index;

  std::size_t count() const noexcept { return dim == 0 ? 0 : values.size() / dim; }

  std::size_t append(std::span<const double> v) {
    if (dim == 0) dim = v.size();
    enforce(v.size() == dim, ErrorCode::DimensionMismatch, "cache row width mismatch");
    for (double x : v) values.push_back(static_cast<float>(x));
    return count() - 1;
  }

  /// Row as an Embedding (renormalized in double after the float32 round trip).
  Embedding embedding(std::size_t row) const {
    enforce(row < count(), ErrorCode::FormatError, "cache row out of range");
    std::vector<double> v(values.begin() + static_cast<std::ptrdiff_t>(row * dim),
                          values.begin() + static_cast<std::ptrdiff_t>((row + 1) * dim));
    return normalize(v);
  }

  friend bool operator==(const EmbeddingCache&, const EmbeddingCache&) = default;
};

inline std::filesystem::path cache_index_path(const std::filesystem::path& p) {
  return std::filesystem::path(p.string() + ".idx");
}

/// Cache root: $IDLIKE_CACHE_DIR when set, otherwise `fallback`.
inline std::filesystem::path cache_dir(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("IDLIKE_CACHE_DIR"); env && *env) return std::filesystem::path(env);
  return fallback;
}

inline void write_cache(const std::filesystem::path& path, const EmbeddingCache& cache) {
  for (const auto& e : cache.index)
    enforce(e.row < cache.count(), ErrorCode::FormatError, "cache index row out of range");
  {
    std::ofstream out(path, std::ios::binary);
    enforce(static_cast<bool>(out), ErrorCode::MissingFile, "cannot write " + path.string());
    binio::put_bytes(out, kCacheMagic);
    binio::put_uint<std::uint32_t>(out, kCacheVersion);
    binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(cache.dim));
    binio::put_uint<std::uint64_t>(out, static_cast<std::uint64_t>(cache.count()));
    for (float f : cache.values) binio::put_f32(out, f);
  }
  std::ofstream idx(cache_index_path(path), std::ios::binary);
  enforce(static_cast<bool>(idx), ErrorCode::MissingFile, "cannot write " + cache_index_path(path).string());
  for (const auto& e : cache.index) {
    idx << e.sample_id << '\t' << e.row;
    if (e.label) idx << '\t' << *e.label;
    idx << '\n';
  }
}

inline EmbeddingCache read_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  enforce(static_cast<bool>(in), ErrorCode::MissingFile, "cannot open cache " + path.string());
  enforce(binio::get_bytes(in, kCacheMagic.size()) == kCacheMagic, ErrorCode::FormatError,
          path.string() + ": bad cache magic");
  const auto version = binio::get_uint<std::uint32_t>(in);
  enforce(version == kCacheVersion, ErrorCode::FormatError, path.string() + ": unsupported cache version");
  EmbeddingCache cache;
  cache.dim = binio::get_uint<std::uint32_t>(in);
  const auto count = binio::get_uint<std::uint64_t>(in);
  cache.values.resize(static_cast<std::size_t>(count) * cache.dim);
  for (float& f : cache.values) f = binio::get_f32(in);
  enforce(in.peek() == std::char_traits<char>::eof(), ErrorCode::FormatError, path.string() + ": trailing bytes");

  std::ifstream idx(cache_index_path(path));
  if (idx) {
    std::string line;
    while (std::getline(idx, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      CacheIndexEntry e;
      std::string row, label;
      std::getline(ls, e.sample_id, '\t');
      std::getline(ls, row, '\t');
      enforce(!row.empty(), ErrorCode::FormatError, "malformed cache index line: " + line);
      e.row = std::stoul(row);
      if (std::getline(ls, label, '\t') && !label.empty()) e.label = std::stoul(label);
      enforce(e.row < cache.count(), ErrorCode::FormatError, "cache index row out of range: " + line);
      cache.index.push_back(std::move(e));
    }
  }
  return cache;
}

}  // namespace idlike

#endif  // IDLIKE_CACHE_HPP_
