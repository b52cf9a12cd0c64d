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

#ifndef IDLIKE_CHECKPOINT_HPP_
#define IDLIKE_CHECKPOINT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "idlike/binary_io.hpp"
#include "idlike/encoder.hpp"
#include "idlike/errors.hpp"
#include "idlike/promptlearn.hpp"

namespace idlike {

/*
 * Prompt checkpoint layout (little-endian):
 *
 *   char[8]  magic "IDLKCKP1"
 *   u32      version (1)
 *   u32      K, C, L, text_context_dim
 *   u64      training step count
 *   K x { u32 length, bytes }          class names
 *   u32 length, bytes                  config snapshot (key = value text)
 *   f32[K * L * text_context_dim]      ID contexts, prompt-major, row-major
 *   f32[C * L * text_context_dim]      OOD contexts
 *
 * Class tokens are not stored; they are rebuilt from the class names through
 * the backend vocabulary on load.
 */
inline constexpr std::string_view kCheckpointMagic = "IDLKCKP1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  PromptSet prompts;
  std::uint64_t steps = 0;
  std::string config_snapshot;
};

inline void write_checkpoint(const std::filesystem::path& path, const PromptSet& ps, std::uint64_t steps,
                             const std::string& config_snapshot) {
  std::ofstream out(path, std::ios::binary);
  enforce(static_cast<bool>(out), ErrorCode::MissingFile, "cannot write " + path.string());
  binio::put_bytes(out, kCheckpointMagic);
  binio::put_uint<std::uint32_t>(out, kCheckpointVersion);
  binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(ps.num_classes()));
  binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(ps.num_ood()));
  binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(ps.length));
  binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(ps.context_dim));
  binio::put_uint<std::uint64_t>(out, steps);
  for (const auto& p : ps.id_prompts) binio::put_string(out, p.class_name);
  binio::put_string(out, config_snapshot);
  auto put_ctx = [&](const ContextVectors& ctx) {
    enforce(ctx.size() == ps.length, ErrorCode::FormatError, "context length mismatch");
    for (const auto& row : ctx) {
      enforce(row.size() == ps.context_dim, ErrorCode::FormatError, "context width mismatch");
      for (double v : row) binio::put_f32(out, static_cast<float>(v));
    }
  };
  for (const auto& p : ps.id_prompts) put_ctx(p.context);
  for (const auto& p : ps.ood_prompts) put_ctx(p.context);
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path, const EncoderBackend& backend) {
  std::ifstream in(path, std::ios::binary);
  enforce(static_cast<bool>(in), ErrorCode::MissingFile, "cannot open checkpoint " + path.string());
  enforce(binio::get_bytes(in, kCheckpointMagic.size()) == kCheckpointMagic, ErrorCode::FormatError,
          path.string() + ": bad checkpoint magic");
  enforce(binio::get_uint<std::uint32_t>(in) == kCheckpointVersion, ErrorCode::FormatError,
          path.string() + ": unsupported checkpoint version");
  const auto k = binio::get_uint<std::uint32_t>(in);
  const auto c = binio::get_uint<std::uint32_t>(in);
  const auto len = binio::get_uint<std::uint32_t>(in);
  const auto width = binio::get_uint<std::uint32_t>(in);
  enforce(width == backend.text_context_dim(), ErrorCode::DimensionMismatch,
          "checkpoint context width " + std::to_string(width) + " does not match backend " +
              std::to_string(backend.text_context_dim()));
  Checkpoint ck;
  ck.steps = binio::get_uint<std::uint64_t>(in);
  std::vector<std::string> names;
  for (std::uint32_t i = 0; i < k; ++i) names.push_back(binio::get_string(in));
  ck.config_snapshot = binio::get_string(in);
  auto get_ctx = [&] {
    ContextVectors ctx(len, std::vector<double>(width));
    for (auto& row : ctx)
      for (double& v : row) v = binio::get_f32(in);
    return ctx;
  };
  ck.prompts.length = len;
  ck.prompts.context_dim = width;
  for (const auto& name : names) ck.prompts.id_prompts.push_back(IdPrompt{name, get_ctx(), backend.token_embedding(name)});
  for (std::uint32_t i = 0; i < c; ++i) ck.prompts.ood_prompts.push_back(OodPrompt{get_ctx()});
  enforce(in.peek() == std::char_traits<char>::eof(), ErrorCode::FormatError, path.string() + ": trailing bytes");
  return ck;
}

}  // namespace idlike

#endif  // IDLIKE_CHECKPOINT_HPP_
