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

#ifndef IDLIKE_ENCODER_HPP_
#define IDLIKE_ENCODER_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "idlike/embedcore.hpp"
#include "idlike/errors.hpp"
#include "idlike/image.hpp"

namespace idlike {

/// Placeholder substituted by the class name in zero-shot templates.
inline constexpr std::string_view kClassPlaceholder = "{}";
inline constexpr std::string_view kDefaultTemplate = "a photo of a {}";

struct BackendInfo {
  std::string name;
  std::size_t dim = kDefaultEmbeddingDim;
  std::size_t text_context_dim = kDefaultEmbeddingDim;
  bool differentiable_text = false;
};

/// Token embeddings fed to the text encoder, one row per token.
struct TokenSequence {
  std::vector<std::vector<double>> entries;
  std::optional<std::size_t> class_slot;

  std::size_t size() const noexcept { return entries.size(); }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// d(scalar)/d(entry) for every token entry, same shape as TokenSequence::entries.
using TokenGrad = std::vector<std::vector<double>>;

/// Forward text encoding plus a vector-Jacobian product closure bound to it.
struct TextForward {
  Embedding embedding;
  std::function<TokenGrad(std::span<const double> cotangent)> vjp;
};

/**
 * Frozen dual encoder. Implementations must be immutable after construction:
 * every method is const and callable concurrently.
 */
class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;

  virtual const BackendInfo& info() const noexcept = 0;
  virtual Embedding encode_image(const ImageRef& img) const = 0;
  virtual Embedding encode_text(const TokenSequence& toks) const = 0;

  /// Only available when info().differentiable_text is set.
  virtual TextForward encode_text_with_vjp(const TokenSequence& toks) const {
    (void)toks;
    throw Error(ErrorCode::GradientUnsupported, info().name + " does not expose text-path gradients");
  }

  /// Vocabulary lookup for a single whitespace-free token.
  virtual std::vector<double> token_embedding(std::string_view word) const = 0;

  /// Digest of every frozen parameter; training must leave it unchanged.
  virtual std::uint64_t parameter_checksum() const = 0;

  std::size_t dim() const noexcept { return info().dim; }
  std::size_t text_context_dim() const noexcept { return info().text_context_dim; }
};

inline void validate(const TokenSequence& toks, std::size_t context_dim) {
  enforce(!toks.entries.empty(), ErrorCode::InvalidConfig, "token sequence must have length >= 1");
  for (const auto& e : toks.entries)
    enforce(e.size() == context_dim, ErrorCode::DimensionMismatch,
            "token entry of width " + std::to_string(e.size()) + ", expected " + std::to_string(context_dim));
  if (toks.class_slot)
    enforce(*toks.class_slot < toks.entries.size(), ErrorCode::InvalidConfig, "class_slot out of range");
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64_bytes(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(std::string_view(static_cast<const char*>(data), n), h);
}

inline std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

/**
 * Fill `templ` with `class_name` and embed every token through the backend
 * vocabulary. The class name always occupies exactly one token, so sequences
 * for different classes differ only at class_slot.
 */
inline TokenSequence zero_shot_tokens(const EncoderBackend& backend, std::string_view class_name,
                                      std::string_view templ) {
  const auto words = split_whitespace(templ);
  std::size_t placeholders = 0;
  for (std::size_t pos = templ.find(kClassPlaceholder); pos != std::string_view::npos;
       pos = templ.find(kClassPlaceholder, pos + 1))
    ++placeholders;
  enforce(placeholders == 1, ErrorCode::InvalidConfig,
          "template must contain exactly one {} placeholder: '" + std::string(templ) + "'");
  TokenSequence toks;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i] == kClassPlaceholder) {
      toks.class_slot = i;
      toks.entries.push_back(backend.token_embedding(class_name));
    } else {
      toks.entries.push_back(backend.token_embedding(words[i]));
    }
  }
  enforce(toks.class_slot.has_value(), ErrorCode::InvalidConfig,
          "placeholder must be a standalone token: '" + std::string(templ) + "'");
  return toks;
}

/// Zero-shot class embedding; multiple templates are averaged then renormalized.
inline Embedding zero_shot_embedding(const EncoderBackend& backend, std::string_view class_name,
                                     std::span<const std::string> templates) {
  enforce(!templates.empty(), ErrorCode::InvalidConfig, "at least one template is required");
  if (templates.size() == 1) return backend.encode_text(zero_shot_tokens(backend, class_name, templates[0]));
  std::vector<double> acc(backend.dim(), 0.0);
  for (const auto& t : templates) {
    const Embedding e = backend.encode_text(zero_shot_tokens(backend, class_name, t));
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += e[i];
  }
  return normalize(acc);
}

/// Full Jacobian d(output)/d(entry) for one token entry, as dim x context_dim
/// row-major, assembled from dim vector-Jacobian products.
inline std::vector<double> text_jacobian(const EncoderBackend& backend, const TokenSequence& toks,
                                         std::size_t entry) {
  const TextForward fwd = backend.encode_text_with_vjp(toks);
  const std::size_t d = backend.dim();
  const std::size_t w = backend.text_context_dim();
  std::vector<double> jac(d * w, 0.0);
  std::vector<double> cot(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    cot.assign(d, 0.0);
    cot[i] = 1.0;
    const TokenGrad g = fwd.vjp(cot);
    for (std::size_t j = 0; j < w; ++j) jac[i * w + j] = g[entry][j];
  }
  return jac;
}

/**
 * Deterministic stand-in for a pretrained dual encoder.
 *
 * Image path: area-resample to side x side, average channels, map to [-1, 1],
 * fixed Gaussian affine map, tanh, normalize.
 * Text path: mean-pool token entries, fixed Gaussian affine map, tanh,
 * normalize. The text path has an exact analytic VJP.
 * Vocabulary: FNV-1a hash of the token into a bucket; each bucket's row is
 * drawn from its own seeded stream, so no table is materialized.
 */
class ToyBackend final : public EncoderBackend {
 public:
  static constexpr std::size_t kInputSide = 8;
  static constexpr std::size_t kVocabBuckets = 1u << 14;
  static constexpr double kBiasStd = 0.1;

  ToyBackend(std::uint64_t seed, std::size_t dim, std::size_t text_context_dim = 0)
      : seed_(seed) {
    enforce(dim >= 8, ErrorCode::InvalidConfig, "toy backend requires dim >= 8");
    info_.name = "toy";
    info_.dim = dim;
    info_.text_context_dim = text_context_dim == 0 ? dim : text_context_dim;
    info_.differentiable_text = true;

    const std::size_t pixels = kInputSide * kInputSide;
    std::seed_seq sseq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x1a9eu};
    std::mt19937_64 rng(sseq);
    std::normal_distribution<double> img_dist(0.0, 1.0 / std::sqrt(static_cast<double>(pixels)));
    image_weights_.resize(dim * pixels);
    for (double& w : image_weights_) w = img_dist(rng);
    std::normal_distribution<double> txt_dist(0.0, 1.0 / std::sqrt(static_cast<double>(info_.text_context_dim)));
    text_weights_.resize(dim * info_.text_context_dim);
    for (double& w : text_weights_) w = txt_dist(rng);
    std::normal_distribution<double> bias_dist(0.0, kBiasStd);
    image_bias_.resize(dim);
    for (double& b : image_bias_) b = bias_dist(rng);
    text_bias_.resize(dim);
    for (double& b : text_bias_) b = bias_dist(rng);
  }

  const BackendInfo& info() const noexcept override { return info_; }
  std::uint64_t seed() const noexcept { return seed_; }

  Embedding encode_image(const ImageRef& img) const override {
    const Image small = materialize(img, kInputSide, kInputSide);
    const std::size_t pixels = kInputSide * kInputSide;
    std::vector<double> x(pixels, 0.0);
    for (std::size_t p = 0; p < pixels; ++p) {
      double s = 0.0;
      for (std::size_t c = 0; c < small.channels; ++c) s += small.pixels[p * small.channels + c];
      x[p] = 2.0 * s / static_cast<double>(small.channels) - 1.0;
    }
    std::vector<double> h(info_.dim);
    for (std::size_t i = 0; i < info_.dim; ++i) {
      const std::span<const double> row(image_weights_.data() + i * pixels, pixels);
      h[i] = std::tanh(dot(row, std::span<const double>(x)) + image_bias_[i]);
    }
    return normalize(h);
  }

  Embedding encode_text(const TokenSequence& toks) const override { return forward_text(toks).out; }

  TextForward encode_text_with_vjp(const TokenSequence& toks) const override {
    TextState st = forward_text(toks);
    const std::size_t n = toks.size();
    const std::size_t d = info_.dim;
    const std::size_t w = info_.text_context_dim;
    Embedding out = st.out;
    auto vjp = [this, st = std::move(st), n, d, w](std::span<const double> cot) {
      enforce(cot.size() == d, ErrorCode::DimensionMismatch, "cotangent width mismatch");
      const double yg = dot(st.out.values(), cot);
      std::vector<double> ga(d);
      for (std::size_t i = 0; i < d; ++i) {
        const double gh = (cot[i] - st.out[i] * yg) / st.hidden_norm;
        ga[i] = gh * (1.0 - st.hidden[i] * st.hidden[i]);
      }
      std::vector<double> gu(w, 0.0);
      for (std::size_t i = 0; i < d; ++i) {
        const double* row = text_weights_.data() + i * w;
        for (std::size_t j = 0; j < w; ++j) gu[j] += row[j] * ga[i];
      }
      for (double& g : gu) g /= static_cast<double>(n);
      return TokenGrad(n, gu);
    };
    return TextForward{std::move(out), std::move(vjp)};
  }

  std::vector<double> token_embedding(std::string_view word) const override {
    const std::uint64_t bucket = fnv1a64(word) % kVocabBuckets;
    std::seed_seq sseq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32), 0x70cu,
                       static_cast<std::uint32_t>(bucket)};
    std::mt19937_64 rng(sseq);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> row(info_.text_context_dim);
    for (double& v : row) v = dist(rng);
    return row;
  }

  std::uint64_t parameter_checksum() const override {
    std::uint64_t h = fnv1a64_bytes(image_weights_.data(), image_weights_.size() * sizeof(double));
    h = fnv1a64_bytes(text_weights_.data(), text_weights_.size() * sizeof(double), h);
    h = fnv1a64_bytes(image_bias_.data(), image_bias_.size() * sizeof(double), h);
    return fnv1a64_bytes(text_bias_.data(), text_bias_.size() * sizeof(double), h);
  }

 private:
  struct TextState {
    std::vector<double> hidden;  // tanh activations
    double hidden_norm = 0.0;
    Embedding out;
  };

  TextState forward_text(const TokenSequence& toks) const {
    validate(toks, info_.text_context_dim);
    const std::size_t w = info_.text_context_dim;
    std::vector<double> pooled(w, 0.0);
    for (const auto& e : toks.entries)
      for (std::size_t j = 0; j < w; ++j) pooled[j] += e[j];
    for (double& v : pooled) v /= static_cast<double>(toks.size());
    TextState st;
    st.hidden.resize(info_.dim);
    double sq = 0.0;
    for (std::size_t i = 0; i < info_.dim; ++i) {
      const std::span<const double> row(text_weights_.data() + i * w, w);
      st.hidden[i] = std::tanh(dot(row, std::span<const double>(pooled)) + text_bias_[i]);
      sq += st.hidden[i] * st.hidden[i];
    }
    st.hidden_norm = std::sqrt(sq);
    st.out = normalize(st.hidden);
    return st;
  }

  std::uint64_t seed_;
  BackendInfo info_;
  std::vector<double> image_weights_;  // dim x kInputSide^2
  std::vector<double> text_weights_;   // dim x text_context_dim
  std::vector<double> image_bias_;     // dim
  std::vector<double> text_bias_;      // dim
};

inline std::shared_ptr<const EncoderBackend> toy_backend(std::uint64_t seed, std::size_t dim,
                                                         std::size_t text_context_dim = 0) {
  return std::make_shared<const ToyBackend>(seed, dim, text_context_dim);
}

}  // namespace idlike

#endif  // IDLIKE_ENCODER_HPP_
