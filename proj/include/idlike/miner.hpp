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

#ifndef IDLIKE_MINER_HPP_
#define IDLIKE_MINER_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "idlike/embedcore.hpp"
#include "idlike/encoder.hpp"
#include "idlike/errors.hpp"
#include "idlike/image.hpp"

namespace idlike {

struct MinerConfig {
  std::size_t crops_per_image = 256;  // M
  std::size_t keep_per_side = 32;     // Q
  double scale_lo = 0.1;
  double scale_hi = 1.0;
  double aspect_lo = 3.0 / 4.0;
  double aspect_hi = 4.0 / 3.0;
  std::uint64_t seed = 0;
  std::size_t max_attempts = 100;
};

inline void validate(const MinerConfig& cfg) {
  enforce(cfg.crops_per_image > 0 && cfg.keep_per_side > 0, ErrorCode::InvalidConfig, "M and Q must be positive");
  enforce(2 * cfg.keep_per_side <= cfg.crops_per_image, ErrorCode::InvalidConfig, "miner requires 2Q <= M");
  enforce(cfg.scale_lo > 0.0 && cfg.scale_lo <= cfg.scale_hi && cfg.scale_hi <= 1.0, ErrorCode::InvalidConfig,
          "scale range must satisfy 0 < lo <= hi <= 1");
  enforce(cfg.aspect_lo > 0.0 && cfg.aspect_lo <= cfg.aspect_hi, ErrorCode::InvalidConfig,
          "aspect range must satisfy 0 < lo <= hi");
}

/// Few-shot (or test) sample: image, optional class index, stable identifier.
struct LabeledImage {
  ImageRef image;
  std::optional<std::size_t> label;
  std::string sample_id;
};

struct MinedEntry {
  Embedding embedding;
  CropBox crop_box;
  std::size_t source_index = 0;
  std::size_t crop_index = 0;
  std::optional<std::size_t> label;  // absent for d_out
  double sim = 0.0;

  friend bool operator==(const MinedEntry&, const MinedEntry&) = default;
};

struct MinedDatasets {
  std::vector<MinedEntry> d_in;
  std::vector<MinedEntry> d_out;

  friend bool operator==(const MinedDatasets&, const MinedDatasets&) = default;
};

/// RNG stream for one source image; depends only on (seed, index) so results
/// do not depend on processing order.
inline std::mt19937_64 crop_stream(std::uint64_t seed, std::size_t image_index) {
  const auto idx = static_cast<std::uint64_t>(image_index);
  std::seed_seq sseq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                     static_cast<std::uint32_t>(idx), static_cast<std::uint32_t>(idx >> 32), 0xc209u};
  return std::mt19937_64(sseq);
}

namespace detail {

// Largest box of the clamped aspect ratio, centered.
inline CropBox center_crop(std::size_t width, std::size_t height, double aspect_lo, double aspect_hi) {
  const double in_ratio = static_cast<double>(width) / static_cast<double>(height);
  std::size_t w = width, h = height;
  if (in_ratio < aspect_lo) {
    h = static_cast<std::size_t>(std::lround(static_cast<double>(w) / aspect_lo));
  } else if (in_ratio > aspect_hi) {
    w = static_cast<std::size_t>(std::lround(static_cast<double>(h) * aspect_hi));
  }
  w = std::clamp<std::size_t>(w, 1, width);
  h = std::clamp<std::size_t>(h, 1, height);
  return CropBox{(width - w) / 2, (height - h) / 2, w, h};
}

}  // namespace detail

/**
 * Sample cfg.crops_per_image random-resized-crop boxes. Area fraction is
 * uniform in [scale_lo, scale_hi], aspect ratio log-uniform in
 * [aspect_lo, aspect_hi]. A crop that finds no in-bounds box within
 * max_attempts falls back to the center crop. The returned refs share the
 * source pixels; resampling to the encoder input happens at encode time.
 */
inline std::vector<ImageRef> generate_crops(const ImageRef& img, const MinerConfig& cfg, std::size_t image_index) {
  validate(cfg);
  validate(img);
  const CropBox region = img.region();
  const std::size_t width = region.w;
  const std::size_t height = region.h;
  const double area = static_cast<double>(width) * static_cast<double>(height);

  std::mt19937_64 rng = crop_stream(cfg.seed, image_index);
  std::uniform_real_distribution<double> scale_dist(cfg.scale_lo, cfg.scale_hi);
  std::uniform_real_distribution<double> log_ratio_dist(std::log(cfg.aspect_lo), std::log(cfg.aspect_hi));

  std::vector<ImageRef> crops;
  crops.reserve(cfg.crops_per_image);
  for (std::size_t m = 0; m < cfg.crops_per_image; ++m) {
    std::optional<CropBox> box;
    for (std::size_t attempt = 0; attempt < cfg.max_attempts && !box; ++attempt) {
      const double target = area * scale_dist(rng);
      const double ratio = std::exp(log_ratio_dist(rng));
      const auto w = static_cast<std::size_t>(std::lround(std::sqrt(target * ratio)));
      const auto h = static_cast<std::size_t>(std::lround(std::sqrt(target / ratio)));
      if (w == 0 || h == 0 || w > width || h > height) continue;
      std::uniform_int_distribution<std::size_t> xd(0, width - w);
      std::uniform_int_distribution<std::size_t> yd(0, height - h);
      const std::size_t x = xd(rng);
      const std::size_t y = yd(rng);
      box = CropBox{x, y, w, h};
    }
    if (!box) box = detail::center_crop(width, height, cfg.aspect_lo, cfg.aspect_hi);
    enforce(box->w > 0 && box->h > 0, ErrorCode::DegenerateImage, "no valid crop box for image " +
                                                                      std::to_string(image_index));
    // Boxes are relative to the referenced region; shift into source pixels.
    box->x += region.x;
    box->y += region.y;
    crops.push_back(ImageRef{img.image, *box});
  }
  return crops;
}

struct CropSplit {
  std::vector<std::size_t> top;     // Q highest similarities, best first
  std::vector<std::size_t> bottom;  // Q lowest similarities, worst first
};

/**
 * Select the Q most and Q least similar crops. Ties prefer the lower crop
 * index. Bottom is drawn from the crops not already in top, so the two sets
 * are disjoint even when every similarity is equal.
 */
inline CropSplit filter_by_similarity(std::span<const double> sims, std::size_t q) {
  enforce(q > 0 && sims.size() >= 2 * q, ErrorCode::InsufficientCrops,
          "need at least 2Q = " + std::to_string(2 * q) + " crops, got " + std::to_string(sims.size()));
  std::vector<std::size_t> order(sims.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });
  CropSplit split;
  split.top.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(q));
  std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(q), order.end());
  std::sort(rest.begin(), rest.end());
  std::stable_sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t b) { return sims[a] < sims[b]; });
  split.bottom.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(q));
  return split;
}

inline CropSplit filter_crops(std::span<const Embedding> crop_embs, const Embedding& class_prompt_emb,
                              std::size_t q) {
  std::vector<double> sims;
  sims.reserve(crop_embs.size());
  for (const auto& e : crop_embs) sims.push_back(cosine_similarity(e, class_prompt_emb));
  return filter_by_similarity(sims, q);
}

/**
 * Mine ID crops (top-Q) and ID-like outliers (bottom-Q) from each few-shot
 * sample, ranking crops against the zero-shot embedding of the sample's own
 * class. Output order follows the few-shot order; a failing sample aborts.
 */
inline MinedDatasets build_mined_datasets(std::span<const LabeledImage> fewshot, const EncoderBackend& backend,
                                          const MinerConfig& cfg, std::span<const std::string> class_names,
                                          std::span<const std::string> templates) {
  validate(cfg);
  enforce(!fewshot.empty(), ErrorCode::EmptyInput, "few-shot set is empty");
  MinedDatasets out;
  out.d_in.reserve(fewshot.size() * cfg.keep_per_side);
  out.d_out.reserve(fewshot.size() * cfg.keep_per_side);
  std::map<std::size_t, Embedding> class_embs;

  for (std::size_t i = 0; i < fewshot.size(); ++i) {
    const LabeledImage& sample = fewshot[i];
    try {
      enforce(sample.label.has_value(), ErrorCode::LabelOutOfRange, "few-shot sample has no label");
      const std::size_t label = *sample.label;
      enforce(label < class_names.size(), ErrorCode::LabelOutOfRange,
              "label " + std::to_string(label) + " >= K = " + std::to_string(class_names.size()));
      auto it = class_embs.find(label);
      if (it == class_embs.end())
        it = class_embs.emplace(label, zero_shot_embedding(backend, class_names[label], templates)).first;

      const std::vector<ImageRef> crops = generate_crops(sample.image, cfg, i);
      std::vector<Embedding> embs;
      embs.reserve(crops.size());
      std::vector<double> sims;
      sims.reserve(crops.size());
      for (const auto& c : crops) {
        embs.push_back(backend.encode_image(c));
        sims.push_back(cosine_similarity(embs.back(), it->second));
      }
      const CropSplit split = filter_by_similarity(sims, cfg.keep_per_side);
      for (std::size_t m : split.top) out.d_in.push_back(MinedEntry{embs[m], *crops[m].crop, i, m, label, sims[m]});
      for (std::size_t m : split.bottom)
        out.d_out.push_back(MinedEntry{embs[m], *crops[m].crop, i, m, std::nullopt, sims[m]});
    } catch (const Error& e) {
      throw Error(e.code(), "mining sample " + std::to_string(i) + " ('" + sample.sample_id + "'): " + e.message());
    }
  }
  return out;
}

}  // namespace idlike

#endif  // IDLIKE_MINER_HPP_
