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

#ifndef IDLIKE_SYNTH_HPP_
#define IDLIKE_SYNTH_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "idlike/embedcore.hpp"
#include "idlike/encoder.hpp"
#include "idlike/errors.hpp"
#include "idlike/image.hpp"

// Procedural blob-field image classes for end-to-end runs without real data.
namespace idlike::synth {

struct Blob {
  double cx = 0.0;
  double cy = 0.0;
  double sigma = 1.0;
  double amplitude = 0.0;  // signed offset from the mid-gray background
};

struct ClassPattern {
  std::string name;
  std::vector<Blob> blobs;
};

struct SynthConfig {
  std::size_t side = 32;
  std::size_t id_classes = 8;
  std::size_t train_per_class = 8;
  std::size_t test_per_class = 12;
  std::size_t ood_per_set = 48;
  std::size_t blobs_per_class = 3;
  double jitter = 1.5;  // pixels
  double noise = 0.04;  // per-pixel std
  std::uint64_t seed = 7;

  // Toy encoder the class names are aligned to; also written into the run config.
  bool align_to_encoder = true;
  std::uint64_t encoder_seed = 1;
  std::size_t encoder_dim = 32;
  std::size_t search_candidates = 512;  // layouts tried per class
};

namespace detail {

inline std::mt19937_64 stream(std::uint64_t seed, std::uint32_t a, std::uint32_t b) {
  std::seed_seq sseq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), a, b};
  return std::mt19937_64(sseq);
}

inline Blob random_blob(std::mt19937_64& rng, double side) {
  std::uniform_real_distribution<double> pos(0.2 * side, 0.8 * side);
  std::uniform_real_distribution<double> size(0.08 * side, 0.16 * side);
  std::uniform_real_distribution<double> amp(0.25, 0.45);
  std::bernoulli_distribution sign(0.5);
  Blob b{pos(rng), pos(rng), size(rng), amp(rng)};
  if (sign(rng)) b.amplitude = -b.amplitude;
  return b;
}

inline ClassPattern random_pattern(std::string name, std::size_t blobs, std::mt19937_64& rng, double side) {
  ClassPattern p{std::move(name), {}};
  for (std::size_t b = 0; b < blobs; ++b) p.blobs.push_back(random_blob(rng, side));
  return p;
}

// Unclamped blob field over a 0.5 background.
inline Image render_blobs(const std::vector<Blob>& blobs, std::size_t side) {
  Image img(side, side, 1);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      double v = 0.5;
      for (const auto& b : blobs) {
        const double dx = static_cast<double>(x) + 0.5 - b.cx;
        const double dy = static_cast<double>(y) + 0.5 - b.cy;
        v += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
      }
      img.at(y, x) = v;
    }
  }
  return img;
}

}  // namespace detail

inline Image render_clean(const ClassPattern& pattern, std::size_t side) {
  Image img = detail::render_blobs(pattern.blobs, side);
  for (double& v : img.pixels) v = std::clamp(v, 0.0, 1.0);
  return img;
}

/// One grayscale instance: jittered, gain-perturbed blobs plus pixel noise.
inline Image render(const ClassPattern& pattern, const SynthConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> jitter(0.0, cfg.jitter);
  std::normal_distribution<double> noise(0.0, cfg.noise);
  std::uniform_real_distribution<double> gain(0.85, 1.15);
  std::vector<Blob> blobs = pattern.blobs;
  for (auto& b : blobs) {
    b.cx += jitter(rng);
    b.cy += jitter(rng);
    b.amplitude *= gain(rng);
  }
  Image img = detail::render_blobs(blobs, cfg.side);
  for (double& v : img.pixels) v = std::clamp(v + noise(rng), 0.0, 1.0);
  return img;
}

/**
 * ID class patterns named "pattern<k>". Without an aligner each class is an
 * independent random layout. With one, each class keeps the candidate layout
 * whose clean rendering embeds closest to the zero-shot embedding of its
 * name, which gives class names visual meaning for that encoder.
 */
inline std::vector<ClassPattern> id_patterns(const SynthConfig& cfg, const EncoderBackend* aligner = nullptr) {
  const std::vector<std::string> templates{std::string(kDefaultTemplate)};
  const double side = static_cast<double>(cfg.side);
  std::vector<ClassPattern> out;
  for (std::size_t k = 0; k < cfg.id_classes; ++k) {
    auto rng = detail::stream(cfg.seed, 1, static_cast<std::uint32_t>(k));
    const std::string name = "pattern" + std::to_string(k);
    ClassPattern best = detail::random_pattern(name, cfg.blobs_per_class, rng, side);
    if (aligner) {
      const Embedding text = zero_shot_embedding(*aligner, name, templates);
      auto fit = [&](const ClassPattern& p) {
        return cosine_similarity(aligner->encode_image(make_image_ref(render_clean(p, cfg.side))), text);
      };
      double best_fit = fit(best);
      for (std::size_t i = 1; i < cfg.search_candidates; ++i) {
        ClassPattern p = detail::random_pattern(name, cfg.blobs_per_class, rng, side);
        if (const double f = fit(p); f > best_fit) {
          best_fit = f;
          best = std::move(p);
        }
      }
    }
    out.push_back(std::move(best));
  }
  return out;
}

/// Held-out lookalikes: an ID class layout with one blob replaced by a fresh one.
inline std::vector<ClassPattern> lookalike_patterns(const SynthConfig& cfg, std::span<const ClassPattern> ids,
                                                    std::size_t count) {
  std::vector<ClassPattern> out;
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = detail::stream(cfg.seed, 2, static_cast<std::uint32_t>(i));
    ClassPattern p = ids[i % ids.size()];
    p.name = "lookalike" + std::to_string(i);
    std::uniform_int_distribution<std::size_t> which(0, p.blobs.size() - 1);
    p.blobs[which(rng)] = detail::random_blob(rng, static_cast<double>(cfg.side));
    out.push_back(std::move(p));
  }
  return out;
}

/// Held-out layouts drawn independently of the ID classes.
inline std::vector<ClassPattern> novel_patterns(const SynthConfig& cfg, std::size_t count) {
  std::vector<ClassPattern> out;
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = detail::stream(cfg.seed, 3, static_cast<std::uint32_t>(i));
    out.push_back(detail::random_pattern("novel" + std::to_string(i), cfg.blobs_per_class, rng,
                                         static_cast<double>(cfg.side)));
  }
  return out;
}

struct SynthLayout {
  std::filesystem::path train_manifest;
  std::filesystem::path test_manifest;
  std::vector<std::pair<std::string, std::filesystem::path>> ood_manifests;
  std::filesystem::path config;
};

/**
 * Write a complete toy task under `root`: PGM images, a labeled training
 * manifest, a labeled ID test manifest, two unlabeled OOD manifests
 * ("lookalike" and "novel", half as many classes as ID each) and a run
 * config "toy.cfg" that references them.
 */
inline SynthLayout write_synthetic_task(const std::filesystem::path& root, const SynthConfig& cfg) {
  namespace fs = std::filesystem;
  enforce(cfg.id_classes >= 2, ErrorCode::InvalidConfig, "synthetic task needs at least 2 classes");
  enforce(cfg.blobs_per_class >= 1 && cfg.side >= 8, ErrorCode::InvalidConfig, "synthetic task geometry too small");
  fs::create_directories(root / "images");
  SynthLayout layout{root / "train.tsv", root / "test.tsv", {}, root / "toy.cfg"};

  auto write_split = [&](const fs::path& manifest, const std::vector<ClassPattern>& patterns, std::size_t per_class,
                         std::uint32_t split_tag, bool labeled) {
    std::ofstream out(manifest);
    enforce(static_cast<bool>(out), ErrorCode::MissingFile, "cannot write " + manifest.string());
    for (std::size_t i = 0; i < per_class * patterns.size(); ++i) {
      const ClassPattern& p = patterns[i % patterns.size()];
      auto rng = detail::stream(cfg.seed, split_tag, static_cast<std::uint32_t>(i));
      const std::string rel = "images/" + manifest.stem().string() + "_" + std::to_string(i) + ".pgm";
      write_pnm(root / rel, render(p, cfg, rng));
      out << rel;
      if (labeled) out << '\t' << p.name;
      out << '\n';
    }
  };

  std::shared_ptr<const EncoderBackend> aligner;
  if (cfg.align_to_encoder) aligner = toy_backend(cfg.encoder_seed, cfg.encoder_dim);
  const auto ids = id_patterns(cfg, aligner.get());
  write_split(layout.train_manifest, ids, cfg.train_per_class, 10, true);
  write_split(layout.test_manifest, ids, cfg.test_per_class, 11, true);
  const std::size_t held_out = std::max<std::size_t>(1, cfg.id_classes / 2);
  const std::size_t per_held_out = std::max<std::size_t>(1, cfg.ood_per_set / held_out);
  layout.ood_manifests = {{"lookalike", root / "ood_lookalike.tsv"}, {"novel", root / "ood_novel.tsv"}};
  write_split(layout.ood_manifests[0].second, lookalike_patterns(cfg, ids, held_out), per_held_out, 12, false);
  write_split(layout.ood_manifests[1].second, novel_patterns(cfg, held_out), per_held_out, 13, false);

  std::ofstream cfg_out(layout.config);
  enforce(static_cast<bool>(cfg_out), ErrorCode::MissingFile, "cannot write " + layout.config.string());
  cfg_out << "# toy few-shot OOD task\n"
          << "data.id_train = train.tsv\n"
          << "data.id_test = test.tsv\n"
          << "data.ood.lookalike = ood_lookalike.tsv\n"
          << "data.ood.novel = ood_novel.tsv\n"
          << "encoder.kind = toy\n"
          << "encoder.seed = " << cfg.encoder_seed << '\n'
          << "encoder.dim = " << cfg.encoder_dim << '\n'
          << "miner.M = 64\n"
          << "miner.Q = 8\n"
          << "prompts.C = 16\n"
          << "prompts.L = 8\n"
          << "train.epochs = 3\n"
          << "run.shots = 4\n"
          << "run.output_dir = out\n";
  return layout;
}

}  // namespace idlike::synth

#endif  // IDLIKE_SYNTH_HPP_
