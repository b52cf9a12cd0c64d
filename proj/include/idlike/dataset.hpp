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

#ifndef IDLIKE_DATASET_HPP_
#define IDLIKE_DATASET_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "idlike/errors.hpp"
#include "idlike/image.hpp"
#include "idlike/miner.hpp"

namespace idlike {

struct ManifestLine {
  std::string path;  // as written in the manifest
  std::optional<std::string> label;
};

struct Dataset {
  std::vector<LabeledImage> samples;     // manifest order
  std::vector<std::string> class_names;  // index -> name
};

/// Parse `path<TAB>label?` lines. Blank lines and lines starting with '#' are skipped.
inline std::vector<ManifestLine> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  enforce(static_cast<bool>(in), ErrorCode::MissingFile, "cannot open manifest " + manifest.string());
  std::vector<ManifestLine> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    ManifestLine ml;
    const auto tab = line.find('\t');
    ml.path = line.substr(0, tab);
    if (tab != std::string::npos && tab + 1 < line.size()) ml.label = line.substr(tab + 1);
    lines.push_back(std::move(ml));
  }
  enforce(!lines.empty(), ErrorCode::EmptyManifest, manifest.string() + " lists no samples");
  return lines;
}

/**
 * Load every image listed in a manifest. Image paths are relative to the
 * manifest's directory; sample ids are the paths as written.
 *
 * With `class_table` empty the class table is built from the manifest's labels
 * (sorted by name). Otherwise labels must already appear in the given table.
 */
inline Dataset ingest_dataset(const std::filesystem::path& manifest, std::span<const std::string> class_table = {}) {
  const auto lines = read_manifest(manifest);
  Dataset ds;
  if (class_table.empty()) {
    std::set<std::string> names;
    for (const auto& l : lines)
      if (l.label) names.insert(*l.label);
    ds.class_names.assign(names.begin(), names.end());
  } else {
    ds.class_names.assign(class_table.begin(), class_table.end());
  }
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < ds.class_names.size(); ++i) index.emplace(ds.class_names[i], i);

  const auto base = manifest.parent_path();
  std::map<std::string, std::shared_ptr<const Image>> loaded;  // duplicates share pixels
  for (const auto& l : lines) {
    LabeledImage s;
    s.sample_id = l.path;
    if (l.label) {
      const auto it = index.find(*l.label);
      enforce(it != index.end(), ErrorCode::UnknownLabel,
              manifest.string() + ": label '" + *l.label + "' is not a known class");
      s.label = it->second;
    }
    auto& img = loaded[l.path];
    if (!img) {
      const std::filesystem::path p = base / l.path;  // an absolute l.path replaces base
      enforce(std::filesystem::exists(p), ErrorCode::MissingFile, manifest.string() + ": no such image " + p.string());
      img = std::make_shared<const Image>(read_pnm(p));
    }
    s.image = ImageRef{img, std::nullopt};
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

/// Random stream for drawing class `class_index`'s few-shot subset.
inline std::mt19937_64 fewshot_stream(std::uint64_t seed, std::size_t class_index) {
  std::seed_seq sseq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                     static_cast<std::uint32_t>(class_index), 0xf3e5u};
  return std::mt19937_64(sseq);
}

/**
 * Draw `shots` distinct samples per class, uniformly without replacement, by
 * a partial Fisher-Yates shuffle of the class's manifest-order members.
 * Output is grouped by class index, in draw order within a class.
 */
inline std::vector<LabeledImage> sample_fewshot(std::span<const LabeledImage> full, std::size_t shots,
                                                std::uint64_t seed, std::span<const std::string> class_names) {
  enforce(shots >= 1, ErrorCode::InvalidConfig, "shots must be >= 1");
  std::vector<std::vector<std::size_t>> members(class_names.size());
  for (std::size_t i = 0; i < full.size(); ++i) {
    enforce(full[i].label.has_value(), ErrorCode::UnknownLabel, "few-shot source sample '" + full[i].sample_id +
                                                                    "' has no label");
    enforce(*full[i].label < class_names.size(), ErrorCode::LabelOutOfRange, "label out of range");
    members[*full[i].label].push_back(i);
  }
  std::vector<LabeledImage> out;
  out.reserve(shots * class_names.size());
  for (std::size_t k = 0; k < class_names.size(); ++k) {
    auto& pool = members[k];
    enforce(pool.size() >= shots, ErrorCode::InsufficientSamples,
            "class '" + class_names[k] + "' has " + std::to_string(pool.size()) + " samples, " +
                std::to_string(shots) + " shots requested");
    auto rng = fewshot_stream(seed, k);
    for (std::size_t i = 0; i < shots; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      out.push_back(full[pool[i]]);
    }
  }
  return out;
}

}  // namespace idlike

#endif  // IDLIKE_DATASET_HPP_
