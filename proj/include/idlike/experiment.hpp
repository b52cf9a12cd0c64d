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

#ifndef IDLIKE_EXPERIMENT_HPP_
#define IDLIKE_EXPERIMENT_HPP_

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "idlike/adapter.hpp"
#include "idlike/cache.hpp"
#include "idlike/checkpoint.hpp"
#include "idlike/config.hpp"
#include "idlike/dataset.hpp"
#include "idlike/detect.hpp"
#include "idlike/encoder.hpp"
#include "idlike/errors.hpp"
#include "idlike/miner.hpp"
#include "idlike/promptlearn.hpp"
#include "idlike/report.hpp"

namespace idlike {

/*
 * Files written under RunConfig::output_dir:
 *
 *   classes.txt          class table, one name per line (index = line number)
 *   mined.jsonl          one record per mined crop (d_in first, then d_out)
 *   mined.emb[.idx]      crop embeddings in the embedding cache format
 *   prompts.ckpt         learned prompts
 *   train_log.jsonl      per-step loss values
 *   scores.jsonl         score dump for the ID test set and every OOD set
 *   report.jsonl/.txt    metrics per method and OOD set
 *   FAILED               present only after a failed stage, holding the error
 *
 * Test-image embeddings are cached under $IDLIKE_CACHE_DIR (default
 * <output_dir>/cache), keyed by a digest of the backend and the pixels.
 */
namespace files {
inline constexpr const char* kClasses = "classes.txt";
inline constexpr const char* kMined = "mined.jsonl";
inline constexpr const char* kMinedEmbeddings = "mined.emb";
inline constexpr const char* kCheckpoint = "prompts.ckpt";
inline constexpr const char* kTrainLog = "train_log.jsonl";
inline constexpr const char* kScores = "scores.jsonl";
inline constexpr const char* kReport = "report.jsonl";
inline constexpr const char* kFailed = "FAILED";
}  // namespace files

inline std::shared_ptr<const EncoderBackend> make_backend(const RunConfig& cfg) {
  if (cfg.encoder.kind == "adapter") return std::make_shared<const AdapterBackend>(cfg.encoder.endpoint);
  return toy_backend(cfg.encoder.seed, cfg.encoder.dim, cfg.encoder.context_dim);
}

// ---------------------------------------------------------------------------
// Artifact I/O
// ---------------------------------------------------------------------------

inline void write_class_table(const std::filesystem::path& path, const std::vector<std::string>& names) {
  std::ofstream out(path, std::ios::binary);
  enforce(static_cast<bool>(out), ErrorCode::MissingFile, "cannot write " + path.string());
  for (const auto& n : names) out << n << '\n';
}

inline std::vector<std::string> read_class_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  enforce(static_cast<bool>(in), ErrorCode::MissingFile, "cannot open class table " + path.string());
  std::vector<std::string> names;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) names.push_back(line);
  enforce(!names.empty(), ErrorCode::FormatError, path.string() + " is empty");
  return names;
}

/// Mined-set manifest plus embeddings. `sample_ids` names each source image.
inline void write_mined(const std::filesystem::path& dir, const MinedDatasets& mined,
                        const std::vector<std::string>& sample_ids) {
  EmbeddingCache cache;
  std::ofstream out(dir / files::kMined, std::ios::binary);
  enforce(static_cast<bool>(out), ErrorCode::MissingFile, "cannot write " + (dir / files::kMined).string());
  auto emit = [&](const MinedEntry& e, const char* set) {
    const std::size_t row = cache.append(e.embedding.values());
    cache.index.push_back(CacheIndexEntry{sample_ids.at(e.source_index) + "#" + std::to_string(e.crop_index), row,
                                          e.label});
    ojson j;
    j["set"] = set;
    j["source_index"] = e.source_index;
    if (e.label) j["label"] = *e.label;
    j["crop_box"] = {e.crop_box.x, e.crop_box.y, e.crop_box.w, e.crop_box.h};
    j["sim"] = e.sim;
    j["embedding_offset"] = row;
    j["crop_index"] = e.crop_index;
    out << j.dump() << '\n';
  };
  for (const auto& e : mined.d_in) emit(e, "in");
  for (const auto& e : mined.d_out) emit(e, "out");
  write_cache(dir / files::kMinedEmbeddings, cache);
}

inline MinedDatasets read_mined(const std::filesystem::path& dir) {
  const EmbeddingCache cache = read_cache(dir / files::kMinedEmbeddings);
  std::ifstream in(dir / files::kMined);
  enforce(static_cast<bool>(in), ErrorCode::MissingFile, "cannot open " + (dir / files::kMined).string());
  MinedDatasets mined;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    try {
      const auto j = ojson::parse(line);
      const auto box = j.at("crop_box").get<std::vector<std::size_t>>();
      enforce(box.size() == 4, ErrorCode::FormatError, "crop_box must have 4 entries");
      MinedEntry e{cache.embedding(j.at("embedding_offset").get<std::size_t>()),
                   CropBox{box[0], box[1], box[2], box[3]},
                   j.at("source_index").get<std::size_t>(),
                   j.at("crop_index").get<std::size_t>(),
                   std::nullopt,
                   j.at("sim").get<double>()};
      if (j.contains("label")) e.label = j.at("label").get<std::size_t>();
      const auto set = j.at("set").get<std::string>();
      enforce(set == "in" || set == "out", ErrorCode::FormatError, "unknown mined set '" + set + "'");
      (set == "in" ? mined.d_in : mined.d_out).push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::FormatError, std::string("malformed mined record: ") + ex.what());
    }
  }
  return mined;
}

inline void write_train_log(const std::filesystem::path& path, const std::vector<StepRecord>& history) {
  std::ofstream out(path, std::ios::binary);
  enforce(static_cast<bool>(out), ErrorCode::MissingFile, "cannot write " + path.string());
  for (const auto& s : history) {
    ojson j;
    j["epoch"] = s.epoch;
    j["step"] = s.step;
    j["n_in"] = s.n_in;
    j["n_out"] = s.n_out;
    j["l_in"] = s.loss.l_in;
    j["l_out"] = s.loss.l_out;
    j["l_div"] = s.loss.l_div;
    j["total"] = s.loss.total;
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Embedding cache for test images
// ---------------------------------------------------------------------------

inline std::uint64_t dataset_digest(const Dataset& ds, const EncoderBackend& backend) {
  std::uint64_t h = fnv1a64(backend.info().name);
  const std::uint64_t meta[] = {backend.parameter_checksum(), backend.dim(), ds.samples.size()};
  h = fnv1a64_bytes(meta, sizeof(meta), h);
  for (const auto& s : ds.samples) {
    h = fnv1a64(s.sample_id, h);
    const Image& img = *s.image.image;
    const std::uint64_t shape[] = {img.height, img.width, img.channels};
    h = fnv1a64_bytes(shape, sizeof(shape), h);
    h = fnv1a64_bytes(img.pixels.data(), img.pixels.size() * sizeof(double), h);
  }
  return h;
}

/**
 * Embeddings of every sample's full image, served from (or written to) the
 * cache. Results always pass through the float32 cache representation, so a
 * cache hit and a fresh computation return identical values.
 */
inline std::vector<Embedding> encode_dataset(const Dataset& ds, const EncoderBackend& backend,
                                             const std::filesystem::path& cache_root) {
  char name[40];
  std::snprintf(name, sizeof(name), "img_%016llx.emb",
                static_cast<unsigned long long>(dataset_digest(ds, backend)));
  const auto path = cache_root / name;
  EmbeddingCache cache;
  bool hit = false;
  if (std::filesystem::exists(path)) {
    try {
      cache = read_cache(path);
      hit = cache.count() == ds.samples.size() && cache.dim == backend.dim() && cache.index.size() == ds.samples.size();
      for (std::size_t i = 0; hit && i < ds.samples.size(); ++i)
        hit = cache.index[i].sample_id == ds.samples[i].sample_id && cache.index[i].row == i;
    } catch (const Error&) {
      hit = false;
    }
  }
  if (!hit) {
    cache = EmbeddingCache{};
    for (const auto& s : ds.samples) {
      const std::size_t row = cache.append(backend.encode_image(s.image).values());
      cache.index.push_back(CacheIndexEntry{s.sample_id, row, s.label});
    }
    std::filesystem::create_directories(cache_root);
    write_cache(path, cache);
  }
  std::vector<Embedding> out;
  out.reserve(cache.count());
  for (std::size_t i = 0; i < cache.count(); ++i) out.push_back(cache.embedding(i));
  return out;
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// Run `body`; on failure leave a FAILED marker naming the stage and rethrow.
template <class F>
auto with_failure_marker(const RunConfig& cfg, const char* stage, F&& body) -> decltype(body()) {
  std::filesystem::create_directories(cfg.output_dir);
  std::filesystem::remove(cfg.output_dir / files::kFailed);
  try {
    return body();
  } catch (const std::exception& e) {
    std::ofstream marker(cfg.output_dir / files::kFailed, std::ios::binary);
    marker << stage << '\n' << e.what() << '\n';
    throw;
  }
}

inline MinedDatasets stage_mine(const RunConfig& cfg, const EncoderBackend& backend) {
  validate(cfg);
  validate_paths(cfg, true, false);
  return with_failure_marker(cfg, "mine", [&] {
    const Dataset full = ingest_dataset(cfg.id_train);
    const auto fewshot = sample_fewshot(full.samples, cfg.shots, cfg.sample_seed, full.class_names);
    const MinedDatasets mined =
        build_mined_datasets(fewshot, backend, cfg.miner, full.class_names, cfg.encoder.templates);
    std::vector<std::string> ids;
    for (const auto& s : fewshot) ids.push_back(s.sample_id);
    write_class_table(cfg.output_dir / files::kClasses, full.class_names);
    write_mined(cfg.output_dir, mined, ids);
    return mined;
  });
}

inline TrainResult stage_train(const RunConfig& cfg, const EncoderBackend& backend) {
  validate(cfg);
  return with_failure_marker(cfg, "train", [&] {
    const auto classes = read_class_table(cfg.output_dir / files::kClasses);
    const MinedDatasets mined = read_mined(cfg.output_dir);
    PromptSet init = init_prompts(classes, cfg.num_ood_prompts, cfg.prompt_length, cfg.prompt_seed, backend,
                                  cfg.init_std);
    TrainResult result;
    try {
      result = train(mined, std::move(init), backend, cfg.train, cfg.loss);
    } catch (const DivergenceError& e) {
      write_train_log(cfg.output_dir / files::kTrainLog, e.history());
      throw;
    }
    write_train_log(cfg.output_dir / files::kTrainLog, result.history);
    write_checkpoint(cfg.output_dir / files::kCheckpoint, result.prompts, result.history.size(),
                     config_snapshot(cfg));
    return result;
  });
}

inline std::vector<ScoreRecord> stage_score(const RunConfig& cfg, const EncoderBackend& backend) {
  validate(cfg);
  validate_paths(cfg, false, true);
  return with_failure_marker(cfg, "score", [&] {
    const Checkpoint ck = read_checkpoint(cfg.output_dir / files::kCheckpoint, backend);
    const auto classes = ck.prompts.class_names();
    const PromptFeatures feats = prompt_features(ck.prompts, backend);
    std::vector<Embedding> zero_shot;
    for (const auto& name : classes) zero_shot.push_back(zero_shot_embedding(backend, name, cfg.encoder.templates));
    const auto cache_root = cache_dir(cfg.output_dir / "cache");

    std::vector<ScoreRecord> records;
    auto score_split = [&](const std::filesystem::path& manifest, const std::string& split) {
      const Dataset ds = ingest_dataset(manifest, classes);
      const auto embs = encode_dataset(ds, backend, cache_root);
      for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        std::vector<double> zs;
        for (const auto& z : zero_shot) zs.push_back(cosine_similarity(z, embs[i]));
        records.push_back(make_score_record(ds.samples[i].sample_id, split, ds.samples[i].label,
                                            similarity_row(feats, embs[i]), cfg.loss.tau, zs));
      }
    };
    score_split(cfg.id_test, std::string(kIdSplit));
    for (const auto& [name, path] : cfg.ood_tests) score_split(path, name);
    write_score_dump(cfg.output_dir / files::kScores, records);
    return records;
  });
}

/// Metrics from a score dump; writes the report next to `out_dir` when given.
inline std::vector<ReportRow> stage_eval(const std::filesystem::path& dump,
                                         const std::filesystem::path& out_dir = {}) {
  const auto rows = build_report(read_score_dump(dump));
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_report(out_dir, rows);
  }
  return rows;
}

/// mine -> train -> score -> eval, every stage reading the previous stage's files.
inline std::vector<ReportRow> run_experiment(const RunConfig& cfg, const EncoderBackend& backend) {
  validate(cfg);
  validate_paths(cfg, true, true);
  stage_mine(cfg, backend);
  stage_train(cfg, backend);
  stage_score(cfg, backend);
  return with_failure_marker(cfg, "eval",
                             [&] { return stage_eval(cfg.output_dir / files::kScores, cfg.output_dir); });
}

inline std::vector<ReportRow> run_experiment(const RunConfig& cfg) { return run_experiment(cfg, *make_backend(cfg)); }

}  // namespace idlike

#endif  // IDLIKE_EXPERIMENT_HPP_
