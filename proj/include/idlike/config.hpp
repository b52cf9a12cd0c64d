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

#ifndef IDLIKE_CONFIG_HPP_
#define IDLIKE_CONFIG_HPP_

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "idlike/encoder.hpp"
#include "idlike/errors.hpp"
#include "idlike/miner.hpp"
#include "idlike/promptlearn.hpp"

namespace idlike {

struct EncoderConfig {
  std::string kind = "toy";  // toy | adapter
  std::uint64_t seed = 0;
  std::size_t dim = kDefaultEmbeddingDim;
  std::size_t context_dim = 0;  // 0: same as dim
  std::string endpoint;
  std::vector<std::string> templates{std::string(kDefaultTemplate)};
};

struct RunConfig {
  std::filesystem::path id_train;
  std::filesystem::path id_test;
  std::vector<std::pair<std::string, std::filesystem::path>> ood_tests;  // sorted by name
  EncoderConfig encoder;
  MinerConfig miner;
  TrainConfig train;
  LossWeights loss;
  std::size_t num_ood_prompts = kDefaultOodPrompts;
  std::size_t prompt_length = kDefaultPromptLength;
  double init_std = kDefaultInitStd;
  std::uint64_t prompt_seed = 0;
  std::size_t shots = 1;
  std::uint64_t sample_seed = 0;
  std::filesystem::path output_dir = "idlike_out";
};

/// Shortest decimal string that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  enforce(res.ec == std::errc{} && res.ptr == text.data() + text.size(), ErrorCode::InvalidConfig,
          "bad value for " + std::string(key) + ": '" + std::string(text) + "'");
  return v;
}

struct ConfigKey {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
ConfigKey number_key(T RunConfig::*outer) {
  return ConfigKey{[outer](RunConfig& c, std::string_view v) { c.*outer = parse_number<T>("", v); },
                   [outer](const RunConfig& c) {
                     if constexpr (std::is_floating_point_v<T>) return format_double(c.*outer);
                     else return std::to_string(c.*outer);
                   }};
}

template <class S, class T>
ConfigKey nested_key(S RunConfig::*outer, T S::*inner) {
  return ConfigKey{[outer, inner](RunConfig& c, std::string_view v) {
                     if constexpr (std::is_same_v<T, std::string>) (c.*outer).*inner = std::string(v);
                     else (c.*outer).*inner = parse_number<T>("", v);
                   },
                   [outer, inner](const RunConfig& c) {
                     if constexpr (std::is_same_v<T, std::string>) return (c.*outer).*inner;
                     else if constexpr (std::is_floating_point_v<T>) return format_double((c.*outer).*inner);
                     else return std::to_string((c.*outer).*inner);
                   }};
}

inline ConfigKey path_key(std::filesystem::path RunConfig::*member) {
  return ConfigKey{[member](RunConfig& c, std::string_view v) { c.*member = std::filesystem::path(std::string(v)); },
                   [member](const RunConfig& c) { return (c.*member).string(); }};
}

inline const std::map<std::string, ConfigKey, std::less<>>& config_keys() {
  static const std::map<std::string, ConfigKey, std::less<>> keys = [] {
    std::map<std::string, ConfigKey, std::less<>> k;
    k["data.id_train"] = path_key(&RunConfig::id_train);
    k["data.id_test"] = path_key(&RunConfig::id_test);
    k["encoder.kind"] = nested_key(&RunConfig::encoder, &EncoderConfig::kind);
    k["encoder.seed"] = nested_key(&RunConfig::encoder, &EncoderConfig::seed);
    k["encoder.dim"] = nested_key(&RunConfig::encoder, &EncoderConfig::dim);
    k["encoder.context_dim"] = nested_key(&RunConfig::encoder, &EncoderConfig::context_dim);
    k["encoder.endpoint"] = nested_key(&RunConfig::encoder, &EncoderConfig::endpoint);
    k["encoder.templates"] = ConfigKey{[](RunConfig& c, std::string_view v) {
                                         c.encoder.templates.clear();
                                         std::string item;
                                         std::istringstream in{std::string(v)};
                                         while (std::getline(in, item, '|'))
                                           if (!trim(item).empty()) c.encoder.templates.emplace_back(trim(item));
                                       },
                                       [](const RunConfig& c) {
                                         std::string out;
                                         for (std::size_t i = 0; i < c.encoder.templates.size(); ++i)
                                           out += (i ? " | " : "") + c.encoder.templates[i];
                                         return out;
                                       }};
    k["miner.M"] = nested_key(&RunConfig::miner, &MinerConfig::crops_per_image);
    k["miner.Q"] = nested_key(&RunConfig::miner, &MinerConfig::keep_per_side);
    k["miner.scale_lo"] = nested_key(&RunConfig::miner, &MinerConfig::scale_lo);
    k["miner.scale_hi"] = nested_key(&RunConfig::miner, &MinerConfig::scale_hi);
    k["miner.aspect_lo"] = nested_key(&RunConfig::miner, &MinerConfig::aspect_lo);
    k["miner.aspect_hi"] = nested_key(&RunConfig::miner, &MinerConfig::aspect_hi);
    k["miner.seed"] = nested_key(&RunConfig::miner, &MinerConfig::seed);
    k["prompts.C"] = number_key(&RunConfig::num_ood_prompts);
    k["prompts.L"] = number_key(&RunConfig::prompt_length);
    k["prompts.init_std"] = number_key(&RunConfig::init_std);
    k["prompts.seed"] = number_key(&RunConfig::prompt_seed);
    k["loss.lambda_out"] = nested_key(&RunConfig::loss, &LossWeights::lambda_out);
    k["loss.lambda_div"] = nested_key(&RunConfig::loss, &LossWeights::lambda_div);
    k["loss.tau"] = nested_key(&RunConfig::loss, &LossWeights::tau);
    k["train.lr"] = nested_key(&RunConfig::train, &TrainConfig::learning_rate);
    k["train.epochs"] = nested_key(&RunConfig::train, &TrainConfig::epochs);
    k["train.batch_size"] = nested_key(&RunConfig::train, &TrainConfig::batch_size);
    k["train.weight_decay"] = nested_key(&RunConfig::train, &TrainConfig::weight_decay);
    k["train.seed"] = nested_key(&RunConfig::train, &TrainConfig::seed);
    k["train.out_loss_form"] =
        ConfigKey{[](RunConfig& c, std::string_view v) { c.train.out_loss_form = parse_out_loss_form(v); },
                  [](const RunConfig& c) { return to_string(c.train.out_loss_form); }};
    k["run.shots"] = number_key(&RunConfig::shots);
    k["run.seed"] = number_key(&RunConfig::sample_seed);
    k["run.output_dir"] = path_key(&RunConfig::output_dir);
    return k;
  }();
  return keys;
}

inline constexpr std::string_view kOodPrefix = "data.ood.";

}  // namespace detail

inline bool is_config_key(std::string_view key) {
  return detail::config_keys().count(key) > 0 ||
         (key.starts_with(detail::kOodPrefix) && key.size() > detail::kOodPrefix.size());
}

/// Set one dotted key. Unknown keys are an InvalidConfig error naming the key.
inline void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  if (key.starts_with(detail::kOodPrefix) && key.size() > detail::kOodPrefix.size()) {
    const std::string name(key.substr(detail::kOodPrefix.size()));
    std::erase_if(cfg.ood_tests, [&](const auto& p) { return p.first == name; });
    cfg.ood_tests.emplace_back(name, std::filesystem::path(std::string(value)));
    std::sort(cfg.ood_tests.begin(), cfg.ood_tests.end());
    return;
  }
  const auto& keys = detail::config_keys();
  const auto it = keys.find(key);
  enforce(it != keys.end(), ErrorCode::InvalidConfig, "unknown config key '" + std::string(key) + "'");
  try {
    it->second.set(cfg, value);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, "bad value for " + std::string(key) + ": '" + std::string(value) + "'");
  }
}

/**
 * Parse `key = value` lines. '#' starts a comment; blank lines are skipped.
 * Relative data paths are resolved against `base_dir`.
 */
inline RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string_view body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    enforce(eq != std::string_view::npos, ErrorCode::InvalidConfig,
            "line " + std::to_string(lineno) + ": expected 'key = value'");
    set_config_value(cfg, detail::trim(body.substr(0, eq)), detail::trim(body.substr(eq + 1)));
  }
  if (!base_dir.empty()) {
    auto resolve = [&](std::filesystem::path& p) {
      if (!p.empty() && p.is_relative()) p = base_dir / p;
    };
    resolve(cfg.id_train);
    resolve(cfg.id_test);
    resolve(cfg.output_dir);
    for (auto& [name, p] : cfg.ood_tests) resolve(p);
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  enforce(static_cast<bool>(in), ErrorCode::MissingFile, "cannot open config " + path.string());
  return parse_config(in, path.parent_path());
}

/// Canonical `key = value` text; keys sorted. Paths and output location are
/// excluded so the snapshot depends only on the experiment's hyperparameters.
inline std::string config_snapshot(const RunConfig& cfg) {
  std::ostringstream out;
  for (const auto& [key, k] : detail::config_keys()) {
    if (key.starts_with("data.") || key == "run.output_dir") continue;
    out << key << " = " << k.get(cfg) << '\n';
  }
  return out.str();
}

inline void validate(const RunConfig& cfg) {
  enforce(cfg.shots >= 1, ErrorCode::InvalidConfig, "run.shots must be >= 1");
  enforce(cfg.encoder.kind == "toy" || cfg.encoder.kind == "adapter", ErrorCode::InvalidConfig,
          "encoder.kind must be 'toy' or 'adapter'");
  if (cfg.encoder.kind == "adapter")
    enforce(!cfg.encoder.endpoint.empty(), ErrorCode::InvalidConfig, "encoder.endpoint is required for adapters");
  enforce(!cfg.encoder.templates.empty(), ErrorCode::InvalidConfig, "encoder.templates must not be empty");
  enforce(cfg.prompt_length >= 1, ErrorCode::InvalidConfig, "prompts.L must be >= 1");
  for (const auto& [name, path] : cfg.ood_tests)
    enforce(name != "id" && name != "Average", ErrorCode::InvalidConfig,
            "data.ood." + name + ": reserved OOD set name");
  validate(cfg.miner);
  validate(cfg.train);
  validate(cfg.loss);
  if (cfg.loss.lambda_div > 0.0)
    enforce(cfg.num_ood_prompts >= 2, ErrorCode::InvalidConfig, "loss.lambda_div > 0 requires prompts.C >= 2");
}

/// Every data path named by the config must exist.
inline void validate_paths(const RunConfig& cfg, bool need_train, bool need_test) {
  auto require = [](const std::filesystem::path& p, const std::string& key) {
    enforce(!p.empty(), ErrorCode::InvalidConfig, key + " is not set");
    enforce(std::filesystem::exists(p), ErrorCode::MissingFile, key + ": no such file " + p.string());
  };
  if (need_train) require(cfg.id_train, "data.id_train");
  if (need_test) {
    require(cfg.id_test, "data.id_test");
    enforce(!cfg.ood_tests.empty(), ErrorCode::InvalidConfig, "at least one data.ood.<name> manifest is required");
    for (const auto& [name, p] : cfg.ood_tests) require(p, "data.ood." + name);
  }
}

}  // namespace idlike

#endif  // IDLIKE_CONFIG_HPP_
