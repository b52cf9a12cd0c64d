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

#ifndef IDLIKE_PROMPTLEARN_HPP_
#define IDLIKE_PROMPTLEARN_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "idlike/embedcore.hpp"
#include "idlike/encoder.hpp"
#include "idlike/errors.hpp"
#include "idlike/miner.hpp"

namespace idlike {

inline constexpr std::size_t kDefaultPromptLength = 16;  // L
inline constexpr std::size_t kDefaultOodPrompts = 100;   // C
inline constexpr double kDefaultInitStd = 0.02;
inline constexpr double kDefaultTemperature = 0.01;

// ---------------------------------------------------------------------------
// Prompt parameterization
// ---------------------------------------------------------------------------

using ContextVectors = std::vector<std::vector<double>>;  // L x text_context_dim

/// Learnable context followed by the (frozen) class-name token.
struct IdPrompt {
  std::string class_name;
  ContextVectors context;
  std::vector<double> class_token;

  friend bool operator==(const IdPrompt&, const IdPrompt&) = default;
};

/// Learnable context only; carries no class-name information.
struct OodPrompt {
  ContextVectors context;

  friend bool operator==(const OodPrompt&, const OodPrompt&) = default;
};

struct PromptSet {
  std::vector<IdPrompt> id_prompts;
  std::vector<OodPrompt> ood_prompts;
  std::size_t length = kDefaultPromptLength;
  std::size_t context_dim = 0;

  std::size_t num_classes() const noexcept { return id_prompts.size(); }
  std::size_t num_ood() const noexcept { return ood_prompts.size(); }

  std::vector<std::string> class_names() const {
    std::vector<std::string> out;
    for (const auto& p : id_prompts) out.push_back(p.class_name);
    return out;
  }

  friend bool operator==(const PromptSet&, const PromptSet&) = default;
};

inline TokenSequence id_prompt_tokens(const IdPrompt& p) {
  TokenSequence toks;
  toks.entries = p.context;
  toks.entries.push_back(p.class_token);
  toks.class_slot = p.context.size();
  return toks;
}

inline TokenSequence ood_prompt_tokens(const OodPrompt& p) { return TokenSequence{p.context, std::nullopt}; }

/// Context entries drawn i.i.d. N(0, init_std^2) in a fixed order (ID prompts
/// first, then OOD prompts), so the result depends only on the arguments.
inline PromptSet init_prompts(std::span<const std::string> class_names, std::size_t num_ood, std::size_t length,
                              std::uint64_t seed, const EncoderBackend& backend, double init_std = kDefaultInitStd) {
  enforce(!class_names.empty(), ErrorCode::InvalidConfig, "at least one class is required");
  enforce(length >= 1, ErrorCode::InvalidConfig, "prompt length must be >= 1");
  enforce(init_std >= 0.0, ErrorCode::InvalidConfig, "init std must be >= 0");
  const std::size_t width = backend.text_context_dim();
  std::seed_seq sseq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x9a0bu};
  std::mt19937_64 rng(sseq);
  std::normal_distribution<double> dist(0.0, init_std);
  auto draw = [&] {
    ContextVectors ctx(length, std::vector<double>(width));
    for (auto& row : ctx)
      for (double& v : row) v = init_std > 0.0 ? dist(rng) : 0.0;
    return ctx;
  };
  PromptSet ps;
  ps.length = length;
  ps.context_dim = width;
  for (const auto& name : class_names) ps.id_prompts.push_back(IdPrompt{name, draw(), backend.token_embedding(name)});
  for (std::size_t c = 0; c < num_ood; ++c) ps.ood_prompts.push_back(OodPrompt{draw()});
  return ps;
}

struct PromptFeatures {
  std::vector<Embedding> id_feats;
  std::vector<Embedding> ood_feats;
};

inline PromptFeatures prompt_features(const PromptSet& ps, const EncoderBackend& backend) {
  PromptFeatures f;
  f.id_feats.reserve(ps.num_classes());
  f.ood_feats.reserve(ps.num_ood());
  for (const auto& p : ps.id_prompts) f.id_feats.push_back(backend.encode_text(id_prompt_tokens(p)));
  for (const auto& p : ps.ood_prompts) f.ood_feats.push_back(backend.encode_text(ood_prompt_tokens(p)));
  return f;
}

/// Similarities of one image embedding to every prompt feature.
inline SimilarityRow similarity_row(const PromptFeatures& f, const Embedding& image) {
  SimilarityRow row;
  row.id_sims.reserve(f.id_feats.size());
  row.ood_sims.reserve(f.ood_feats.size());
  for (const auto& h : f.id_feats) row.id_sims.push_back(cosine_similarity(h, image));
  for (const auto& h : f.ood_feats) row.ood_sims.push_back(cosine_similarity(h, image));
  return row;
}

// ---------------------------------------------------------------------------
// Loss terms
// ---------------------------------------------------------------------------

enum class OutLossForm {
  RatioA,  // -log(B / (A + B)): pull outliers toward OOD prompts
  RatioB,  //  log(A / (A + B)): push outliers away from ID prompts
};

inline std::string to_string(OutLossForm f) { return f == OutLossForm::RatioA ? "ratio_a" : "ratio_b"; }

inline OutLossForm parse_out_loss_form(std::string_view s) {
  if (s == "ratio_a") return OutLossForm::RatioA;
  if (s == "ratio_b") return OutLossForm::RatioB;
  throw Error(ErrorCode::InvalidConfig, "unknown out_loss_form '" + std::string(s) + "'");
}

struct LossWeights {
  double lambda_out = 0.3;
  double lambda_div = 0.2;
  double tau = kDefaultTemperature;
};

inline void validate(const LossWeights& w) {
  enforce(w.lambda_out >= 0.0 && w.lambda_div >= 0.0, ErrorCode::InvalidConfig, "loss weights must be >= 0");
  check_temperature(w.tau);
}

namespace detail {

// (log sum_k exp(s_in/tau), log sum_c exp(s_out/tau), log of the sum over both)
template <class T>
struct LogMasses {
  T in;
  T out;
  T all;
  bool has_out;
};

template <class T>
LogMasses<T> log_masses(const BasicSimilarityRow<T>& row, const T& tau) {
  enforce(!row.id_sims.empty(), ErrorCode::EmptyInput, "similarity row needs K >= 1");
  check_temperature(tau);
  LogMasses<T> m;
  m.in = scaled_log_sum_exp(std::span<const T>(row.id_sims), tau);
  m.has_out = !row.ood_sims.empty();
  if (m.has_out) {
    m.out = scaled_log_sum_exp(std::span<const T>(row.ood_sims), tau);
    m.all = log_add_exp(m.in, m.out);
  } else {
    m.out = -std::numeric_limits<T>::infinity();
    m.all = m.in;
  }
  return m;
}

}  // namespace detail

/// Cross-entropy of the labelled class against all ID and OOD prompts.
template <class T>
T loss_in(const BasicSimilarityRow<T>& row, std::size_t label, const T& tau) {
  enforce(label < row.id_sims.size(), ErrorCode::LabelOutOfRange,
          "label " + std::to_string(label) + " >= K = " + std::to_string(row.id_sims.size()));
  const auto m = detail::log_masses(row, tau);
  return m.all - row.id_sims[label] / tau;
}

template <class T>
T loss_out(const BasicSimilarityRow<T>& row, const T& tau, OutLossForm form) {
  enforce(!row.ood_sims.empty(), ErrorCode::NoOodPrompts, "loss_out needs C >= 1");
  using std::exp;
  const auto m = detail::log_masses(row, tau);
  // log1p keeps full relative precision when one mass dominates.
  return form == OutLossForm::RatioA ? log1p_any(T(exp(m.in - m.out))) : -log1p_any(T(exp(m.out - m.in)));
}

/// Mean cosine similarity over all unordered pairs of OOD prompt features.
inline double loss_div(std::span<const Embedding> ood_feats) {
  const std::size_t c = ood_feats.size();
  enforce(c >= 2, ErrorCode::TooFewPrompts, "loss_div needs C >= 2, got " + std::to_string(c));
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < c; ++i)
    for (std::size_t j = i + 1; j < c; ++j) acc += cosine_similarity(ood_feats[i], ood_feats[j]);
  return acc / (static_cast<double>(c) * static_cast<double>(c - 1) / 2.0);
}

inline double total_loss(double l_in, double l_out, double l_div, const LossWeights& w) {
  return l_in + w.lambda_out * l_out + w.lambda_div * l_div;
}

/// d(loss_in)/d(similarities).
inline SimilarityRow loss_in_grad(const SimilarityRow& row, std::size_t label, double tau) {
  enforce(label < row.id_sims.size(), ErrorCode::LabelOutOfRange, "label out of range");
  const auto m = detail::log_masses(row, tau);
  SimilarityRow g;
  for (std::size_t k = 0; k < row.id_sims.size(); ++k)
    g.id_sims.push_back((std::exp(row.id_sims[k] / tau - m.all) - (k == label ? 1.0 : 0.0)) / tau);
  for (double s : row.ood_sims) g.ood_sims.push_back(std::exp(s / tau - m.all) / tau);
  return g;
}

/// d(loss_out)/d(similarities). The differences p - q and r - p are written in
/// factored form so they keep full relative precision when one mass dominates.
inline SimilarityRow loss_out_grad(const SimilarityRow& row, double tau, OutLossForm form) {
  enforce(!row.ood_sims.empty(), ErrorCode::NoOodPrompts, "loss_out needs C >= 1");
  const auto m = detail::log_masses(row, tau);
  SimilarityRow g;
  if (form == OutLossForm::RatioA) {
    const double in_share = std::exp(m.in - m.all);
    for (double s : row.id_sims) g.id_sims.push_back(std::exp(s / tau - m.all) / tau);
    for (double s : row.ood_sims) g.ood_sims.push_back(-std::exp(s / tau - m.out) * in_share / tau);
  } else {
    const double out_share = std::exp(m.out - m.all);
    for (double s : row.id_sims) g.id_sims.push_back(std::exp(s / tau - m.in) * out_share / tau);
    for (double s : row.ood_sims) g.ood_sims.push_back(-std::exp(s / tau - m.all) / tau);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Objective over a batch, with gradients w.r.t. every context vector
// ---------------------------------------------------------------------------

struct IdItem {
  const Embedding* image = nullptr;
  std::size_t label = 0;
};

struct TrainBatch {
  std::vector<IdItem> id_items;
  std::vector<const Embedding*> ood_items;
};

struct LossBreakdown {
  double l_in = 0.0;   // mean over ID items (0 when none)
  double l_out = 0.0;  // mean over OOD items (0 when none)
  double l_div = 0.0;  // 0 when C < 2
  double total = 0.0;
};

/// Gradient with the same shape as the context vectors of a PromptSet.
struct PromptGrad {
  std::vector<ContextVectors> id_context;
  std::vector<ContextVectors> ood_context;
};

/**
 * total = mean L_in over ID items + lambda_out * mean L_out over OOD items
 *         + lambda_div * L_div.
 * When `grad` is non-null it receives d(total)/d(context) for every prompt.
 * Class tokens are frozen and receive no gradient.
 */
inline LossBreakdown evaluate_objective(const PromptSet& ps, const EncoderBackend& backend, const TrainBatch& batch,
                                        const LossWeights& w, OutLossForm form, PromptGrad* grad = nullptr) {
  validate(w);
  const std::size_t k_count = ps.num_classes();
  const std::size_t c_count = ps.num_ood();
  const std::size_t d = backend.dim();
  enforce(k_count >= 1, ErrorCode::InvalidConfig, "prompt set has no ID prompts");
  if (w.lambda_div > 0.0)
    enforce(c_count >= 2, ErrorCode::TooFewPrompts, "lambda_div > 0 requires C >= 2");
  if (!batch.ood_items.empty() && w.lambda_out > 0.0)
    enforce(c_count >= 1, ErrorCode::NoOodPrompts, "OOD items require C >= 1 when lambda_out > 0");

  std::vector<TextForward> id_fwd, ood_fwd;
  PromptFeatures feats;
  if (grad) {
    for (const auto& p : ps.id_prompts) id_fwd.push_back(backend.encode_text_with_vjp(id_prompt_tokens(p)));
    for (const auto& p : ps.ood_prompts) ood_fwd.push_back(backend.encode_text_with_vjp(ood_prompt_tokens(p)));
    for (const auto& f : id_fwd) feats.id_feats.push_back(f.embedding);
    for (const auto& f : ood_fwd) feats.ood_feats.push_back(f.embedding);
  } else {
    feats = prompt_features(ps, backend);
  }

  // Cotangents on the prompt features.
  std::vector<std::vector<double>> g_id(k_count, std::vector<double>(d, 0.0));
  std::vector<std::vector<double>> g_ood(c_count, std::vector<double>(d, 0.0));
  auto accumulate = [&](const SimilarityRow& gs, const Embedding& img, double coef) {
    for (std::size_t k = 0; k < k_count; ++k)
      for (std::size_t i = 0; i < d; ++i) g_id[k][i] += coef * gs.id_sims[k] * img[i];
    for (std::size_t c = 0; c < c_count; ++c)
      for (std::size_t i = 0; i < d; ++i) g_ood[c][i] += coef * gs.ood_sims[c] * img[i];
  };

  LossBreakdown lb;
  if (!batch.id_items.empty()) {
    const double coef = 1.0 / static_cast<double>(batch.id_items.size());
    for (const auto& item : batch.id_items) {
      const SimilarityRow row = similarity_row(feats, *item.image);
      lb.l_in += coef * loss_in(row, item.label, w.tau);
      if (grad) accumulate(loss_in_grad(row, item.label, w.tau), *item.image, coef);
    }
  }
  if (!batch.ood_items.empty() && c_count >= 1) {
    const double coef = 1.0 / static_cast<double>(batch.ood_items.size());
    for (const Embedding* img : batch.ood_items) {
      const SimilarityRow row = similarity_row(feats, *img);
      lb.l_out += coef * loss_out(row, w.tau, form);
      if (grad && w.lambda_out > 0.0) accumulate(loss_out_grad(row, w.tau, form), *img, coef * w.lambda_out);
    }
  }
  if (c_count >= 2) {
    lb.l_div = loss_div(feats.ood_feats);
    if (grad && w.lambda_div > 0.0) {
      const double pairs = static_cast<double>(c_count) * static_cast<double>(c_count - 1) / 2.0;
      std::vector<double> sum(d, 0.0);
      for (const auto& h : feats.ood_feats)
        for (std::size_t i = 0; i < d; ++i) sum[i] += h[i];
      for (std::size_t c = 0; c < c_count; ++c)
        for (std::size_t i = 0; i < d; ++i) g_ood[c][i] += w.lambda_div * (sum[i] - feats.ood_feats[c][i]) / pairs;
    }
  }
  lb.total = total_loss(lb.l_in, lb.l_out, lb.l_div, w);

  if (grad) {
    const std::size_t len = ps.length;
    grad->id_context.assign(k_count, ContextVectors{});
    grad->ood_context.assign(c_count, ContextVectors{});
    for (std::size_t k = 0; k < k_count; ++k) {
      TokenGrad tg = id_fwd[k].vjp(g_id[k]);
      tg.resize(len);  // drop the class-token row
      grad->id_context[k] = std::move(tg);
    }
    for (std::size_t c = 0; c < c_count; ++c) grad->ood_context[c] = ood_fwd[c].vjp(g_ood[c]);
  }
  return lb;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct TrainConfig {
  std::size_t epochs = 3;
  double learning_rate = 0.005;
  std::size_t batch_size = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  OutLossForm out_loss_form = OutLossForm::RatioB;
};

inline void validate(const TrainConfig& tc) {
  enforce(tc.epochs >= 1, ErrorCode::InvalidConfig, "epochs must be >= 1");
  enforce(tc.learning_rate > 0.0, ErrorCode::InvalidConfig, "learning rate must be > 0");
  enforce(tc.batch_size >= 1, ErrorCode::InvalidConfig, "batch size must be >= 1");
  enforce(tc.beta1 >= 0.0 && tc.beta1 < 1.0 && tc.beta2 >= 0.0 && tc.beta2 < 1.0, ErrorCode::InvalidConfig,
          "betas must lie in [0, 1)");
  enforce(tc.weight_decay >= 0.0 && tc.eps > 0.0, ErrorCode::InvalidConfig, "bad weight decay / eps");
}

/// Adam with decoupled weight decay over a flat parameter vector.
class AdamW {
 public:
  AdamW(std::size_t n, const TrainConfig& tc) : tc_(tc), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(tc_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(tc_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i] *= 1.0 - tc_.learning_rate * tc_.weight_decay;
      m_[i] = tc_.beta1 * m_[i] + (1.0 - tc_.beta1) * grads[i];
      v_[i] = tc_.beta2 * v_[i] + (1.0 - tc_.beta2) * grads[i] * grads[i];
      const double mhat = m_[i] / bc1;
      const double vhat = v_[i] / bc2;
      params[i] -= tc_.learning_rate * mhat / (std::sqrt(vhat) + tc_.eps);
    }
  }

  std::size_t steps() const noexcept { return t_; }

 private:
  TrainConfig tc_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

namespace detail {

inline std::vector<double> flatten_context(const PromptSet& ps) {
  std::vector<double> flat;
  for (const auto& p : ps.id_prompts)
    for (const auto& row : p.context) flat.insert(flat.end(), row.begin(), row.end());
  for (const auto& p : ps.ood_prompts)
    for (const auto& row : p.context) flat.insert(flat.end(), row.begin(), row.end());
  return flat;
}

inline void unflatten_context(std::span<const double> flat, PromptSet& ps) {
  std::size_t pos = 0;
  auto fill = [&](ContextVectors& ctx) {
    for (auto& row : ctx)
      for (double& v : row) v = flat[pos++];
  };
  for (auto& p : ps.id_prompts) fill(p.context);
  for (auto& p : ps.ood_prompts) fill(p.context);
}

inline std::vector<double> flatten_grad(const PromptGrad& g) {
  std::vector<double> flat;
  for (const auto& ctx : g.id_context)
    for (const auto& row : ctx) flat.insert(flat.end(), row.begin(), row.end());
  for (const auto& ctx : g.ood_context)
    for (const auto& row : ctx) flat.insert(flat.end(), row.begin(), row.end());
  return flat;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct StepRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  LossBreakdown loss;
};

struct TrainResult {
  PromptSet prompts;
  std::vector<StepRecord> history;
};

/// Thrown when a loss turns non-finite; carries the history up to that step.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<StepRecord> history)
      : Error(ErrorCode::DivergenceDetected, what), history_(std::move(history)) {}

  const std::vector<StepRecord>& history() const noexcept { return history_; }

 private:
  std::vector<StepRecord> history_;
};

/// One epoch's item order: d_in and d_out shuffled independently with a
/// stream seeded by (seed, epoch), then interleaved ID, OOD, ID, OOD, ...
/// Entries are (is_ood, index).
inline std::vector<std::pair<bool, std::size_t>> epoch_stream(std::size_t n_in, std::size_t n_out,
                                                              std::uint64_t seed, std::size_t epoch) {
  std::seed_seq sseq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                     static_cast<std::uint32_t>(epoch), 0x5e9u};
  std::mt19937_64 rng(sseq);
  std::vector<std::size_t> in(n_in), out(n_out);
  std::iota(in.begin(), in.end(), 0);
  std::iota(out.begin(), out.end(), 0);
  std::shuffle(in.begin(), in.end(), rng);
  std::shuffle(out.begin(), out.end(), rng);
  std::vector<std::pair<bool, std::size_t>> stream;
  stream.reserve(n_in + n_out);
  for (std::size_t i = 0; i < std::max(n_in, n_out); ++i) {
    if (i < n_in) stream.emplace_back(false, in[i]);
    if (i < n_out) stream.emplace_back(true, out[i]);
  }
  return stream;
}

/**
 * Tune the prompt context vectors on mined data with a frozen backend.
 * Each step takes batch_size consecutive items from the epoch stream; with
 * the default batch size of 1 steps alternate between an ID crop (L_in) and
 * an outlier crop (L_out), and L_div is applied on every step.
 */
inline TrainResult train(const MinedDatasets& mined, PromptSet ps, const EncoderBackend& backend,
                         const TrainConfig& tc, const LossWeights& w) {
  validate(tc);
  validate(w);
  enforce(backend.info().differentiable_text, ErrorCode::GradientUnsupported,
          "backend '" + backend.info().name + "' cannot be trained against (no text-path gradients)");
  enforce(!mined.d_in.empty() || !mined.d_out.empty(), ErrorCode::EmptyInput, "mined datasets are empty");
  if (w.lambda_div > 0.0) enforce(ps.num_ood() >= 2, ErrorCode::TooFewPrompts, "lambda_div > 0 requires C >= 2");
  if (!mined.d_out.empty() && w.lambda_out > 0.0)
    enforce(ps.num_ood() >= 1, ErrorCode::NoOodPrompts, "lambda_out > 0 requires C >= 1");
  for (const auto& e : mined.d_in)
    enforce(e.label && *e.label < ps.num_classes(), ErrorCode::LabelOutOfRange, "mined ID entry label out of range");

  std::vector<double> params = detail::flatten_context(ps);
  AdamW opt(params.size(), tc);
  TrainResult result;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const auto stream = epoch_stream(mined.d_in.size(), mined.d_out.size(), tc.seed, epoch);
    for (std::size_t pos = 0; pos < stream.size(); pos += tc.batch_size) {
      TrainBatch batch;
      for (std::size_t j = pos; j < std::min(pos + tc.batch_size, stream.size()); ++j) {
        const auto [is_ood, idx] = stream[j];
        if (is_ood) {
          batch.ood_items.push_back(&mined.d_out[idx].embedding);
        } else {
          batch.id_items.push_back(IdItem{&mined.d_in[idx].embedding, *mined.d_in[idx].label});
        }
      }
      PromptGrad grad;
      const LossBreakdown lb = evaluate_objective(ps, backend, batch, w, tc.out_loss_form, &grad);
      result.history.push_back(StepRecord{epoch, step, batch.id_items.size(), batch.ood_items.size(), lb});
      if (!std::isfinite(lb.total) || !std::isfinite(lb.l_in) || !std::isfinite(lb.l_out) ||
          !std::isfinite(lb.l_div))
        throw DivergenceError("non-finite loss at step " + std::to_string(step), std::move(result.history));
      const std::vector<double> flat_grad = detail::flatten_grad(grad);
      opt.step(params, flat_grad);
      detail::unflatten_context(params, ps);
      ++step;
    }
  }
  result.prompts = std::move(ps);
  return result;
}

}  // namespace idlike

#endif  // IDLIKE_PROMPTLEARN_HPP_
