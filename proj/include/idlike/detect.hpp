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

#ifndef IDLIKE_DETECT_HPP_
#define IDLIKE_DETECT_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "idlike/embedcore.hpp"
#include "idlike/errors.hpp"

namespace idlike {

// Scores come in two forms. score_* returns the probability-like value in
// (0, 1]; at small temperatures it rounds to exactly 1.0 in double for many
// inputs. log_score_* returns its logarithm, which keeps full relative
// precision there and orders samples identically, so ranking and thresholding
// in the pipeline use the log form.

/// log S(x) = LSE(s_in / tau) - LSE([s_in, s_out] / tau).
template <class T>
T log_score_idlike(const BasicSimilarityRow<T>& row, const T& tau) {
  using std::exp;
  enforce(!row.id_sims.empty(), ErrorCode::EmptyInput, "score_idlike needs K >= 1");
  enforce(!row.ood_sims.empty(), ErrorCode::NoOodPrompts, "score_idlike needs C >= 1");
  check_temperature(tau);
  const T lse_in = scaled_log_sum_exp(std::span<const T>(row.id_sims), tau);
  const T lse_out = scaled_log_sum_exp(std::span<const T>(row.ood_sims), tau);
  // log(A / (A + B)) = -log1p(B / A)
  return -log1p_any(T(exp(lse_out - lse_in)));
}

/// S(x) = sum_k exp(s_in_k / tau) / (sum_k exp(s_in_k / tau) + sum_c exp(s_out_c / tau)).
template <class T>
T score_idlike(const BasicSimilarityRow<T>& row, const T& tau) {
  using std::exp;
  return exp(log_score_idlike(row, tau));
}

namespace detail {

// Sum of exp((s_k - s_max) / tau) over every k except the argmax.
template <class T>
T mass_below_top(std::span<const T> xs, const T& tau) {
  using std::exp;
  const std::size_t top = argmax(xs);
  T tail = T(0);
  for (std::size_t k = 0; k < xs.size(); ++k)
    if (k != top) tail += exp((xs[k] - xs[top]) / tau);
  return tail;
}

}  // namespace detail

/// Logarithm of the maximum softmax probability over the ID similarities.
template <class T>
T log_score_mcm(const BasicSimilarityRow<T>& row, const T& tau) {
  enforce(!row.id_sims.empty(), ErrorCode::EmptyInput, "score_mcm needs K >= 1");
  check_temperature(tau);
  return -log1p_any(detail::mass_below_top(std::span<const T>(row.id_sims), tau));
}

/// Maximum concept matching: max_k softmax(s_in / tau)_k. OOD prompts are ignored.
template <class T>
T score_mcm(const BasicSimilarityRow<T>& row, const T& tau) {
  enforce(!row.id_sims.empty(), ErrorCode::EmptyInput, "score_mcm needs K >= 1");
  check_temperature(tau);
  return T(1) / (T(1) + detail::mass_below_top(std::span<const T>(row.id_sims), tau));
}

template <class T>
T log_score_msp(std::span<const T> logits) {
  enforce(!logits.empty(), ErrorCode::EmptyInput, "score_msp of an empty row");
  return -log1p_any(detail::mass_below_top(logits, T(1)));
}

/// Maximum softmax probability at unit temperature.
template <class T>
T score_msp(std::span<const T> logits) {
  enforce(!logits.empty(), ErrorCode::EmptyInput, "score_msp of an empty row");
  return T(1) / (T(1) + detail::mass_below_top(logits, T(1)));
}

template <class T>
T score_msp(const std::vector<T>& logits) {
  return score_msp(std::span<const T>(logits));
}

/// Class prediction uses the ID prompts only; ties go to the lowest index.
template <class T>
std::size_t classify(const BasicSimilarityRow<T>& row) {
  return argmax(std::span<const T>(row.id_sims));
}

// ---------------------------------------------------------------------------
// Threshold detector
// ---------------------------------------------------------------------------

enum class Decision { ID, OOD };

inline std::string to_string(Decision d) { return d == Decision::ID ? "ID" : "OOD"; }

struct Detector {
  double gamma = 0.0;
  double tau = 0.01;
};

/// ID iff score >= gamma (inclusive).
inline Decision detect(double score, const Detector& d) { return score >= d.gamma ? Decision::ID : Decision::OOD; }

/**
 * Largest threshold that still accepts at least target_tpr of the ID scores:
 * with the scores sorted ascending, gamma is the value at index
 * n - ceil(target_tpr * n). No interpolation between order statistics.
 */
inline double calibrate_gamma(std::span<const double> id_scores, double target_tpr = 0.95) {
  enforce(!id_scores.empty(), ErrorCode::EmptyScores, "calibrate_gamma needs at least one score");
  enforce(target_tpr > 0.0 && target_tpr <= 1.0, ErrorCode::InvalidConfig, "target_tpr must lie in (0, 1]");
  std::vector<double> sorted(id_scores.begin(), id_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  // Guard against 0.95 * 100 evaluating to 95.00000000000001.
  auto need = static_cast<std::size_t>(std::ceil(target_tpr * n - 1e-9 * n));
  need = std::clamp<std::size_t>(need, 1, sorted.size());
  return sorted[sorted.size() - need];
}

// ---------------------------------------------------------------------------
// Per-sample score record
// ---------------------------------------------------------------------------

struct ScoreRecord {
  std::string sample_id;
  std::string split;  // "id" or the OOD set name
  std::optional<std::size_t> label;
  SimilarityRow sim_row;
  double score_idlike = 0.0;
  double score_mcm = 0.0;
  double score_msp = 0.0;
  double log_score_idlike = 0.0;
  double log_score_mcm = 0.0;
  double log_score_msp = 0.0;
  std::size_t predicted_class = 0;
  // Zero-shot baseline computed from the hand-written template prompts.
  double log_score_mcm_zeroshot = 0.0;
  std::size_t predicted_class_zeroshot = 0;

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

/// MSP logits are the raw ID cosine similarities.
inline ScoreRecord make_score_record(std::string sample_id, std::string split, std::optional<std::size_t> label,
                                     SimilarityRow row, double tau,
                                     std::span<const double> zeroshot_id_sims = {}) {
  ScoreRecord r;
  r.sample_id = std::move(sample_id);
  r.split = std::move(split);
  r.label = label;
  r.log_score_idlike = log_score_idlike(row, tau);
  r.score_idlike = std::exp(r.log_score_idlike);
  r.log_score_mcm = log_score_mcm(row, tau);
  r.score_mcm = std::exp(r.log_score_mcm);
  r.log_score_msp = log_score_msp(std::span<const double>(row.id_sims));
  r.score_msp = std::exp(r.log_score_msp);
  r.predicted_class = classify(row);
  if (!zeroshot_id_sims.empty()) {
    SimilarityRow zs{std::vector<double>(zeroshot_id_sims.begin(), zeroshot_id_sims.end()), {}};
    r.log_score_mcm_zeroshot = log_score_mcm(zs, tau);
    r.predicted_class_zeroshot = classify(zs);
  }
  r.sim_row = std::move(row);
  return r;
}

// ---------------------------------------------------------------------------
// Synthetic ID vs ID-like configuration
// ---------------------------------------------------------------------------

struct IdlikeScenario {
  SimilarityRow id_row;   // ID test sample
  SimilarityRow ood_row;  // ID-like OOD sample
};

/**
 * Two similarity rows with identical ID similarities (same maximum, same
 * non-maximal values) whose OOD-prompt similarities differ by +delta for the
 * outlier. Base values are uniform in [-0.5, 0.5].
 */
inline IdlikeScenario synthetic_idlike_scenario(std::size_t k, std::size_t c, std::uint64_t seed, double delta) {
  enforce(k >= 2 && c >= 1, ErrorCode::InvalidConfig, "scenario needs K >= 2 and C >= 1");
  enforce(delta > 0.0, ErrorCode::InvalidConfig, "delta must be > 0");
  std::seed_seq sseq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5ce7u};
  std::mt19937_64 rng(sseq);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  IdlikeScenario sc;
  for (std::size_t i = 0; i < k; ++i) sc.id_row.id_sims.push_back(u(rng));
  for (std::size_t i = 0; i < c; ++i) sc.id_row.ood_sims.push_back(u(rng));
  sc.ood_row.id_sims = sc.id_row.id_sims;
  for (double s : sc.id_row.ood_sims) sc.ood_row.ood_sims.push_back(s + delta);
  return sc;
}

}  // namespace idlike

#endif  // IDLIKE_DETECT_HPP_
