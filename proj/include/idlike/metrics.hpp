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

#ifndef IDLIKE_METRICS_HPP_
#define IDLIKE_METRICS_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "idlike/detect.hpp"
#include "idlike/errors.hpp"

namespace idlike {

struct EvalResult {
  double fpr_at_95 = 0.0;
  double auroc = 0.0;
  double id_acc = 0.0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;

  friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

/// Fraction of OOD scores accepted as ID at the threshold calibrated on the ID
/// scores for target_tpr. Higher scores mean "more ID".
inline double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                         double target_tpr = 0.95) {
  enforce(!id_scores.empty() && !ood_scores.empty(), ErrorCode::EmptyScores, "fpr_at_tpr needs non-empty inputs");
  const Detector det{calibrate_gamma(id_scores, target_tpr)};
  std::size_t accepted = 0;
  for (double s : ood_scores)
    if (detect(s, det) == Decision::ID) ++accepted;
  return static_cast<double>(accepted) / static_cast<double>(ood_scores.size());
}

/// Rank-statistic AUROC with ID as the positive class: P(id > ood) + P(tie) / 2.
/// Wins and ties are counted as integers so the result is exact up to the
/// final division.
inline double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  enforce(!id_scores.empty() && !ood_scores.empty(), ErrorCode::EmptyScores, "auroc needs non-empty inputs");
  std::vector<double> ood(ood_scores.begin(), ood_scores.end());
  std::sort(ood.begin(), ood.end());
  std::uint64_t twice_wins = 0;  // 2 * wins + ties
  for (double s : id_scores) {
    const auto lo = std::lower_bound(ood.begin(), ood.end(), s);
    const auto hi = std::upper_bound(lo, ood.end(), s);
    twice_wins += 2 * static_cast<std::uint64_t>(lo - ood.begin()) + static_cast<std::uint64_t>(hi - lo);
  }
  const double pairs = static_cast<double>(id_scores.size()) * static_cast<double>(ood.size());
  return static_cast<double>(twice_wins) / (2.0 * pairs);
}

inline double id_accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels) {
  enforce(predicted.size() == labels.size(), ErrorCode::LengthMismatch, "predictions and labels differ in length");
  enforce(!labels.empty(), ErrorCode::EmptyScores, "id_accuracy needs at least one sample");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (predicted[i] == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

inline double id_accuracy(std::span<const ScoreRecord> records, std::span<const std::size_t> labels) {
  std::vector<std::size_t> predicted;
  predicted.reserve(records.size());
  for (const auto& r : records) predicted.push_back(r.predicted_class);
  return id_accuracy(std::span<const std::size_t>(predicted), labels);
}

inline EvalResult evaluate(std::span<const double> id_scores, std::span<const double> ood_scores, double id_acc) {
  return EvalResult{fpr_at_tpr(id_scores, ood_scores, 0.95), auroc(id_scores, ood_scores), id_acc, id_scores.size(),
                    ood_scores.size()};
}

}  // namespace idlike

#endif  // IDLIKE_METRICS_HPP_
