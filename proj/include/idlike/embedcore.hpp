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

#ifndef IDLIKE_EMBEDCORE_HPP_
#define IDLIKE_EMBEDCORE_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "idlike/errors.hpp"

namespace idlike {

/// Default embedding width of the dual encoder.
inline constexpr std::size_t kDefaultEmbeddingDim = 512;

/// Drift above |1| that cosine_similarity silently clamps; anything larger
/// means the inputs were not unit vectors.
inline constexpr double kCosineClampSlack = 1e-9;

/**
 * Unit-norm vector produced by an encoder. The only way to obtain one with
 * values is normalize(), so every instance satisfies |v| = 1 up to rounding.
 */
class Embedding {
 public:
  Embedding() = default;

  std::size_t dim() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const Embedding&, const Embedding&) = default;

  friend Embedding normalize(std::span<const double> v);

 private:
  explicit Embedding(std::vector<double> v) : values_(std::move(v)) {}

  std::vector<double> values_;
};

/// Per-sample similarities to the K ID prompts and the C OOD prompts.
template <class T>
struct BasicSimilarityRow {
  std::vector<T> id_sims;
  std::vector<T> ood_sims;

  std::size_t num_id() const noexcept { return id_sims.size(); }
  std::size_t num_ood() const noexcept { return ood_sims.size(); }

  friend bool operator==(const BasicSimilarityRow&, const BasicSimilarityRow&) = default;
};

using SimilarityRow = BasicSimilarityRow<double>;

template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
  enforce(a.size() == b.size(), ErrorCode::DimensionMismatch,
          "dot of sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  T acc = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline Embedding normalize(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm >= 1e-12)) throw Error(ErrorCode::ZeroVector, "cannot normalize a vector with norm < 1e-12");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return Embedding(std::move(out));
}

inline double cosine_similarity(const Embedding& u, const Embedding& v) {
  enforce(u.dim() == v.dim(), ErrorCode::DimensionMismatch,
          "cosine_similarity of dims " + std::to_string(u.dim()) + " and " + std::to_string(v.dim()));
  const double d = dot(u.values(), v.values());
  if (std::abs(d) > 1.0) {
    enforce(std::abs(d) - 1.0 < kCosineClampSlack, ErrorCode::NotNormalized,
            "cosine value " + std::to_string(d) + " outside [-1, 1]");
    return d > 0 ? 1.0 : -1.0;
  }
  return d;
}

/// max(xs) + log(sum(exp(xs - max(xs)))). Works for any floating-like T with
/// ADL-visible exp/log (double, long double, boost multiprecision).
template <class T>
T log_sum_exp(std::span<const T> xs) {
  using std::exp;
  using std::log;
  enforce(!xs.empty(), ErrorCode::EmptyInput, "log_sum_exp of an empty vector");
  T m = xs[0];
  for (const T& x : xs)
    if (x > m) m = x;
  if (m == -std::numeric_limits<T>::infinity()) return m;
  T acc = T(0);
  for (const T& x : xs) acc += exp(x - m);
  return m + log(acc);
}

template <class T>
T log_sum_exp(const std::vector<T>& xs) {
  return log_sum_exp(std::span<const T>(xs));
}

/// log(1 + x); falls back to log(1 + x) for types without a log1p overload
/// (multiprecision types carry enough digits for that to be exact enough).
template <class T>
T log1p_any(const T& x) {
  if constexpr (std::is_floating_point_v<T>) {
    return std::log1p(x);
  } else {
    using std::log;
    return log(T(1) + x);
  }
}

/// log(exp(a) + exp(b)) without overflow.
template <class T>
T log_add_exp(const T& a, const T& b) {
  using std::exp;
  if (a == -std::numeric_limits<T>::infinity()) return b;
  if (b == -std::numeric_limits<T>::infinity()) return a;
  if (a >= b) return a + log1p_any(T(exp(b - a)));
  return b + log1p_any(T(exp(a - b)));
}

/// log(sum_k exp(x_k / tau)).
template <class T>
T scaled_log_sum_exp(std::span<const T> xs, const T& tau) {
  std::vector<T> scaled(xs.begin(), xs.end());
  for (T& x : scaled) x /= tau;
  return log_sum_exp(std::span<const T>(scaled));
}

inline void check_temperature(double tau) {
  enforce(tau > 0.0, ErrorCode::NonPositiveTemperature, "temperature must be > 0, got " + std::to_string(tau));
}

template <class T>
void check_temperature(const T& tau) {
  enforce(tau > T(0), ErrorCode::NonPositiveTemperature, "temperature must be > 0");
}

/// p_k = exp(s_k / tau) / sum_j exp(s_j / tau), via the max-shifted form.
template <class T>
std::vector<T> softmax_probs(std::span<const T> sims, const T& tau) {
  using std::exp;
  enforce(!sims.empty(), ErrorCode::EmptyInput, "softmax_probs of an empty vector");
  check_temperature(tau);
  T m = sims[0];
  for (const T& s : sims)
    if (s > m) m = s;
  std::vector<T> out;
  out.reserve(sims.size());
  T total = T(0);
  for (const T& s : sims) {
    out.push_back(exp((s - m) / tau));
    total += out.back();
  }
  for (T& p : out) p /= total;
  return out;
}

template <class T>
std::vector<T> softmax_probs(const std::vector<T>& sims, const T& tau) {
  return softmax_probs(std::span<const T>(sims), tau);
}

/// Index of the largest entry; ties resolve to the lowest index.
template <class T>
std::size_t argmax(std::span<const T> xs) {
  enforce(!xs.empty(), ErrorCode::EmptyInput, "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] > xs[best]) best = i;
  return best;
}

}  // namespace idlike

#endif  // IDLIKE_EMBEDCORE_HPP_
