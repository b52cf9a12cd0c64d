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

// Reference implementations used by the unit and acceptance tests. Each one
// takes the most literal route to its value (direct exponentiation at 100
// digits, exhaustive sweeps, pair enumeration) and shares no code with the
// library beyond plain data types.

#ifndef IDLIKE_TESTS_ORACLES_HPP_
#define IDLIKE_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "idlike/idlike.hpp"

namespace oracle {

using mp = boost::multiprecision::cpp_bin_float_100;

inline std::vector<mp> to_mp(std::span<const double> v) { return {v.begin(), v.end()}; }

// exp(s / tau) summed, no shifting.
inline mp mass(std::span<const double> sims, const mp& tau) {
  mp acc = 0;
  for (double s : sims) acc += boost::multiprecision::exp(mp(s) / tau);
  return acc;
}

inline std::vector<mp> softmax(std::span<const double> sims, const mp& tau) {
  const mp z = mass(sims, tau);
  std::vector<mp> out;
  for (double s : sims) out.push_back(boost::multiprecision::exp(mp(s) / tau) / z);
  return out;
}

// S(x) = sum_k e^{s_in/t} / (sum_k e^{s_in/t} + sum_c e^{s_out/t})
inline mp score_idlike(std::span<const double> id, std::span<const double> ood, const mp& tau) {
  const mp a = mass(id, tau);
  return a / (a + mass(ood, tau));
}

inline mp score_mcm(std::span<const double> id, const mp& tau) {
  const auto p = softmax(id, tau);
  return *std::max_element(p.begin(), p.end());
}

inline mp loss_in(std::span<const double> id, std::span<const double> ood, std::size_t label, const mp& tau) {
  const mp num = boost::multiprecision::exp(mp(id[label]) / tau);
  return -boost::multiprecision::log(num / (mass(id, tau) + mass(ood, tau)));
}

// ratio_a = -log(B / (A + B)), ratio_b = log(A / (A + B)) with A, B the ID and OOD masses.
inline mp ratio_a(std::span<const double> id, std::span<const double> ood, const mp& tau) {
  const mp a = mass(id, tau), b = mass(ood, tau);
  return -boost::multiprecision::log(b / (a + b));
}

inline mp ratio_b(std::span<const double> id, std::span<const double> ood, const mp& tau) {
  const mp a = mass(id, tau), b = mass(ood, tau);
  return boost::multiprecision::log(a / (a + b));
}

// Neumaier-compensated sum of squares.
inline double compensated_sum_sq(std::span<const double> v) {
  double sum = 0.0, c = 0.0;
  for (double x : v) {
    const double y = x * x;
    const double t = sum + y;
    c += std::abs(sum) >= std::abs(y) ? (sum - t) + y : (y - t) + sum;
    sum = t;
  }
  return sum + c;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// Mean pairwise cosine over unordered pairs of unit vectors.
inline double mean_pairwise_cosine(const std::vector<idlike::Embedding>& feats) {
  double acc = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < feats.size(); ++i)
    for (std::size_t j = 0; j < feats.size(); ++j)
      if (i < j) {
        acc += dot(feats[i].values(), feats[j].values());
        ++pairs;
      }
  return acc / static_cast<double>(pairs);
}

// Largest gamma among all observed ID scores with TPR(gamma) >= target, swept exhaustively.
inline double sweep_gamma(std::span<const double> id, double target) {
  double best = -INFINITY;
  for (double g : id) {
    std::size_t hits = 0;
    for (double s : id) hits += s >= g ? 1 : 0;
    if (static_cast<double>(hits) >= target * static_cast<double>(id.size()) - 1e-9 * static_cast<double>(id.size()) &&
        g > best)
      best = g;
  }
  return best;
}

inline double sweep_fpr(std::span<const double> id, std::span<const double> ood, double target) {
  const double g = sweep_gamma(id, target);
  std::size_t fp = 0;
  for (double s : ood) fp += s >= g ? 1 : 0;
  return static_cast<double>(fp) / static_cast<double>(ood.size());
}

// Fraction of (id, ood) pairs won, ties counting one half.
inline double pair_auroc(std::span<const double> id, std::span<const double> ood) {
  double wins = 0.0;
  for (double a : id)
    for (double b : ood) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  return wins / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

// Central finite difference of f along coordinate i of x.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                 std::size_t i, double h) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

// |a - n| / max(|a|, |n|, floor): relative error with an absolute floor for
// components whose true value is ~0.
inline double rel_err(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline idlike::Embedding random_unit(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return idlike::normalize(v);
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("idlike_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace oracle

#endif  // IDLIKE_TESTS_ORACLES_HPP_
