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

#ifndef IDLIKE_REPORT_HPP_
#define IDLIKE_REPORT_HPP_

#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "idlike/detect.hpp"
#include "idlike/errors.hpp"
#include "idlike/metrics.hpp"

namespace idlike {

using ojson = nlohmann::ordered_json;

inline constexpr std::string_view kIdSplit = "id";
inline constexpr std::string_view kAverageRow = "Average";

// ---------------------------------------------------------------------------
// Score dump: one JSON object per line
// ---------------------------------------------------------------------------

inline ojson to_json(const ScoreRecord& r) {
  ojson j;
  j["sample_id"] = r.sample_id;
  j["split"] = r.split;
  if (r.label) j["label"] = *r.label;
  j["s_in"] = r.sim_row.id_sims;
  j["s_out"] = r.sim_row.ood_sims;
  j["score_idlike"] = r.score_idlike;
  j["score_mcm"] = r.score_mcm;
  j["score_msp"] = r.score_msp;
  j["predicted_class"] = r.predicted_class;
  j["log_score_idlike"] = r.log_score_idlike;
  j["log_score_mcm"] = r.log_score_mcm;
  j["log_score_msp"] = r.log_score_msp;
  j["log_score_mcm_zeroshot"] = r.log_score_mcm_zeroshot;
  j["predicted_class_zeroshot"] = r.predicted_class_zeroshot;
  return j;
}

inline ScoreRecord score_record_from_json(const ojson& j) {
  try {
    ScoreRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.split = j.at("split").get<std::string>();
    if (j.contains("label")) r.label = j.at("label").get<std::size_t>();
    r.sim_row.id_sims = j.at("s_in").get<std::vector<double>>();
    r.sim_row.ood_sims = j.at("s_out").get<std::vector<double>>();
    r.score_idlike = j.at("score_idlike").get<double>();
    r.score_mcm = j.at("score_mcm").get<double>();
    r.score_msp = j.at("score_msp").get<double>();
    r.predicted_class = j.at("predicted_class").get<std::size_t>();
    r.log_score_idlike = j.at("log_score_idlike").get<double>();
    r.log_score_mcm = j.at("log_score_mcm").get<double>();
    r.log_score_msp = j.at("log_score_msp").get<double>();
    r.log_score_mcm_zeroshot = j.at("log_score_mcm_zeroshot").get<double>();
    r.predicted_class_zeroshot = j.at("predicted_class_zeroshot").get<std::size_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("malformed score record: ") + e.what());
  }
}

inline void write_score_dump(const std::filesystem::path& path, const std::vector<ScoreRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  enforce(static_cast<bool>(out), ErrorCode::MissingFile, "cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

inline std::vector<ScoreRecord> read_score_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  enforce(static_cast<bool>(in), ErrorCode::MissingFile, "cannot open score dump " + path.string());
  std::vector<ScoreRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::FormatError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    records.push_back(score_record_from_json(j));
  }
  enforce(!records.empty(), ErrorCode::EmptyScores, path.string() + " holds no score records");
  return records;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

/// Scoring methods in report order.
enum class Method { Idlike, Mcm, Msp, McmZeroShot };

inline constexpr Method kMethods[] = {Method::Idlike, Method::Mcm, Method::Msp, Method::McmZeroShot};

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Idlike: return "idlike";
    case Method::Mcm: return "mcm";
    case Method::Msp: return "msp";
    case Method::McmZeroShot: return "mcm_zeroshot";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : kMethods)
    if (to_string(m) == s) return m;
  throw Error(ErrorCode::InvalidConfig, "unknown method '" + std::string(s) + "'");
}

/// Ranking score for a method. Log-domain forms keep every sample distinct
/// where the plain scores round to 1 in double precision.
inline double ranking_score(const ScoreRecord& r, Method m) {
  switch (m) {
    case Method::Idlike: return r.log_score_idlike;
    case Method::Mcm: return r.log_score_mcm;
    case Method::Msp: return r.log_score_msp;
    case Method::McmZeroShot: return r.log_score_mcm_zeroshot;
  }
  return 0.0;
}

inline std::size_t predicted_class(const ScoreRecord& r, Method m) {
  return m == Method::McmZeroShot ? r.predicted_class_zeroshot : r.predicted_class;
}

struct ReportRow {
  std::string method;
  std::string ood_set;
  EvalResult result;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

/**
 * Metrics per (method, OOD set) plus one Average row per method holding the
 * arithmetic mean of that method's rows; the Average n_ood is the total.
 * Records with split "id" are the ID test set and must be labeled.
 */
inline std::vector<ReportRow> build_report(const std::vector<ScoreRecord>& records) {
  std::vector<const ScoreRecord*> id;
  std::map<std::string, std::vector<const ScoreRecord*>> ood;  // sorted by set name
  for (const auto& r : records) {
    if (r.split == kIdSplit) id.push_back(&r);
    else ood[r.split].push_back(&r);
  }
  enforce(!id.empty(), ErrorCode::EmptyScores, "no ID records in score set");
  enforce(!ood.empty(), ErrorCode::EmptyScores, "no OOD records in score set");
  std::vector<std::size_t> labels;
  for (const auto* r : id) {
    enforce(r->label.has_value(), ErrorCode::UnknownLabel, "ID record '" + r->sample_id + "' has no label");
    labels.push_back(*r->label);
  }

  std::vector<ReportRow> rows;
  for (Method m : kMethods) {
    std::vector<double> id_scores;
    std::vector<std::size_t> predicted;
    for (const auto* r : id) {
      id_scores.push_back(ranking_score(*r, m));
      predicted.push_back(predicted_class(*r, m));
    }
    const double acc = id_accuracy(predicted, labels);
    ReportRow avg{to_string(m), std::string(kAverageRow), EvalResult{0.0, 0.0, 0.0, id.size(), 0}};
    for (const auto& [name, set] : ood) {
      std::vector<double> ood_scores;
      for (const auto* r : set) ood_scores.push_back(ranking_score(*r, m));
      rows.push_back(ReportRow{to_string(m), name, evaluate(id_scores, ood_scores, acc)});
      avg.result.fpr_at_95 += rows.back().result.fpr_at_95;
      avg.result.auroc += rows.back().result.auroc;
      avg.result.id_acc += rows.back().result.id_acc;
      avg.result.n_ood += rows.back().result.n_ood;
    }
    const double n = static_cast<double>(ood.size());
    avg.result.fpr_at_95 /= n;
    avg.result.auroc /= n;
    avg.result.id_acc /= n;
    rows.push_back(std::move(avg));
  }
  return rows;
}

inline ojson to_json(const ReportRow& row) {
  ojson j;
  j["method"] = row.method;
  j["ood_set"] = row.ood_set;
  j["fpr_at_95"] = row.result.fpr_at_95;
  j["auroc"] = row.result.auroc;
  j["id_acc"] = row.result.id_acc;
  j["n_id"] = row.result.n_id;
  j["n_ood"] = row.result.n_ood;
  return j;
}

inline std::string report_jsonl(const std::vector<ReportRow>& rows) {
  std::string out;
  for (const auto& r : rows) out += to_json(r).dump() + '\n';
  return out;
}

inline std::vector<ReportRow> parse_report_jsonl(std::istream& in) {
  std::vector<ReportRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = ojson::parse(line);
      rows.push_back(ReportRow{j.at("method").get<std::string>(), j.at("ood_set").get<std::string>(),
                               EvalResult{j.at("fpr_at_95").get<double>(), j.at("auroc").get<double>(),
                                          j.at("id_acc").get<double>(), j.at("n_id").get<std::size_t>(),
                                          j.at("n_ood").get<std::size_t>()}});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::FormatError, std::string("malformed report line: ") + e.what());
    }
  }
  return rows;
}

/// Fixed-width summary table, percentages with two decimals.
inline std::string report_table(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-14s %-12s %9s %9s %9s %6s %6s\n", "method", "ood_set", "FPR95%", "AUROC%",
                "IDACC%", "n_id", "n_ood");
  out << buf;
  std::string last_method;
  for (const auto& r : rows) {
    if (!last_method.empty() && r.method != last_method) out << '\n';
    last_method = r.method;
    std::snprintf(buf, sizeof(buf), "%-14s %-12s %9.2f %9.2f %9.2f %6zu %6zu\n", r.method.c_str(),
                  r.ood_set.c_str(), 100.0 * r.result.fpr_at_95, 100.0 * r.result.auroc, 100.0 * r.result.id_acc,
                  r.result.n_id, r.result.n_ood);
    out << buf;
  }
  return out.str();
}

inline void write_report(const std::filesystem::path& dir, const std::vector<ReportRow>& rows) {
  std::ofstream jl(dir / "report.jsonl", std::ios::binary);
  enforce(static_cast<bool>(jl), ErrorCode::MissingFile, "cannot write " + (dir / "report.jsonl").string());
  jl << report_jsonl(rows);
  std::ofstream txt(dir / "report.txt", std::ios::binary);
  enforce(static_cast<bool>(txt), ErrorCode::MissingFile, "cannot write " + (dir / "report.txt").string());
  txt << report_table(rows);
}

}  // namespace idlike

#endif  // IDLIKE_REPORT_HPP_
