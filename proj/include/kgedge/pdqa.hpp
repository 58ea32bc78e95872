// Copyright 2026 The kgedge Authors.
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

#ifndef KGEDGE_PDQA_HPP_
#define KGEDGE_PDQA_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "kgedge/common.hpp"
#include "kgedge/models.hpp"
#include "kgedge/triple_store.hpp"

namespace kgedge {

// Mean and population standard deviation of a score sample.
struct ScoreDistribution {
  double mean = 0;
  double stddev = 0;
  std::size_t n = 0;

  bool operator==(const ScoreDistribution&) const = default;
};

inline ScoreDistribution fit_distribution(std::span<const double> scores) {
  if (scores.size() < 2) {
    throw Error(ErrorCode::kConfig, "at least 2 scores are needed to fit a distribution");
  }
  const double n = static_cast<double>(scores.size());
  double sum = 0;
  for (auto s : scores) sum += s;
  const double mean = sum / n;
  double sq = 0;
  for (auto s : scores) sq += (s - mean) * (s - mean);
  const double stddev = std::sqrt(sq / n);
  if (!(stddev > 0)) {
    throw Error(ErrorCode::kDegenerateDistribution, "all scores are identical; z is undefined");
  }
  return {mean, stddev, scores.size()};
}

inline constexpr double kDefaultPdqaThreshold = -1.0;
inline constexpr std::string_view kOutOfVocabulary = "out-of-vocabulary";
inline constexpr std::string_view kLowConfidence = "low-confidence";

struct AnomalyRecord {
  Triple triple;
  std::size_t input_index = 0;
  double raw_score = 0;
  double z_score = 0;
  bool flagged = false;
  std::string reason;
};

struct AnomalyReport {
  std::vector<AnomalyRecord> records;  // ascending z, ties by input index
  ScoreDistribution distribution;
  double threshold = kDefaultPdqaThreshold;
  // Per-relation fits, filled only in per-relation mode.
  std::map<std::uint32_t, ScoreDistribution> per_relation;

  std::size_t flagged_count() const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const auto& r) { return r.flagged; }));
  }
};

struct AssessOptions {
  double threshold = kDefaultPdqaThreshold;
  // Fit one distribution per relation instead of one for the whole batch.
  bool per_relation = false;
};

namespace detail {

template <typename Real>
bool in_vocabulary(const EmbeddingModel<Real>& model, const Triple& t) {
  return t.head < model.num_entities() && t.tail < model.num_entities() &&
         t.relation < model.num_relations();
}

inline void finish_report(AnomalyReport& report) {
  for (auto& r : report.records) {
    if (r.reason.empty()) {
      r.flagged = r.z_score < report.threshold;
      if (r.flagged) r.reason = std::string(kLowConfidence);
    }
  }
  std::stable_sort(report.records.begin(), report.records.end(),
                   [](const AnomalyRecord& a, const AnomalyRecord& b) {
                     if (a.z_score != b.z_score) return a.z_score < b.z_score;
                     return a.input_index < b.input_index;
                   });
}

template <typename Real>
std::vector<AnomalyRecord> score_records(const EmbeddingModel<Real>& model,
                                         std::span<const Triple> batch) {
  Scorer<Real> scorer(model);
  std::vector<AnomalyRecord> records(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto& r = records[i];
    r.triple = batch[i];
    r.input_index = i;
    if (!in_vocabulary(model, batch[i])) {
      r.raw_score = -std::numeric_limits<double>::infinity();
      r.z_score = -std::numeric_limits<double>::infinity();
      r.flagged = true;
      r.reason = std::string(kOutOfVocabulary);
    } else {
      r.raw_score = static_cast<double>(scorer.score(batch[i]));
    }
  }
  return records;
}

inline double z_of(double x, const ScoreDistribution& d) { return (x - d.mean) / d.stddev; }

}  // namespace detail

// Scores the batch and standardizes against the batch's own distribution.
// Out-of-vocabulary triples are flagged and left out of the fit. Ids at or
// past the model's table sizes count as out of vocabulary.
template <typename Real>
AnomalyReport assess(const EmbeddingModel<Real>& model, std::span<const Triple> batch,
                     const AssessOptions& options = {}) {
  AnomalyReport report;
  report.threshold = options.threshold;
  report.records = detail::score_records(model, batch);

  std::vector<double> all;
  std::map<std::uint32_t, std::vector<double>> by_relation;
  for (const auto& r : report.records) {
    if (!r.reason.empty()) continue;
    all.push_back(r.raw_score);
    if (options.per_relation) by_relation[r.triple.relation].push_back(r.raw_score);
  }
  report.distribution = fit_distribution(all);
  if (options.per_relation) {
    for (const auto& [rel, scores] : by_relation) {
      report.per_relation[rel] = fit_distribution(scores);
    }
  }
  for (auto& r : report.records) {
    if (!r.reason.empty()) continue;
    const auto& dist =
        options.per_relation ? report.per_relation.at(r.triple.relation) : report.distribution;
    r.z_score = detail::z_of(r.raw_score, dist);
  }
  detail::finish_report(report);
  return report;
}

// Standardizes against a previously fitted reference, so single records and
// small batches can be checked.
template <typename Real>
AnomalyReport assess_streaming(const EmbeddingModel<Real>& model,
                               const ScoreDistribution& reference, std::span<const Triple> batch,
                               double threshold = kDefaultPdqaThreshold) {
  if (!(reference.stddev > 0)) {
    throw Error(ErrorCode::kDegenerateDistribution, "reference distribution has zero spread");
  }
  AnomalyReport report;
  report.threshold = threshold;
  report.distribution = reference;
  report.records = detail::score_records(model, batch);
  for (auto& r : report.records) {
    if (r.reason.empty()) r.z_score = detail::z_of(r.raw_score, reference);
  }
  detail::finish_report(report);
  return report;
}

// Fraction of `targets` (input indices) that the report flags.
inline double flagged_recall(const AnomalyReport& report, std::span<const std::size_t> targets) {
  if (targets.empty()) throw Error(ErrorCode::kUndefinedMetric, "recall over an empty target set");
  std::vector<char> flagged_at;
  for (const auto& r : report.records) {
    if (r.input_index >= flagged_at.size()) flagged_at.resize(r.input_index + 1, 0);
    flagged_at[r.input_index] = r.flagged;
  }
  std::size_t hit = 0;
  for (auto i : targets) hit += i < flagged_at.size() && flagged_at[i];
  return static_cast<double>(hit) / static_cast<double>(targets.size());
}

namespace detail {

inline std::string label_or_id(const Dictionary* dict, std::uint32_t id) {
  if (dict != nullptr && id < dict->size()) return dict->label(id);
  return "#" + std::to_string(id);
}

}  // namespace detail

// CSV with header head,relation,tail,score,z,flagged,reason. Labels come from
// the dictionaries when given, otherwise ids are written as "#<id>".
inline void write_anomaly_csv(const AnomalyReport& report, std::ostream& out,
                              const Dictionary* entities = nullptr,
                              const Dictionary* relations = nullptr) {
  const auto old_precision = out.precision(17);
  out << "head,relation,tail,score,z,flagged,reason\n";
  for (const auto& r : report.records) {
    out << detail::csv_field(detail::label_or_id(entities, r.triple.head)) << ','
        << detail::csv_field(detail::label_or_id(relations, r.triple.relation)) << ','
        << detail::csv_field(detail::label_or_id(entities, r.triple.tail)) << ',' << r.raw_score
        << ',' << r.z_score << ',' << (r.flagged ? "true" : "false") << ',' << r.reason << '\n';
  }
  out.precision(old_precision);
}

inline void write_distribution(const ScoreDistribution& d, std::ostream& out) {
  const auto old_precision = out.precision(17);
  out << "mean = " << d.mean << '\n' << "stddev = " << d.stddev << '\n' << "n = " << d.n << '\n';
  out.precision(old_precision);
}

inline void save_distribution(const ScoreDistribution& d, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  write_distribution(d, out);
}

inline ScoreDistribution load_distribution(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  ScoreDistribution d;
  bool has_mean = false, has_stddev = false;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    try {
      if (key == "mean") {
        d.mean = std::stod(value);
        has_mean = true;
      } else if (key == "stddev") {
        d.stddev = std::stod(value);
        has_stddev = true;
      } else if (key == "n") {
        d.n = std::stoull(value);
      }
    } catch (const std::exception&) {
      throw Error(ErrorCode::kFormat, path.string() + ": bad value for '" + key + "'");
    }
  }
  if (!has_mean || !has_stddev || !(d.stddev >= 0)) {
    throw Error(ErrorCode::kFormat, path.string() + ": not a score distribution file");
  }
  return d;
}

}  // namespace kgedge

#endif  // KGEDGE_PDQA_HPP_
