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

// Inference service over a frozen model: triple scoring, link completion and
// compliance checks, addressed by label.

#ifndef KGEDGE_RUNTIME_HPP_
#define KGEDGE_RUNTIME_HPP_

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "kgedge/checkpoint.hpp"
#include "kgedge/common.hpp"
#include "kgedge/models.hpp"
#include "kgedge/pdqa.hpp"
#include "kgedge/triple_store.hpp"

namespace kgedge {

struct RuntimeConfig {
  std::string model_checkpoint_path;
  std::string reference_distribution_path;
  // TSV of trusted triples; the reference is fitted from it when no
  // distribution file is given.
  std::string trusted_triples_path;
  std::string bind_address = "127.0.0.1";
  int port = 8080;
  std::size_t max_batch = 256;
  std::size_t top_k_default = 10;
  double pdqa_threshold = kDefaultPdqaThreshold;
};

inline void validate(const RuntimeConfig& c) {
  if (c.max_batch < 1) throw Error(ErrorCode::kConfig, "max_batch must be >= 1");
  if (c.top_k_default < 1) throw Error(ErrorCode::kConfig, "top_k_default must be >= 1");
  if (c.port < 0 || c.port > 65535) throw Error(ErrorCode::kConfig, "port out of range");
}

inline bool apply_setting(RuntimeConfig& c, std::string_view key, const std::string& value) {
  if (key == "model_checkpoint_path") {
    c.model_checkpoint_path = value;
  } else if (key == "reference_distribution_path") {
    c.reference_distribution_path = value;
  } else if (key == "trusted_triples_path") {
    c.trusted_triples_path = value;
  } else if (key == "bind_address") {
    c.bind_address = value;
  } else if (key == "port") {
    c.port = static_cast<int>(detail::parse_uint(key, value));
  } else if (key == "max_batch") {
    c.max_batch = detail::parse_uint(key, value);
  } else if (key == "top_k_default") {
    c.top_k_default = detail::parse_uint(key, value);
  } else if (key == "pdqa_threshold") {
    c.pdqa_threshold = detail::parse_real(key, value);
  } else {
    return false;
  }
  return true;
}

// Flat "key = value" file; '#' starts a comment. Keys keep file order.
inline std::vector<std::pair<std::string, std::string>> read_kv_file(
    const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key = value");
    auto key = trim(body.substr(0, eq));
    if (key.empty()) throw ParseError(line_no, "empty key");
    out.emplace_back(std::move(key), trim(body.substr(eq + 1)));
  }
  return out;
}

struct Response {
  int status = 200;
  std::string body;
};

// Request handling is a pure function of the request and the immutable
// model, vocabulary and reference, so one Service may serve many threads.
class Service {
 public:
  using Json = nlohmann::ordered_json;

  Service(EmbeddingModel<float> model, Vocabulary vocab, std::optional<ScoreDistribution> reference,
          RuntimeConfig config)
      : model_(std::move(model)),
        vocab_(std::move(vocab)),
        reference_(reference),
        config_(std::move(config)) {
    validate(config_);
    if (vocab_.entities.size() != model_.num_entities() ||
        vocab_.relations.size() != model_.num_relations()) {
      throw Error(ErrorCode::kShape, "vocabulary does not match the checkpoint tables");
    }
  }

  // Loads checkpoint, its ".vocab" sidecar and the reference distribution.
  static Service from_config(const RuntimeConfig& config) {
    validate(config);
    if (config.model_checkpoint_path.empty()) {
      throw Error(ErrorCode::kConfig, "model_checkpoint_path is required");
    }
    auto checkpoint = load_checkpoint<float>(config.model_checkpoint_path);
    auto vocab = read_vocab(config.model_checkpoint_path + ".vocab");
    std::optional<ScoreDistribution> reference;
    if (!config.reference_distribution_path.empty()) {
      reference = load_distribution(config.reference_distribution_path);
    } else if (!config.trusted_triples_path.empty()) {
      reference = fit_reference(checkpoint.model, vocab, config.trusted_triples_path);
    }
    return Service(std::move(checkpoint.model), std::move(vocab), reference, config);
  }

  // Fits the score distribution of a trusted TSV file. Triples with unknown
  // labels are skipped.
  static ScoreDistribution fit_reference(const EmbeddingModel<float>& model,
                                         const Vocabulary& vocab,
                                         const std::filesystem::path& tsv) {
    const auto store = ingest(tsv);
    Scorer<float> scorer(model);
    std::vector<double> scores;
    for (const auto& t : store.triples) {
      const auto h = vocab.entities.find(store.entities.label(t.head));
      const auto r = vocab.relations.find(store.relations.label(t.relation));
      const auto tl = vocab.entities.find(store.entities.label(t.tail));
      if (h && r && tl) scores.push_back(scorer.score({*h, *r, *tl}));
    }
    return fit_distribution(scores);
  }

  const EmbeddingModel<float>& model() const { return model_; }
  const RuntimeConfig& config() const { return config_; }
  const std::optional<ScoreDistribution>& reference() const { return reference_; }

  Response handle(std::string_view method, std::string_view path, std::string_view body) const {
    try {
      if (path == "/health") {
        if (method != "GET") return error(405, "use GET");
        return ok(health());
      }
      if (path == "/score" || path == "/complete" || path == "/pdqa") {
        if (method != "POST") return error(405, "use POST");
        const auto request = Json::parse(body.begin(), body.end());
        if (!request.is_object()) return error(400, "request body must be a JSON object");
        if (path == "/score") return score(request);
        if (path == "/complete") return complete(request);
        return pdqa(request);
      }
      return error(404, "unknown endpoint");
    } catch (const Json::exception& e) {
      return error(400, std::string("bad request: ") + e.what());
    } catch (const Error& e) {
      return error(400, e.what());
    }
  }

 private:
  struct Lookup {
    std::optional<Triple> triple;
    Json unknown = Json::array();
  };

  static Response ok(const Json& j) { return {200, j.dump()}; }

  static Response error(int status, const std::string& message) {
    Json j;
    j["status"] = "error";
    j["message"] = message;
    return {status, j.dump()};
  }

  Json health() const {
    Json j;
    j["status"] = "ok";
    j["model"] = std::string(model_kind_name(model_.kind));
    j["dim"] = model_.dim;
    j["entities"] = model_.num_entities();
    j["relations"] = model_.num_relations();
    j["masked"] = model_.masked;
    j["reference"] = reference_.has_value();
    return j;
  }

  static std::string required_string(const Json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
      throw Error(ErrorCode::kConfig, std::string("field '") + key + "' must be a string");
    }
    return it->get<std::string>();
  }

  Lookup lookup(const Json& j) const {
    const auto head = required_string(j, "head");
    const auto relation = required_string(j, "relation");
    const auto tail = required_string(j, "tail");
    Lookup out;
    const auto h = vocab_.entities.find(head);
    const auto r = vocab_.relations.find(relation);
    const auto t = vocab_.entities.find(tail);
    if (!h) out.unknown.push_back(head);
    if (!r) out.unknown.push_back(relation);
    if (!t && tail != head) out.unknown.push_back(tail);
    if (h && r && t) out.triple = Triple{*h, *r, *t};
    return out;
  }

  static Json out_of_vocabulary(const Json& unknown) {
    Json j;
    j["status"] = std::string(kOutOfVocabulary);
    j["unknown"] = unknown;
    j["flagged"] = true;
    return j;
  }

  void add_z(Json& j, double score) const {
    if (reference_) {
      const double z = (score - reference_->mean) / reference_->stddev;
      j["z"] = z;
      j["flagged"] = z < config_.pdqa_threshold;
    } else {
      j["z"] = nullptr;
      j["flagged"] = nullptr;
    }
  }

  Response score(const Json& request) const {
    const auto found = lookup(request);
    if (!found.triple) return ok(out_of_vocabulary(found.unknown));
    Scorer<float> scorer(model_);
    const double s = scorer.score(*found.triple);
    Json j;
    j["status"] = "ok";
    j["score"] = s;
    add_z(j, s);
    return ok(j);
  }

  Response complete(const Json& request) const {
    const auto relation = required_string(request, "relation");
    const bool has_head = request.contains("head");
    const bool has_tail = request.contains("tail");
    if (has_head == has_tail) {
      return error(400, "give exactly one of 'head' or 'tail'");
    }
    std::size_t k = config_.top_k_default;
    if (const auto it = request.find("k"); it != request.end()) {
      if (!it->is_number_integer() || it->get<std::int64_t>() < 1) {
        return error(400, "'k' must be a positive integer");
      }
      k = static_cast<std::size_t>(it->get<std::int64_t>());
    }
    if (k > config_.max_batch) return error(413, "k exceeds max_batch");
    const auto anchor_label = required_string(request, has_head ? "head" : "tail");
    const auto anchor = vocab_.entities.find(anchor_label);
    const auto rel = vocab_.relations.find(relation);
    Json query;
    query["head"] = has_head ? Json(anchor_label) : Json(nullptr);
    query["relation"] = relation;
    query["tail"] = has_tail ? Json(anchor_label) : Json(nullptr);
    if (!anchor || !rel) {
      Json unknown = Json::array();
      if (!anchor) unknown.push_back(anchor_label);
      if (!rel) unknown.push_back(relation);
      auto j = out_of_vocabulary(unknown);
      j["query"] = query;
      j["candidates"] = Json::array();
      return ok(j);
    }

    Scorer<float> scorer(model_);
    std::vector<float> scores(model_.num_entities());
    scorer.score_candidates(*anchor, *rel, has_head, scores);
    std::vector<std::uint32_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0u);
    k = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                        if (scores[a] != scores[b]) return scores[a] > scores[b];
                        return a < b;
                      });
    Json candidates = Json::array();
    for (std::size_t i = 0; i < k; ++i) {
      Json c;
      c["entity"] = vocab_.entities.label(order[i]);
      c["score"] = static_cast<double>(scores[order[i]]);
      if (reference_) {
        c["z"] = (scores[order[i]] - reference_->mean) / reference_->stddev;
      } else {
        c["z"] = nullptr;
      }
      candidates.push_back(std::move(c));
    }
    Json j;
    j["status"] = "ok";
    j["query"] = query;
    j["candidates"] = std::move(candidates);
    return ok(j);
  }

  Response pdqa(const Json& request) const {
    const auto it = request.find("triples");
    if (it == request.end() || !it->is_array()) return error(400, "'triples' must be an array");
    if (it->size() > config_.max_batch) return error(413, "batch exceeds max_batch");

    std::vector<Triple> known;
    std::vector<std::size_t> known_at;
    std::vector<Json> results(it->size());
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto found = lookup((*it)[i]);
      if (found.triple) {
        known.push_back(*found.triple);
        known_at.push_back(i);
      } else {
        results[i] = out_of_vocabulary(found.unknown);
      }
    }
    std::optional<ScoreDistribution> dist = reference_;
    std::string mode = "reference";
    if (!dist) {
      if (known.size() < 2) {
        return error(422, "no reference distribution and fewer than 2 known triples");
      }
      std::vector<double> scores;
      Scorer<float> scorer(model_);
      for (const auto& t : known) scores.push_back(scorer.score(t));
      dist = fit_distribution(scores);
      mode = "self-fit";
    }
    const auto report = assess_streaming(model_, *dist, known, config_.pdqa_threshold);
    for (const auto& r : report.records) {
      Json j;
      j["status"] = "ok";
      j["score"] = r.raw_score;
      j["z"] = r.z_score;
      j["flagged"] = r.flagged;
      results[known_at[r.input_index]] = std::move(j);
    }
    Json out;
    out["status"] = "ok";
    out["distribution"] = mode;
    out["threshold"] = config_.pdqa_threshold;
    std::size_t flagged = 0;
    Json records = Json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
      Json rec = (*it)[i];
      for (const auto& [key, value] : results[i].items()) rec[key] = value;
      flagged += rec.value("flagged", false) ? 1 : 0;
      records.push_back(std::move(rec));
    }
    out["flagged"] = flagged;
    out["records"] = std::move(records);
    return ok(out);
  }

  EmbeddingModel<float> model_;
  Vocabulary vocab_;
  std::optional<ScoreDistribution> reference_;
  RuntimeConfig config_;
};

}  // namespace kgedge

#endif  // KGEDGE_RUNTIME_HPP_
