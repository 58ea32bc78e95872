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

#ifndef KGEDGE_EVALUATOR_HPP_
#define KGEDGE_EVALUATOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "kgedge/common.hpp"
#include "kgedge/models.hpp"
#include "kgedge/triple_store.hpp"

namespace kgedge {

// Tails known for each (head, relation) and heads for each (relation, tail),
// sorted ascending without duplicates. Used to drop other true answers in filtered ranking.
class KnownTriples {
 public:
  KnownTriples() = default;
  explicit KnownTriples(std::span<const Triple> triples) {
    for (const auto& t : triples) {
      tails_[key(t.head, t.relation)].push_back(t.tail);
      heads_[key(t.tail, t.relation)].push_back(t.head);
    }
    for (auto* index : {&tails_, &heads_}) {
      for (auto& [k, v] : *index) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
      }
    }
  }
  explicit KnownTriples(const TripleStore& store) : KnownTriples(store.triples) {}

  std::span<const std::uint32_t> tails(std::uint32_t head, std::uint32_t relation) const {
    auto it = tails_.find(key(head, relation));
    if (it == tails_.end()) return {};
    return it->second;
  }
  std::span<const std::uint32_t> heads(std::uint32_t relation, std::uint32_t tail) const {
    auto it = heads_.find(key(tail, relation));
    if (it == heads_.end()) return {};
    return it->second;
  }

 private:
  static std::uint64_t key(std::uint32_t entity, std::uint32_t relation) {
    return (static_cast<std::uint64_t>(entity) << 32) | relation;
  }
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> tails_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> heads_;
};

enum class TieRule { kOptimistic, kPessimistic, kRealistic };

struct RankOptions {
  bool filtered = true;
  TieRule tie_rule = TieRule::kRealistic;
  std::size_t num_threads = 1;
};

// Two queries per triple, in order: replace tail, then replace head.
// Realistic ranks are the mean of optimistic and pessimistic ranks and may
// therefore be half-integers.
struct QueryRanks {
  std::vector<double> ranks;
  std::vector<std::uint64_t> candidate_sizes;
  std::vector<std::uint8_t> replaced_tail;
};

namespace detail {

inline double apply_tie_rule(std::uint64_t greater, std::uint64_t equal, TieRule rule) {
  const double optimistic = 1.0 + static_cast<double>(greater);
  const double pessimistic = 1.0 + static_cast<double>(greater + equal);
  switch (rule) {
    case TieRule::kOptimistic: return optimistic;
    case TieRule::kPessimistic: return pessimistic;
    case TieRule::kRealistic: return 0.5 * (optimistic + pessimistic);
  }
  return optimistic;
}

template <typename Real>
void check_queries(const EmbeddingModel<Real>& model, std::span<const Triple> queries) {
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& t = queries[i];
    if (t.head >= model.num_entities() || t.tail >= model.num_entities() ||
        t.relation >= model.num_relations()) {
      throw Error(ErrorCode::kIndex,
                  "query " + std::to_string(i) + " (" + std::to_string(t.head) + ", " +
                      std::to_string(t.relation) + ", " + std::to_string(t.tail) +
                      ") uses an id unseen by the model");
    }
  }
}

}  // namespace detail

template <typename Real>
QueryRanks rank_queries(const EmbeddingModel<Real>& model, const KnownTriples& known,
                        std::span<const Triple> queries, const RankOptions& options = {}) {
  detail::check_queries(model, queries);
  QueryRanks out;
  out.ranks.resize(2 * queries.size());
  out.candidate_sizes.resize(2 * queries.size());
  out.replaced_tail.resize(2 * queries.size());
  const auto n = model.num_entities();

  auto work = [&](std::size_t begin, std::size_t end) {
    Scorer<Real> scorer(model);
    std::vector<Real> scores(n);
    for (std::size_t q = begin; q < end; ++q) {
      const auto& t = queries[q];
      for (int side = 0; side < 2; ++side) {
        const bool replace_tail = side == 0;
        const auto truth = replace_tail ? t.tail : t.head;
        if (replace_tail) {
          scorer.score_candidates(t.head, t.relation, true, scores);
        } else {
          scorer.score_candidates(t.tail, t.relation, false, scores);
        }
        const Real target = scores[truth];
        std::uint64_t greater = 0, equal = 0;
        for (std::size_t e = 0; e < n; ++e) {
          greater += scores[e] > target;
          equal += scores[e] == target;
        }
        --equal;  // the true entity itself
        std::uint64_t removed = 0;
        if (options.filtered) {
          const auto others = replace_tail ? known.tails(t.head, t.relation)
                                           : known.heads(t.relation, t.tail);
          for (auto e : others) {
            if (e == truth) continue;
            ++removed;
            greater -= scores[e] > target;
            equal -= scores[e] == target;
          }
        }
        const auto slot = 2 * q + side;
        out.ranks[slot] = detail::apply_tie_rule(greater, equal, options.tie_rule);
        out.candidate_sizes[slot] = n - removed;
        out.replaced_tail[slot] = replace_tail ? 1 : 0;
      }
    }
  };

  const auto threads = std::max<std::size_t>(1, std::min(options.num_threads, queries.size()));
  if (threads == 1) {
    work(0, queries.size());
  } else {
    std::vector<std::thread> pool;
    const auto chunk = (queries.size() + threads - 1) / threads;
    for (std::size_t i = 0; i < threads; ++i) {
      const auto b = i * chunk;
      const auto e = std::min(queries.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

template <typename Real>
QueryRanks rank_queries(const EmbeddingModel<Real>& model, const TripleStore& store,
                        Split split, const RankOptions& options = {}) {
  const KnownTriples known(store);
  const auto queries = store.split_triples(split);
  return rank_queries(model, known, queries, options);
}

inline double hits_at_n(std::span<const double> ranks, std::size_t n) {
  if (n < 1) throw Error(ErrorCode::kConfig, "HITS@N needs N >= 1");
  if (ranks.empty()) throw Error(ErrorCode::kUndefinedMetric, "HITS@N of no ranks");
  std::size_t hits = 0;
  for (double r : ranks) hits += r <= static_cast<double>(n);
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

// Adjusted mean rank index: 1 - 2 * sum(rank - 1) / sum(|S| - 1).
// 1 is perfect, 0 matches random scoring, -1 is worst.
inline double amri(std::span<const double> ranks, std::span<const std::uint64_t> sizes) {
  if (ranks.size() != sizes.size()) throw Error(ErrorCode::kShape, "ranks/sizes length mismatch");
  if (ranks.empty()) throw Error(ErrorCode::kUndefinedMetric, "AMRI of no ranks");
  double num = 0, den = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    num += ranks[i] - 1.0;
    den += static_cast<double>(sizes[i]) - 1.0;
  }
  if (den == 0) return 1.0;
  return 1.0 - 2.0 * num / den;
}

// The unadjusted ratio 2 * sum(rank - 1) / sum(|S|), kept for auditing.
inline double amri_raw(std::span<const double> ranks, std::span<const std::uint64_t> sizes) {
  if (ranks.size() != sizes.size()) throw Error(ErrorCode::kShape, "ranks/sizes length mismatch");
  if (ranks.empty()) throw Error(ErrorCode::kUndefinedMetric, "AMRI of no ranks");
  double num = 0, den = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    num += ranks[i] - 1.0;
    den += static_cast<double>(sizes[i]);
  }
  return 2.0 * num / den;
}

// Population standard deviation.
inline double rank_stddev(std::span<const double> ranks) {
  if (ranks.empty()) throw Error(ErrorCode::kUndefinedMetric, "stddev of no ranks");
  double mean = 0;
  for (double r : ranks) mean += r;
  mean /= static_cast<double>(ranks.size());
  double acc = 0;
  for (double r : ranks) acc += (r - mean) * (r - mean);
  return std::sqrt(acc / static_cast<double>(ranks.size()));
}

inline double mean_rank(std::span<const double> ranks) {
  if (ranks.empty()) throw Error(ErrorCode::kUndefinedMetric, "mean rank of no ranks");
  double s = 0;
  for (double r : ranks) s += r;
  return s / static_cast<double>(ranks.size());
}

inline double mean_reciprocal_rank(std::span<const double> ranks) {
  if (ranks.empty()) throw Error(ErrorCode::kUndefinedMetric, "MRR of no ranks");
  double s = 0;
  for (double r : ranks) s += 1.0 / r;
  return s / static_cast<double>(ranks.size());
}

inline constexpr std::size_t kReportedHits[] = {1, 5, 10};

struct SideMetrics {
  std::map<std::size_t, double> hits;
  double amri = 0;
};

struct RankingReport {
  std::vector<double> ranks;
  std::vector<std::uint64_t> candidate_sizes;
  std::map<std::size_t, double> hits;
  double amri = 0;
  double amri_raw = 0;
  double rank_stddev = 0;
  double mean_rank = 0;
  double mrr = 0;
  double eval_seconds = 0;
  bool filtered = true;
  SideMetrics head_side;  // queries replacing the head
  SideMetrics tail_side;  // queries replacing the tail
};

struct EvalOptions {
  RankOptions rank;
  // Evaluate at most this many triples of the split (0 = all), chosen by a
  // seeded shuffle.
  std::size_t max_triples = 0;
  std::uint64_t sample_seed = 0;
};

inline RankingReport summarize(QueryRanks ranks, bool filtered) {
  RankingReport report;
  report.filtered = filtered;
  for (auto n : kReportedHits) report.hits[n] = hits_at_n(ranks.ranks, n);
  report.amri = amri(ranks.ranks, ranks.candidate_sizes);
  report.amri_raw = amri_raw(ranks.ranks, ranks.candidate_sizes);
  report.rank_stddev = rank_stddev(ranks.ranks);
  report.mean_rank = mean_rank(ranks.ranks);
  report.mrr = mean_reciprocal_rank(ranks.ranks);
  for (int side = 0; side < 2; ++side) {
    std::vector<double> r;
    std::vector<std::uint64_t> s;
    for (std::size_t i = 0; i < ranks.ranks.size(); ++i) {
      if (ranks.replaced_tail[i] == (side == 1 ? 1 : 0)) {
        r.push_back(ranks.ranks[i]);
        s.push_back(ranks.candidate_sizes[i]);
      }
    }
    if (r.empty()) continue;
    auto& m = side == 1 ? report.tail_side : report.head_side;
    for (auto n : kReportedHits) m.hits[n] = hits_at_n(r, n);
    m.amri = amri(r, s);
  }
  report.ranks = std::move(ranks.ranks);
  report.candidate_sizes = std::move(ranks.candidate_sizes);
  return report;
}

inline std::vector<Triple> sample_triples(std::vector<Triple> triples, std::size_t max_triples,
                                          std::uint64_t seed) {
  if (max_triples == 0 || triples.size() <= max_triples) return triples;
  Rng rng(seed);
  rng.shuffle(std::span<Triple>(triples));
  triples.resize(max_triples);
  return triples;
}

template <typename Real>
RankingReport evaluate(const EmbeddingModel<Real>& model, const KnownTriples& known,
                       std::span<const Triple> queries, const EvalOptions& options = {}) {
  Stopwatch watch;
  auto ranks = rank_queries(model, known, queries, options.rank);
  auto report = summarize(std::move(ranks), options.rank.filtered);
  report.eval_seconds = watch.seconds();
  return report;
}

template <typename Real>
RankingReport evaluate(const EmbeddingModel<Real>& model, const TripleStore& store, Split split,
                       const EvalOptions& options = {}) {
  const KnownTriples known(store);
  const auto queries =
      sample_triples(store.split_triples(split), options.max_triples, options.sample_seed);
  return evaluate(model, known, queries, options);
}

inline void write_report_kv(const RankingReport& r, std::ostream& out) {
  const auto old_precision = out.precision(10);
  out << "queries = " << r.ranks.size() << '\n';
  out << "filtered = " << (r.filtered ? "true" : "false") << '\n';
  for (const auto& [n, v] : r.hits) out << "hits@" << n << " = " << v << '\n';
  out << "amri = " << r.amri << '\n';
  out << "amri_raw = " << r.amri_raw << '\n';
  out << "rank_stddev = " << r.rank_stddev << '\n';
  out << "mean_rank = " << r.mean_rank << '\n';
  out << "mrr = " << r.mrr << '\n';
  for (const auto& [n, v] : r.head_side.hits) out << "head.hits@" << n << " = " << v << '\n';
  for (const auto& [n, v] : r.tail_side.hits) out << "tail.hits@" << n << " = " << v << '\n';
  out << "eval_seconds = " << r.eval_seconds << '\n';
  out.precision(old_precision);
}

inline void write_report_csv(const RankingReport& r, std::ostream& out) {
  const auto old_precision = out.precision(17);
  out << "metric,value\n";
  for (const auto& [n, v] : r.hits) out << "hits@" << n << ',' << v << '\n';
  out << "amri," << r.amri << '\n';
  out << "amri_raw," << r.amri_raw << '\n';
  out << "rank_stddev," << r.rank_stddev << '\n';
  out << "mean_rank," << r.mean_rank << '\n';
  out << "mrr," << r.mrr << '\n';
  out << "eval_seconds," << r.eval_seconds << '\n';
  out.precision(old_precision);
}

inline void write_ranks_csv(const RankingReport& r, std::ostream& out) {
  out << "query,rank,candidates\n";
  for (std::size_t i = 0; i < r.ranks.size(); ++i) {
    out << i << ',' << r.ranks[i] << ',' << r.candidate_sizes[i] << '\n';
  }
}

}  // namespace kgedge

#endif  // KGEDGE_EVALUATOR_HPP_
