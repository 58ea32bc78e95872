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

#ifndef KGEDGE_TRIPLE_STORE_HPP_
#define KGEDGE_TRIPLE_STORE_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgedge/common.hpp"

namespace kgedge {

struct Triple {
  std::uint32_t head = 0;
  std::uint32_t relation = 0;
  std::uint32_t tail = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t key = (static_cast<std::uint64_t>(t.head) << 32) | t.tail;
    key ^= static_cast<std::uint64_t>(t.relation) * 0x9E3779B97F4A7C15ULL;
    key ^= key >> 31;
    key *= 0xBF58476D1CE4E5B9ULL;
    key ^= key >> 29;
    return static_cast<std::size_t>(key);
  }
};

using TripleSet = std::unordered_set<Triple, TripleHash>;

// Dense bijection between labels and ids, ids assigned in first-seen order.
class Dictionary {
 public:
  std::uint32_t intern(std::string_view label) {
    auto it = forward_.find(std::string(label));
    if (it != forward_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(reverse_.size());
    reverse_.emplace_back(label);
    forward_.emplace(reverse_.back(), id);
    return id;
  }

  std::optional<std::uint32_t> find(std::string_view label) const {
    auto it = forward_.find(std::string(label));
    if (it == forward_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& label(std::uint32_t id) const {
    if (id >= reverse_.size()) {
      throw Error(ErrorCode::kIndex, "dictionary id " + std::to_string(id) +
                                         " out of range " +
                                         std::to_string(reverse_.size()));
    }
    return reverse_[id];
  }

  std::size_t size() const { return reverse_.size(); }
  const std::vector<std::string>& labels() const { return reverse_; }

  friend bool operator==(const Dictionary& a, const Dictionary& b) {
    return a.reverse_ == b.reverse_;
  }

 private:
  std::unordered_map<std::string, std::uint32_t> forward_;
  std::vector<std::string> reverse_;
};

enum class Split { kTrain, kValid, kTest };

inline std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

struct SplitRatio {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

// Integer-encoded facts plus the dictionaries and partition that give them
// meaning. Split vectors hold indices into `triples`.
struct TripleStore {
  std::vector<Triple> triples;
  Dictionary entities;
  Dictionary relations;
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;

  std::size_t num_entities() const { return entities.size(); }
  std::size_t num_relations() const { return relations.size(); }
  bool empty() const { return triples.empty(); }

  const std::vector<std::size_t>& indices(Split split) const {
    switch (split) {
      case Split::kTrain: return train;
      case Split::kValid: return valid;
      case Split::kTest: return test;
    }
    return train;
  }

  std::vector<Triple> split_triples(Split split) const {
    const auto& idx = indices(split);
    std::vector<Triple> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(triples[i]);
    return out;
  }

  TripleSet triple_set() const {
    return TripleSet(triples.begin(), triples.end());
  }

  // Assigns every triple to the train split.
  void reset_splits() {
    train.resize(triples.size());
    std::iota(train.begin(), train.end(), std::size_t{0});
    valid.clear();
    test.clear();
  }

  friend bool operator==(const TripleStore&, const TripleStore&) = default;
};

// Builds a store from labeled facts, collapsing duplicates and keeping
// first-occurrence order for both triples and dictionary ids.
class TripleStoreBuilder {
 public:
  // Returns false when the triple was a duplicate.
  bool add(std::string_view head, std::string_view relation,
           std::string_view tail) {
    const Triple t{store_.entities.intern(head),
                   store_.relations.intern(relation),
                   store_.entities.intern(tail)};
    if (!seen_.insert(t).second) return false;
    store_.triples.push_back(t);
    return true;
  }

  std::size_t size() const { return store_.triples.size(); }

  TripleStore finish() && {
    store_.reset_splits();
    return std::move(store_);
  }

 private:
  TripleStore store_;
  TripleSet seen_;
};

struct IngestOptions {
  char delimiter = '\t';
  char comment = '#';
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line,
                                                  char delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

inline std::string csv_field(std::string_view value) {
  const bool needs_quotes =
      value.empty() || value.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs_quotes) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// Parses one CSV record; quoted fields may span lines.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields,
                            std::size_t& line_no) {
  fields.clear();
  std::string line;
  if (!std::getline(in, line)) return false;
  ++line_no;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  std::size_t i = 0;
  while (true) {
    if (i == line.size()) {
      if (quoted) {
        field += '\n';
        if (!std::getline(in, line)) {
          throw ParseError(line_no, "unterminated quoted field");
        }
        ++line_no;
        i = 0;
        continue;
      }
      if (!was_quoted && !field.empty() && field.back() == '\r') field.pop_back();
      fields.push_back(std::move(field));
      return true;
    }
    const char c = line[i++];
    if (quoted) {
      if (c == '"') {
        if (i < line.size() && line[i] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else {
      field += c;
    }
  }
}

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  return out;
}

inline std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for reading");
  return in;
}

}  // namespace detail

inline TripleStore ingest(std::istream& in, const IngestOptions& options = {}) {
  TripleStoreBuilder builder;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == options.comment) continue;
    const auto fields = detail::split_fields(line, options.delimiter);
    if (fields.size() != 3) {
      throw ParseError(line_no, "expected 3 fields, found " +
                                    std::to_string(fields.size()));
    }
    builder.add(fields[0], fields[1], fields[2]);
  }
  if (builder.size() == 0) {
    throw Error(ErrorCode::kEmptyStore, "input contains no triples");
  }
  return std::move(builder).finish();
}

inline TripleStore ingest(const std::string& path,
                          const IngestOptions& options = {}) {
  auto in = detail::open_for_read(path);
  return ingest(in, options);
}

// Writes labeled triples in ingest format. Labels containing the delimiter
// or a line break cannot be represented and are rejected.
inline void write_tsv(const TripleStore& store, std::span<const std::size_t> indices,
                      std::ostream& out) {
  auto check = [](const std::string& label,
                  bool leading = false) -> const std::string& {
    if (label.find_first_of("\t\r\n") != std::string::npos ||
        (leading && !label.empty() && label.front() == '#')) {
      throw Error(ErrorCode::kFormat,
                  "label '" + label + "' cannot be written as TSV");
    }
    return label;
  };
  for (auto i : indices) {
    const auto& t = store.triples[i];
    out << check(store.entities.label(t.head), true) << '\t'
        << check(store.relations.label(t.relation)) << '\t'
        << check(store.entities.label(t.tail)) << '\n';
  }
}

inline void write_tsv(const TripleStore& store, const std::string& path) {
  std::vector<std::size_t> all(store.triples.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto out = detail::open_for_write(path);
  write_tsv(store, all, out);
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

// Joint-key entity resolution input. `rows` maps an entity label to its
// attribute values in `schema` order; nullopt marks a missing value.
struct AttributeTable {
  std::vector<std::string> schema;
  std::unordered_map<std::string, std::vector<std::optional<std::string>>> rows;
};

struct FusionKey {
  std::vector<std::string> attributes;
};

// Merges entities whose key attributes are all present and jointly equal.
// Each group collapses onto its lowest id, duplicate triples produced by the
// merge are dropped (first occurrence wins, including its split), and entity
// ids are re-densified preserving relative order.
inline TripleStore fuse_entities(const TripleStore& store, const FusionKey& key,
                                 const AttributeTable& table) {
  if (key.attributes.empty()) {
    throw Error(ErrorCode::kSchema, "fusion key has no attributes");
  }
  std::vector<std::size_t> columns;
  for (const auto& attribute : key.attributes) {
    auto it = std::find(table.schema.begin(), table.schema.end(), attribute);
    if (it == table.schema.end()) {
      throw Error(ErrorCode::kSchema,
                  "key attribute '" + attribute + "' not in attribute schema");
    }
    columns.push_back(static_cast<std::size_t>(it - table.schema.begin()));
  }

  const auto n = store.num_entities();
  std::vector<std::uint32_t> representative(n);
  std::map<std::vector<std::string>, std::uint32_t> first_with_key;
  for (std::uint32_t e = 0; e < n; ++e) {
    representative[e] = e;
    const auto& label = store.entities.label(e);
    auto row = table.rows.find(label);
    if (row == table.rows.end()) {
      throw Error(ErrorCode::kSchema,
                  "entity '" + label + "' missing from attribute table");
    }
    if (row->second.size() != table.schema.size()) {
      throw Error(ErrorCode::kSchema,
                  "attribute row for '" + label + "' does not match schema");
    }
    std::vector<std::string> values;
    bool complete = true;
    for (auto c : columns) {
      if (!row->second[c]) {
        complete = false;
        break;
      }
      values.push_back(*row->second[c]);
    }
    if (!complete) continue;
    auto [it, inserted] = first_with_key.emplace(std::move(values), e);
    if (!inserted) representative[e] = it->second;
  }

  std::vector<std::uint32_t> dense(n, 0);
  TripleStore out;
  for (std::uint32_t e = 0; e < n; ++e) {
    if (representative[e] == e) {
      dense[e] = out.entities.intern(store.entities.label(e));
    }
  }
  out.relations = store.relations;

  std::vector<int> split_of(store.triples.size(), 0);
  for (auto i : store.valid) split_of[i] = 1;
  for (auto i : store.test) split_of[i] = 2;

  TripleSet seen;
  for (std::size_t i = 0; i < store.triples.size(); ++i) {
    const auto& t = store.triples[i];
    const Triple fused{dense[representative[t.head]], t.relation,
                       dense[representative[t.tail]]};
    if (!seen.insert(fused).second) continue;
    const auto index = out.triples.size();
    out.triples.push_back(fused);
    switch (split_of[i]) {
      case 0: out.train.push_back(index); break;
      case 1: out.valid.push_back(index); break;
      default: out.test.push_back(index); break;
    }
  }
  return out;
}

// Seeded Fisher-Yates shuffle followed by a contiguous train/valid/test cut.
inline TripleStore split(const TripleStore& store, const SplitRatio& ratio,
                         std::uint64_t seed) {
  const double parts[] = {ratio.train, ratio.valid, ratio.test};
  for (double p : parts) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorCode::kConfig, "split proportions must be non-negative");
    }
  }
  if (std::abs(ratio.train + ratio.valid + ratio.test - 1.0) > 1e-9) {
    throw Error(ErrorCode::kConfig, "split proportions must sum to 1");
  }
  const auto n = store.triples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  auto n_train = static_cast<std::size_t>(std::llround(ratio.train * n));
  auto n_valid = static_cast<std::size_t>(std::llround(ratio.valid * n));
  n_train = std::min(n_train, n);
  n_valid = std::min(n_valid, n - n_train);

  TripleStore out = store;
  out.train.assign(order.begin(), order.begin() + n_train);
  out.valid.assign(order.begin() + n_train, order.begin() + n_train + n_valid);
  out.test.assign(order.begin() + n_train + n_valid, order.end());
  return out;
}

// Neutral node/edge CSV export for external graph viewers.
inline void export_graph(const TripleStore& store, const std::string& nodes_path,
                         const std::string& edges_path) {
  if (store.empty()) {
    throw Error(ErrorCode::kEmptyStore, "nothing to export");
  }
  auto nodes = detail::open_for_write(nodes_path);
  nodes << "id,label\n";
  for (std::uint32_t e = 0; e < store.num_entities(); ++e) {
    nodes << e << ',' << detail::csv_field(store.entities.label(e)) << '\n';
  }
  auto edges = detail::open_for_write(edges_path);
  edges << "head,relation,tail\n";
  for (const auto& t : store.triples) {
    edges << t.head << ',' << detail::csv_field(store.relations.label(t.relation))
          << ',' << t.tail << '\n';
  }
  if (!nodes || !edges) throw Error(ErrorCode::kIo, "graph export write failed");
}

// Reads back an export_graph pair. All triples land in the train split.
inline TripleStore ingest_graph(const std::string& nodes_path,
                                const std::string& edges_path) {
  auto nodes = detail::open_for_read(nodes_path);
  std::vector<std::string> fields;
  std::size_t line_no = 0;
  std::vector<std::string> labels;
  if (!detail::read_csv_record(nodes, fields, line_no) ||
      fields != std::vector<std::string>{"id", "label"}) {
    throw ParseError(line_no, "node file must start with 'id,label'");
  }
  while (detail::read_csv_record(nodes, fields, line_no)) {
    if (fields.size() != 2 || fields[0] != std::to_string(labels.size())) {
      throw ParseError(line_no, "expected dense node id " +
                                    std::to_string(labels.size()));
    }
    labels.push_back(fields[1]);
  }

  auto edges = detail::open_for_read(edges_path);
  line_no = 0;
  if (!detail::read_csv_record(edges, fields, line_no) ||
      fields != std::vector<std::string>{"head", "relation", "tail"}) {
    throw ParseError(line_no, "edge file must start with 'head,relation,tail'");
  }
  auto entity_label = [&](const std::string& field) -> const std::string& {
    std::size_t consumed = 0;
    unsigned long id = 0;
    try {
      id = std::stoul(field, &consumed);
    } catch (const std::exception&) {
      consumed = 0;
    }
    if (consumed != field.size() || field.empty() || id >= labels.size()) {
      throw ParseError(line_no, "bad entity id '" + field + "'");
    }
    return labels[id];
  };
  TripleStoreBuilder builder;
  while (detail::read_csv_record(edges, fields, line_no)) {
    if (fields.size() != 3) throw ParseError(line_no, "expected 3 fields");
    builder.add(entity_label(fields[0]), fields[1], entity_label(fields[2]));
  }
  if (builder.size() == 0) {
    throw Error(ErrorCode::kEmptyStore, "edge file contains no triples");
  }
  return std::move(builder).finish();
}

// A split directory holds train.tsv, valid.tsv and test.tsv. Reading them in
// that order reproduces the dictionaries of the store that wrote them.
inline void write_split_dir(const TripleStore& store, const std::string& dir) {
  for (Split s : {Split::kTrain, Split::kValid, Split::kTest}) {
    const auto path = dir + "/" + std::string(split_name(s)) + ".tsv";
    auto out = detail::open_for_write(path);
    write_tsv(store, store.indices(s), out);
    if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
  }
}

inline TripleStore read_split_dir(const std::string& dir,
                                  const IngestOptions& options = {}) {
  TripleStore out;
  TripleSet seen;
  for (Split s : {Split::kTrain, Split::kValid, Split::kTest}) {
    const auto path = dir + "/" + std::string(split_name(s)) + ".tsv";
    auto in = detail::open_for_read(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == options.comment) continue;
      const auto fields = detail::split_fields(line, options.delimiter);
      if (fields.size() != 3) {
        throw ParseError(line_no, path + ": expected 3 fields");
      }
      const Triple t{out.entities.intern(fields[0]),
                     out.relations.intern(fields[1]),
                     out.entities.intern(fields[2])};
      if (!seen.insert(t).second) continue;
      const auto index = out.triples.size();
      out.triples.push_back(t);
      switch (s) {
        case Split::kTrain: out.train.push_back(index); break;
        case Split::kValid: out.valid.push_back(index); break;
        case Split::kTest: out.test.push_back(index); break;
      }
    }
  }
  if (out.empty()) throw Error(ErrorCode::kEmptyStore, dir + " has no triples");
  return out;
}

}  // namespace kgedge

#endif  // KGEDGE_TRIPLE_STORE_HPP_
