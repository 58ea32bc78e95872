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

#ifndef KGEDGE_MODELS_HPP_
#define KGEDGE_MODELS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgedge/common.hpp"
#include "kgedge/triple_store.hpp"

namespace kgedge {

enum class ModelKind : std::uint32_t {
  kTransE = 0,
  kTransR = 1,
  kDistMult = 2,
  kComplEx = 3,
  kHolE = 4,
  kRotatE = 5,
  kPairRE = 6,
};

inline constexpr std::array<ModelKind, 7> kAllModelKinds = {
    ModelKind::kTransE,  ModelKind::kTransR, ModelKind::kDistMult,
    ModelKind::kComplEx, ModelKind::kHolE,   ModelKind::kRotatE,
    ModelKind::kPairRE};

enum class NormKind : std::uint32_t { kL1 = 1, kL2 = 2 };

inline std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kTransE: return "TransE";
    case ModelKind::kTransR: return "TransR";
    case ModelKind::kDistMult: return "DistMult";
    case ModelKind::kComplEx: return "ComplEx";
    case ModelKind::kHolE: return "HolE";
    case ModelKind::kRotatE: return "RotatE";
    case ModelKind::kPairRE: return "PairRE";
  }
  return "?";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view name) {
  for (auto kind : kAllModelKinds) {
    std::string lower(model_kind_name(kind));
    std::string query(name);
    for (auto& c : lower) c = static_cast<char>(std::tolower(c));
    for (auto& c : query) c = static_cast<char>(std::tolower(c));
    if (lower == query) return kind;
  }
  return std::nullopt;
}

inline bool is_distance_model(ModelKind kind) {
  return kind == ModelKind::kTransE || kind == ModelKind::kTransR ||
         kind == ModelKind::kRotatE || kind == ModelKind::kPairRE;
}

inline NormKind default_norm(ModelKind kind) {
  return kind == ModelKind::kTransR ? NormKind::kL2 : NormKind::kL1;
}

inline std::size_t entity_width(ModelKind kind, std::size_t dim) {
  return (kind == ModelKind::kComplEx || kind == ModelKind::kRotatE) ? 2 * dim : dim;
}

inline std::size_t relation_width(ModelKind kind, std::size_t dim) {
  return (kind == ModelKind::kComplEx || kind == ModelKind::kPairRE) ? 2 * dim : dim;
}

template <typename Real>
struct ParameterTable {
  std::size_t rows = 0;
  std::size_t width = 0;
  std::vector<Real> values;

  ParameterTable() = default;
  ParameterTable(std::size_t r, std::size_t w) : rows(r), width(w), values(r * w) {}

  std::span<Real> row(std::size_t r) { return {values.data() + r * width, width}; }
  std::span<const Real> row(std::size_t r) const {
    return {values.data() + r * width, width};
  }
  std::size_t size() const { return values.size(); }

  friend bool operator==(const ParameterTable&, const ParameterTable&) = default;
};

enum TableId : std::size_t { kEntityTable = 0, kRelationTable = 1, kProjectionTable = 2 };
inline constexpr std::size_t kNumTables = 3;

template <typename Real>
struct EmbeddingModel {
  ModelKind kind = ModelKind::kTransE;
  std::size_t dim = 0;
  NormKind norm = NormKind::kL1;
  ParameterTable<Real> entities;
  ParameterTable<Real> relations;
  ParameterTable<Real> projections;  // TransR only, dim x dim row-major per relation
  bool masked = false;

  std::size_t num_entities() const { return entities.rows; }
  std::size_t num_relations() const { return relations.rows; }

  std::array<ParameterTable<Real>*, kNumTables> tables() {
    return {&entities, &relations, &projections};
  }
  std::array<const ParameterTable<Real>*, kNumTables> tables() const {
    return {&entities, &relations, &projections};
  }

  std::size_t parameter_count() const {
    return entities.size() + relations.size() + projections.size();
  }

  friend bool operator==(const EmbeddingModel&, const EmbeddingModel&) = default;
};

template <typename Real>
EmbeddingModel<Real> init_model(ModelKind kind, std::size_t dim,
                                std::size_t num_entities, std::size_t num_relations,
                                std::uint64_t seed,
                                std::optional<NormKind> norm = std::nullopt) {
  if (dim == 0 || num_entities == 0 || num_relations == 0) {
    throw Error(ErrorCode::kConfig, "dim and table sizes must be positive");
  }
  EmbeddingModel<Real> m;
  m.kind = kind;
  m.dim = dim;
  m.norm = norm.value_or(default_norm(kind));
  m.entities = ParameterTable<Real>(num_entities, entity_width(kind, dim));
  m.relations = ParameterTable<Real>(num_relations, relation_width(kind, dim));

  Rng rng(seed);
  const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
  for (auto& v : m.entities.values) v = static_cast<Real>(rng.uniform(-bound, bound));
  if (kind == ModelKind::kRotatE) {
    constexpr double pi = std::numbers::pi;
    // pi - 2pi*u with u in [0, 1) lies in (-pi, pi].
    for (auto& v : m.relations.values) {
      v = static_cast<Real>(pi - 2.0 * pi * rng.uniform01());
    }
  } else {
    for (auto& v : m.relations.values) v = static_cast<Real>(rng.uniform(-bound, bound));
  }
  if (kind == ModelKind::kTransR) {
    m.projections = ParameterTable<Real>(num_relations, dim * dim);
    for (std::size_t r = 0; r < num_relations; ++r) {
      auto mat = m.projections.row(r);
      for (std::size_t i = 0; i < dim; ++i) mat[i * dim + i] = Real(1);
    }
  }
  return m;
}

// Row-sparse gradient for one parameter table. Rows are kept in first-touch
// order; `slot_of_row` maps a row to its offset in `values` or -1.
template <typename Real>
class SparseRowGrad {
 public:
  SparseRowGrad() = default;
  SparseRowGrad(std::size_t num_rows, std::size_t width)
      : width_(width), slot_of_row_(num_rows, -1) {}

  std::span<Real> row(std::uint32_t r) {
    auto& slot = slot_of_row_[r];
    if (slot < 0) {
      slot = static_cast<std::int64_t>(rows_.size());
      rows_.push_back(r);
      values_.resize(values_.size() + width_, Real(0));
    }
    return {values_.data() + static_cast<std::size_t>(slot) * width_, width_};
  }

  std::span<const Real> find(std::uint32_t r) const {
    if (r >= slot_of_row_.size() || slot_of_row_[r] < 0) return {};
    return {values_.data() + static_cast<std::size_t>(slot_of_row_[r]) * width_, width_};
  }

  std::span<Real> slot(std::size_t i) { return {values_.data() + i * width_, width_}; }
  std::span<const Real> slot(std::size_t i) const {
    return {values_.data() + i * width_, width_};
  }

  const std::vector<std::uint32_t>& rows() const { return rows_; }
  std::size_t width() const { return width_; }
  std::size_t num_rows() const { return slot_of_row_.size(); }

  void clear() {
    for (auto r : rows_) slot_of_row_[r] = -1;
    rows_.clear();
    values_.clear();
  }

  // Adds `other` row by row, touching rows in `other`'s order.
  void add(const SparseRowGrad& other) {
    for (std::size_t i = 0; i < other.rows_.size(); ++i) {
      auto dst = row(other.rows_[i]);
      auto src = other.slot(i);
      for (std::size_t k = 0; k < width_; ++k) dst[k] += src[k];
    }
  }

 private:
  std::size_t width_ = 0;
  std::vector<std::int64_t> slot_of_row_;
  std::vector<std::uint32_t> rows_;
  std::vector<Real> values_;
};

template <typename Real>
struct ModelGradient {
  std::array<SparseRowGrad<Real>, kNumTables> tables;

  ModelGradient() = default;
  explicit ModelGradient(const EmbeddingModel<Real>& model) {
    auto src = model.tables();
    for (std::size_t i = 0; i < kNumTables; ++i) {
      tables[i] = SparseRowGrad<Real>(src[i]->rows, src[i]->width);
    }
  }

  void clear() {
    for (auto& t : tables) t.clear();
  }
  void add(const ModelGradient& other) {
    for (std::size_t i = 0; i < kNumTables; ++i) tables[i].add(other.tables[i]);
  }
  std::size_t touched_rows() const {
    std::size_t n = 0;
    for (const auto& t : tables) n += t.rows().size();
    return n;
  }
};

namespace detail {

template <typename Real>
using ConstRow = std::span<const Real>;
template <typename Real>
using MutRow = std::span<Real>;

// s = -norm(diff); writes ds/d(diff) into g when g is non-empty.
template <typename Real>
Real negated_norm(std::span<const Real> diff, NormKind norm, std::span<Real> g) {
  if (norm == NormKind::kL1) {
    Real sum = 0;
    for (auto v : diff) sum += std::abs(v);
    if (!g.empty()) {
      for (std::size_t i = 0; i < diff.size(); ++i) {
        g[i] = diff[i] > 0 ? Real(-1) : (diff[i] < 0 ? Real(1) : Real(0));
      }
    }
    return -sum;
  }
  Real sq = 0;
  for (auto v : diff) sq += v * v;
  const Real n = std::sqrt(sq);
  if (!g.empty()) {
    for (std::size_t i = 0; i < diff.size(); ++i) g[i] = n > 0 ? -diff[i] / n : Real(0);
  }
  return -n;
}

// Complex-modulus norms over interleaved (re, im) pairs: L1 is the sum of
// moduli, L2 the Euclidean norm of the whole vector.
template <typename Real>
Real negated_complex_norm(std::span<const Real> diff, NormKind norm, std::span<Real> g) {
  if (norm == NormKind::kL2) return negated_norm<Real>(diff, norm, g);
  Real sum = 0;
  const auto d = diff.size() / 2;
  for (std::size_t k = 0; k < d; ++k) {
    const Real re = diff[2 * k];
    const Real im = diff[2 * k + 1];
    const Real mod = std::sqrt(re * re + im * im);
    sum += mod;
    if (!g.empty()) {
      g[2 * k] = mod > 0 ? -re / mod : Real(0);
      g[2 * k + 1] = mod > 0 ? -im / mod : Real(0);
    }
  }
  return -sum;
}

template <typename Real>
Real l2_norm(std::span<const Real> v) {
  Real sq = 0;
  for (auto x : v) sq += x * x;
  return std::sqrt(sq);
}

}  // namespace detail

// Relation parameters in the form the kernels consume. RotatE phases become
// (cos, sin) pairs so candidate scans do not recompute trig per entity.
template <typename Real>
struct PreparedRelation {
  std::vector<Real> values;
  std::span<const Real> projection;  // TransR only
};

// Scratch space reused across kernel calls.
template <typename Real>
struct KernelScratch {
  std::vector<Real> a, b, c, g;
  void ensure(std::size_t n) {
    if (a.size() < n) {
      a.resize(n);
      b.resize(n);
      c.resize(n);
      g.resize(n);
    }
  }
};

template <typename Real>
class Scorer {
 public:
  // Prepared relations are cached, so a Scorer must not outlive a mutation
  // of the model it reads.
  explicit Scorer(const EmbeddingModel<Real>& model)
      : model_(model), cache_(model.num_relations()), cached_(model.num_relations(), 0) {
    scratch_.ensure(4 * model.dim + 4);
  }

  const EmbeddingModel<Real>& model() const { return model_; }

  void check(const Triple& t) const {
    if (t.head >= model_.num_entities() || t.tail >= model_.num_entities() ||
        t.relation >= model_.num_relations()) {
      throw Error(ErrorCode::kIndex,
                  "triple (" + std::to_string(t.head) + ", " +
                      std::to_string(t.relation) + ", " + std::to_string(t.tail) +
                      ") outside model tables (" +
                      std::to_string(model_.num_entities()) + " entities, " +
                      std::to_string(model_.num_relations()) + " relations)");
    }
  }

  void prepare(std::uint32_t relation, PreparedRelation<Real>& out) const {
    const auto r = model_.relations.row(relation);
    out.values.assign(r.begin(), r.end());
    if (model_.kind == ModelKind::kRotatE) {
      out.values.resize(2 * model_.dim);
      for (std::size_t k = 0; k < model_.dim; ++k) {
        out.values[2 * k] = std::cos(r[k]);
        out.values[2 * k + 1] = std::sin(r[k]);
      }
    }
    if (model_.kind == ModelKind::kTransR) {
      out.projection = model_.projections.row(relation);
    } else {
      out.projection = {};
    }
  }

  const PreparedRelation<Real>& prepared(std::uint32_t relation) {
    if (!cached_[relation]) {
      prepare(relation, cache_[relation]);
      cached_[relation] = 1;
    }
    return cache_[relation];
  }

  // Score of (h, r, t) given embedding rows and a prepared relation.
  Real kernel(std::span<const Real> h, const PreparedRelation<Real>& rel,
              std::span<const Real> t) {
    const auto d = model_.dim;
    const auto& r = rel.values;
    auto& s = scratch_;
    switch (model_.kind) {
      case ModelKind::kTransE: {
        for (std::size_t i = 0; i < d; ++i) s.a[i] = h[i] + r[i] - t[i];
        return detail::negated_norm<Real>({s.a.data(), d}, model_.norm, {});
      }
      case ModelKind::kTransR: {
        const auto& m = rel.projection;
        for (std::size_t i = 0; i < d; ++i) s.b[i] = h[i] - t[i];
        for (std::size_t i = 0; i < d; ++i) {
          Real acc = r[i];
          for (std::size_t j = 0; j < d; ++j) acc += m[i * d + j] * s.b[j];
          s.a[i] = acc;
        }
        return detail::negated_norm<Real>({s.a.data(), d}, model_.norm, {});
      }
      case ModelKind::kDistMult: {
        // h * t first so swapping head and tail is exact.
        Real acc = 0;
        for (std::size_t i = 0; i < d; ++i) acc += r[i] * (h[i] * t[i]);
        return acc;
      }
      case ModelKind::kComplEx: {
        Real acc = 0;
        for (std::size_t k = 0; k < d; ++k) {
          const Real hr = h[2 * k], hi = h[2 * k + 1];
          const Real rr = r[2 * k], ri = r[2 * k + 1];
          const Real tr = t[2 * k], ti = t[2 * k + 1];
          acc += (hr * rr - hi * ri) * tr + (hr * ri + hi * rr) * ti;
        }
        return acc;
      }
      case ModelKind::kHolE: {
        Real acc = 0;
        for (std::size_t k = 0; k < d; ++k) {
          Real corr = 0;
          for (std::size_t i = 0; i < d; ++i) corr += h[i] * t[(i + k) % d];
          acc += r[k] * corr;
        }
        return acc;
      }
      case ModelKind::kRotatE: {
        // Eight interleaved partial sums keep the hot loop vectorizable
        // while fixing the summation order.
        Real part[8] = {};
        const bool l1 = model_.norm == NormKind::kL1;
        std::size_t k = 0;
        for (; k + 8 <= d; k += 8) {
          for (std::size_t u = 0; u < 8; ++u) {
            const auto q = 2 * (k + u);
            const Real re = h[q] * r[q] - h[q + 1] * r[q + 1] - t[q];
            const Real im = h[q] * r[q + 1] + h[q + 1] * r[q] - t[q + 1];
            const Real sq = re * re + im * im;
            part[u] += l1 ? std::sqrt(sq) : sq;
          }
        }
        for (std::size_t u = 0; k < d; ++k, ++u) {
          const auto q = 2 * k;
          const Real re = h[q] * r[q] - h[q + 1] * r[q + 1] - t[q];
          const Real im = h[q] * r[q + 1] + h[q + 1] * r[q] - t[q + 1];
          const Real sq = re * re + im * im;
          part[u] += l1 ? std::sqrt(sq) : sq;
        }
        const Real total = ((part[0] + part[1]) + (part[2] + part[3])) +
                           ((part[4] + part[5]) + (part[6] + part[7]));
        return l1 ? -total : -std::sqrt(total);
      }
      case ModelKind::kPairRE: {
        const Real hn = detail::l2_norm(h);
        const Real tn = detail::l2_norm(t);
        const Real hs = hn > 0 ? Real(1) / hn : Real(0);
        const Real ts = tn > 0 ? Real(1) / tn : Real(0);
        for (std::size_t i = 0; i < d; ++i) {
          s.a[i] = h[i] * hs * r[i] - t[i] * ts * r[d + i];
        }
        return detail::negated_norm<Real>({s.a.data(), d}, model_.norm, {});
      }
    }
    return 0;
  }

  Real score(const Triple& t) {
    check(t);
    return kernel(model_.entities.row(t.head), prepared(t.relation),
                  model_.entities.row(t.tail));
  }

  // Scores every entity as the tail (or head) of the query. Each value is
  // bitwise identical to score() of the corresponding triple.
  void score_candidates(std::uint32_t anchor, std::uint32_t relation, bool replace_tail,
                        std::span<Real> out) {
    check({anchor, relation, anchor});
    const auto& rel = prepared(relation);
    const auto fixed = model_.entities.row(anchor);
    const auto n = model_.num_entities();
    if (replace_tail) {
      for (std::uint32_t e = 0; e < n; ++e) {
        out[e] = kernel(fixed, rel, model_.entities.row(e));
      }
    } else {
      for (std::uint32_t e = 0; e < n; ++e) {
        out[e] = kernel(model_.entities.row(e), rel, fixed);
      }
    }
  }

  // Accumulates weight * d score / d params into grad. Every row of the
  // triple is touched even when weight is zero.
  void accumulate_grad(const Triple& t, Real weight, ModelGradient<Real>& grad) {
    check(t);
    const auto d = model_.dim;
    auto dh = grad.tables[kEntityTable].row(t.head);
    auto dr = grad.tables[kRelationTable].row(t.relation);
    std::span<Real> dm;
    if (model_.kind == ModelKind::kTransR) dm = grad.tables[kProjectionTable].row(t.relation);
    // Head and tail may share a row, so the tail slot is fetched after the
    // head slot's allocation to keep spans valid.
    auto dt = grad.tables[kEntityTable].row(t.tail);
    dh = grad.tables[kEntityTable].row(t.head);
    if (weight == Real(0)) return;

    const auto h = model_.entities.row(t.head);
    const auto r = model_.relations.row(t.relation);
    const auto tt = model_.entities.row(t.tail);
    auto& s = scratch_;
    const Real w = weight;

    switch (model_.kind) {
      case ModelKind::kTransE: {
        for (std::size_t i = 0; i < d; ++i) s.a[i] = h[i] + r[i] - tt[i];
        detail::negated_norm<Real>({s.a.data(), d}, model_.norm, {s.g.data(), d});
        for (std::size_t i = 0; i < d; ++i) {
          const Real g = w * s.g[i];
          dh[i] += g;
          dr[i] += g;
          dt[i] -= g;
        }
        break;
      }
      case ModelKind::kTransR: {
        const auto m = model_.projections.row(t.relation);
        for (std::size_t i = 0; i < d; ++i) s.b[i] = h[i] - tt[i];
        for (std::size_t i = 0; i < d; ++i) {
          Real acc = r[i];
          for (std::size_t j = 0; j < d; ++j) acc += m[i * d + j] * s.b[j];
          s.a[i] = acc;
        }
        detail::negated_norm<Real>({s.a.data(), d}, model_.norm, {s.g.data(), d});
        for (std::size_t i = 0; i < d; ++i) {
          const Real g = w * s.g[i];
          dr[i] += g;
          for (std::size_t j = 0; j < d; ++j) dm[i * d + j] += g * s.b[j];
        }
        for (std::size_t j = 0; j < d; ++j) {
          Real acc = 0;
          for (std::size_t i = 0; i < d; ++i) acc += m[i * d + j] * s.g[i];
          dh[j] += w * acc;
          dt[j] -= w * acc;
        }
        break;
      }
      case ModelKind::kDistMult: {
        for (std::size_t i = 0; i < d; ++i) {
          dh[i] += w * r[i] * tt[i];
          dr[i] += w * h[i] * tt[i];
          dt[i] += w * h[i] * r[i];
        }
        break;
      }
      case ModelKind::kComplEx: {
        for (std::size_t k = 0; k < d; ++k) {
          const Real hr = h[2 * k], hi = h[2 * k + 1];
          const Real rr = r[2 * k], ri = r[2 * k + 1];
          const Real tr = tt[2 * k], ti = tt[2 * k + 1];
          // s = hr*rr*tr - hi*ri*tr + hr*ri*ti + hi*rr*ti
          dh[2 * k] += w * (rr * tr + ri * ti);
          dh[2 * k + 1] += w * (rr * ti - ri * tr);
          dr[2 * k] += w * (hr * tr + hi * ti);
          dr[2 * k + 1] += w * (hr * ti - hi * tr);
          dt[2 * k] += w * (hr * rr - hi * ri);
          dt[2 * k + 1] += w * (hr * ri + hi * rr);
        }
        break;
      }
      case ModelKind::kHolE: {
        for (std::size_t k = 0; k < d; ++k) {
          Real corr = 0;
          for (std::size_t i = 0; i < d; ++i) {
            const auto j = (i + k) % d;
            corr += h[i] * tt[j];
            dh[i] += w * r[k] * tt[j];
            dt[j] += w * r[k] * h[i];
          }
          dr[k] += w * corr;
        }
        break;
      }
      case ModelKind::kRotatE: {
        const auto& cs = prepared(t.relation).values;
        for (std::size_t k = 0; k < d; ++k) {
          const Real c = cs[2 * k], sn = cs[2 * k + 1];
          const Real hr = h[2 * k], hi = h[2 * k + 1];
          const Real rot_re = hr * c - hi * sn;
          const Real rot_im = hr * sn + hi * c;
          s.b[2 * k] = rot_re;
          s.b[2 * k + 1] = rot_im;
          s.a[2 * k] = rot_re - tt[2 * k];
          s.a[2 * k + 1] = rot_im - tt[2 * k + 1];
        }
        detail::negated_complex_norm<Real>({s.a.data(), 2 * d}, model_.norm,
                                           {s.g.data(), 2 * d});
        for (std::size_t k = 0; k < d; ++k) {
          const Real c = cs[2 * k], sn = cs[2 * k + 1];
          const Real gr = w * s.g[2 * k], gi = w * s.g[2 * k + 1];
          dt[2 * k] -= gr;
          dt[2 * k + 1] -= gi;
          dh[2 * k] += gr * c + gi * sn;
          dh[2 * k + 1] += -gr * sn + gi * c;
          dr[k] += -gr * s.b[2 * k + 1] + gi * s.b[2 * k];
        }
        break;
      }
      case ModelKind::kPairRE: {
        const Real hn = detail::l2_norm(h);
        const Real tn = detail::l2_norm(tt);
        const Real hs = hn > 0 ? Real(1) / hn : Real(0);
        const Real ts = tn > 0 ? Real(1) / tn : Real(0);
        for (std::size_t i = 0; i < d; ++i) {
          s.b[i] = h[i] * hs;        // normalized head
          s.c[i] = tt[i] * ts;       // normalized tail
          s.a[i] = s.b[i] * r[i] - s.c[i] * r[d + i];
        }
        detail::negated_norm<Real>({s.a.data(), d}, model_.norm, {s.g.data(), d});
        // Gradients w.r.t. normalized vectors, then through x/|x|.
        Real dot_h = 0, dot_t = 0;
        for (std::size_t i = 0; i < d; ++i) {
          const Real g = w * s.g[i];
          dr[i] += g * s.b[i];
          dr[d + i] -= g * s.c[i];
          dot_h += g * r[i] * s.b[i];
          dot_t += -g * r[d + i] * s.c[i];
        }
        for (std::size_t i = 0; i < d; ++i) {
          const Real g = w * s.g[i];
          dh[i] += hs * (g * r[i] - s.b[i] * dot_h);
          dt[i] += ts * (-g * r[d + i] - s.c[i] * dot_t);
        }
        break;
      }
    }
  }

 private:
  const EmbeddingModel<Real>& model_;
  KernelScratch<Real> scratch_;
  std::vector<PreparedRelation<Real>> cache_;
  std::vector<std::uint8_t> cached_;
};

template <typename Real>
std::vector<Real> score(const EmbeddingModel<Real>& model, std::span<const Triple> batch) {
  Scorer<Real> scorer(model);
  std::vector<Real> out;
  out.reserve(batch.size());
  for (const auto& t : batch) out.push_back(scorer.score(t));
  return out;
}

// Gradient of sum_i upstream[i] * score(batch[i]).
template <typename Real>
ModelGradient<Real> grad(const EmbeddingModel<Real>& model, std::span<const Triple> batch,
                         std::span<const Real> upstream) {
  if (batch.size() != upstream.size()) {
    throw Error(ErrorCode::kShape, "upstream weights do not match batch");
  }
  Scorer<Real> scorer(model);
  ModelGradient<Real> out(model);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    scorer.accumulate_grad(batch[i], upstream[i], out);
  }
  return out;
}

template <typename Real>
Real wrap_phase(Real theta) {
  constexpr Real pi = std::numbers::pi_v<Real>;
  if (theta > pi || theta <= -pi) {
    theta = std::remainder(theta, Real(2) * pi);
    if (theta <= -pi) theta += Real(2) * pi;
    if (theta > pi) theta -= Real(2) * pi;
  }
  return theta;
}

namespace detail {

// Rows whose L2 norm exceeds 1 by more than the slack are rescaled; the
// slack keeps a second pass from touching an already rescaled row.
template <typename Real>
void project_row(const EmbeddingModel<Real>& model, std::size_t table, std::span<Real> row) {
  if (table == kEntityTable &&
      (model.kind == ModelKind::kTransE || model.kind == ModelKind::kTransR ||
       model.kind == ModelKind::kPairRE)) {
    const Real n = l2_norm<Real>(row);
    if (n > Real(1) + Real(1e-5)) {
      for (auto& v : row) v /= n;
    }
  } else if (table == kRelationTable && model.kind == ModelKind::kRotatE) {
    for (auto& v : row) v = wrap_phase(v);
  }
}

}  // namespace detail

template <typename Real>
void project_constraints(EmbeddingModel<Real>& model) {
  for (std::size_t t = 0; t < 2; ++t) {
    auto& table = *model.tables()[t];
    for (std::size_t r = 0; r < table.rows; ++r) detail::project_row(model, t, table.row(r));
  }
}

// Projects only rows present in `touched`.
template <typename Real>
void project_constraints(EmbeddingModel<Real>& model, const ModelGradient<Real>& touched) {
  for (std::size_t t = 0; t < 2; ++t) {
    auto& table = *model.tables()[t];
    for (auto r : touched.tables[t].rows()) detail::project_row(model, t, table.row(r));
  }
}

template <typename To, typename From>
EmbeddingModel<To> convert_model(const EmbeddingModel<From>& model) {
  EmbeddingModel<To> out;
  out.kind = model.kind;
  out.dim = model.dim;
  out.norm = model.norm;
  out.masked = model.masked;
  auto src = model.tables();
  auto dst = out.tables();
  for (std::size_t i = 0; i < kNumTables; ++i) {
    *dst[i] = ParameterTable<To>(src[i]->rows, src[i]->width);
    std::transform(src[i]->values.begin(), src[i]->values.end(), dst[i]->values.begin(),
                   [](From v) { return static_cast<To>(v); });
  }
  return out;
}

// Multiply-accumulate operations needed to score one triple, before any
// sparsity discount.
inline double score_macs(ModelKind kind, std::size_t dim) {
  const double d = static_cast<double>(dim);
  switch (kind) {
    case ModelKind::kTransE: return 2 * d;
    case ModelKind::kTransR: return d * d + 2 * d;
    case ModelKind::kDistMult: return 2 * d;
    case ModelKind::kComplEx: return 8 * d;
    case ModelKind::kHolE: return d * d + d;
    case ModelKind::kRotatE: return 7 * d;
    case ModelKind::kPairRE: return 5 * d;
  }
  return 0;
}

}  // namespace kgedge

#endif  // KGEDGE_MODELS_HPP_
