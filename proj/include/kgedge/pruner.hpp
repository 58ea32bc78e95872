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

#ifndef KGEDGE_PRUNER_HPP_
#define KGEDGE_PRUNER_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "kgedge/checkpoint.hpp"
#include "kgedge/common.hpp"
#include "kgedge/models.hpp"
#include "kgedge/trainer.hpp"
#include "kgedge/triple_store.hpp"

namespace kgedge {

// Per-parameter sensitivity, laid out like the model's tables.
struct SensitivityMap {
  std::array<std::vector<double>, kNumTables> values;

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& v : values) n += v.size();
    return n;
  }
};

struct SensitivityBatch {
  std::vector<Triple> positives;
  std::vector<Triple> negatives;  // grouped per positive
};

struct SensitivityOptions {
  // Batches drawn from the split; 0 covers the whole split once.
  std::size_t num_batches = 0;
  std::size_t batch_size = 1000;
  std::uint64_t seed = 7;
  // Scores |gradient * weight| instead of |gradient|.
  bool weight_times_gradient = false;
};

template <typename Real>
SensitivityMap sensitivity(const EmbeddingModel<Real>& model,
                           std::span<const SensitivityBatch> batches, const TrainConfig& config,
                           bool weight_times_gradient = false) {
  if (batches.empty()) throw Error(ErrorCode::kConfig, "sensitivity needs at least one batch");
  SensitivityMap map;
  const auto tables = model.tables();
  for (std::size_t t = 0; t < kNumTables; ++t) map.values[t].assign(tables[t]->size(), 0.0);

  ModelGradient<Real> grad(model);
  for (const auto& batch : batches) {
    compute_loss(model, std::span<const Triple>(batch.positives),
                 std::span<const Triple>(batch.negatives), config, grad);
    for (std::size_t t = 0; t < kNumTables; ++t) {
      const auto& g = grad.tables[t];
      const auto width = g.width();
      for (std::size_t i = 0; i < g.rows().size(); ++i) {
        const auto row = g.rows()[i];
        const auto gr = g.slot(i);
        const auto params = tables[t]->row(row);
        auto* out = map.values[t].data() + static_cast<std::size_t>(row) * width;
        for (std::size_t j = 0; j < width; ++j) {
          double v = std::abs(double(gr[j]));
          if (weight_times_gradient) v *= std::abs(double(params[j]));
          out[j] += v;
        }
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(batches.size());
  for (auto& v : map.values) {
    for (auto& x : v) x *= inv;
  }
  return map;
}

// Builds loss batches over a split with the training sampler's corruption
// scheme, so sensitivity reflects the configured training loss.
inline std::vector<SensitivityBatch> sensitivity_batches(const TripleStore& store, Split split,
                                                         const TrainConfig& config,
                                                         const SensitivityOptions& options) {
  auto triples = store.split_triples(split);
  if (triples.empty()) {
    throw Error(ErrorCode::kConfig,
                std::string(split_name(split)) + " split is empty; sensitivity is undefined");
  }
  if (options.batch_size == 0) throw Error(ErrorCode::kConfig, "batch_size must be >= 1");
  Rng rng(options.seed);
  rng.shuffle(std::span<Triple>(triples));
  const auto all = store.triple_set();
  NegativeSampler sampler(store.num_entities(), &all, config.negative_retries, rng.next());

  const auto per_pass = (triples.size() + options.batch_size - 1) / options.batch_size;
  const auto count = options.num_batches == 0 ? per_pass : options.num_batches;
  std::vector<SensitivityBatch> batches(count);
  for (std::size_t k = 0; k < count; ++k) {
    // Batches cycle through the shuffled split; a pass ends with a short
    // batch rather than wrapping into the next pass.
    const auto start = (k % per_pass) * options.batch_size;
    const auto end = std::min(triples.size(), start + options.batch_size);
    auto& b = batches[k];
    b.positives.assign(triples.begin() + static_cast<std::ptrdiff_t>(start),
                       triples.begin() + static_cast<std::ptrdiff_t>(end));
    sampler.sample(b.positives, config.num_negatives, b.negatives);
  }
  return batches;
}

template <typename Real>
SensitivityMap sensitivity(const EmbeddingModel<Real>& model, const TripleStore& store,
                           const TrainConfig& config, const SensitivityOptions& options = {},
                           Split split = Split::kValid) {
  const auto batches = sensitivity_batches(store, split, config, options);
  return sensitivity(model, std::span<const SensitivityBatch>(batches), config,
                     options.weight_times_gradient);
}

enum class PruneScope { kGlobal, kPerTable };

struct PruneMask {
  TableMasks masks;
  double pruning_ratio = 0;
  // Smallest kept sensitivity (infinity when nothing is kept).
  double threshold = 0;

  std::size_t pruned() const {
    std::size_t n = 0;
    for (const auto& k : masks.keep) n += static_cast<std::size_t>(std::count(k.begin(), k.end(), false));
    return n;
  }
  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& k : masks.keep) n += k.size();
    return n;
  }
};

inline std::size_t prune_count(double ratio, std::size_t total) {
  return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(total)));
}

namespace detail {

struct SensRef {
  double value;
  std::size_t table;
  std::size_t index;
};

// Marks the `count` lowest entries of `refs` as pruned, ordered by
// (sensitivity, position). Returns the smallest kept sensitivity.
inline double select_pruned(std::vector<SensRef>& refs, std::size_t count, TableMasks& out) {
  const auto less = [](const SensRef& a, const SensRef& b) {
    if (a.value != b.value) return a.value < b.value;
    if (a.table != b.table) return a.table < b.table;
    return a.index < b.index;
  };
  if (count >= refs.size()) {
    for (const auto& r : refs) out.keep[r.table][r.index] = false;
    return std::numeric_limits<double>::infinity();
  }
  if (count == 0) {
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& r : refs) lowest = std::min(lowest, r.value);
    return lowest;
  }
  std::nth_element(refs.begin(), refs.begin() + static_cast<std::ptrdiff_t>(count), refs.end(),
                   less);
  for (std::size_t i = 0; i < count; ++i) out.keep[refs[i].table][refs[i].index] = false;
  return refs[count].value;
}

}  // namespace detail

// Prunes exactly round(ratio * N) entries with the lowest sensitivity, ties
// going to the earlier position. Per-table scope applies the ratio to every
// table separately.
inline PruneMask build_mask(const SensitivityMap& sens, double ratio,
                            PruneScope scope = PruneScope::kGlobal) {
  if (!(ratio >= 0 && ratio < 1)) throw Error(ErrorCode::kConfig, "pruning ratio must be in [0, 1)");
  PruneMask mask;
  mask.pruning_ratio = ratio;
  for (std::size_t t = 0; t < kNumTables; ++t) {
    mask.masks.keep[t].assign(sens.values[t].size(), true);
    for (auto v : sens.values[t]) {
      if (!(v >= 0) || !std::isfinite(v)) {
        throw Error(ErrorCode::kConfig, "sensitivities must be finite and non-negative");
      }
    }
  }
  auto refs_of = [&](std::size_t t, std::vector<detail::SensRef>& refs) {
    for (std::size_t i = 0; i < sens.values[t].size(); ++i) refs.push_back({sens.values[t][i], t, i});
  };
  if (scope == PruneScope::kGlobal) {
    std::vector<detail::SensRef> refs;
    refs.reserve(sens.size());
    for (std::size_t t = 0; t < kNumTables; ++t) refs_of(t, refs);
    mask.threshold = detail::select_pruned(refs, prune_count(ratio, refs.size()), mask.masks);
  } else {
    mask.threshold = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < kNumTables; ++t) {
      if (sens.values[t].empty()) continue;
      std::vector<detail::SensRef> refs;
      refs_of(t, refs);
      mask.threshold = std::min(
          mask.threshold, detail::select_pruned(refs, prune_count(ratio, refs.size()), mask.masks));
    }
  }
  return mask;
}

template <typename Real>
void zero_masked(EmbeddingModel<Real>& model, const TableMasks& masks) {
  auto tables = model.tables();
  for (std::size_t t = 0; t < kNumTables; ++t) {
    auto& v = tables[t]->values;
    const auto& keep = masks.keep[t];
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!keep[i]) v[i] = Real(0);
    }
  }
}

template <typename Real>
void apply_mask(EmbeddingModel<Real>& model, const PruneMask& mask) {
  detail::check_masks(model, mask.masks);
  zero_masked(model, mask.masks);
  model.masked = true;
}

template <typename Real>
void mask_gradient(ModelGradient<Real>& grad, const TableMasks& masks) {
  for (std::size_t t = 0; t < kNumTables; ++t) {
    auto& g = grad.tables[t];
    const auto width = g.width();
    const auto& keep = masks.keep[t];
    for (std::size_t i = 0; i < g.rows().size(); ++i) {
      auto slot = g.slot(i);
      const auto base = static_cast<std::size_t>(g.rows()[i]) * width;
      for (std::size_t j = 0; j < width; ++j) {
        if (!keep[base + j]) slot[j] = Real(0);
      }
    }
  }
}

inline TrainConfig finetune_config(TrainConfig base) {
  base.epochs = 300;
  return base;
}

// Trains from the masked model with gradients masked before every optimizer
// step and pruned positions re-zeroed after it. `extra` hooks run after the
// masking ones. Optimizer moments start from zero.
template <typename Real>
TrainResult<Real> finetune(EmbeddingModel<Real> model, const PruneMask& mask,
                           const TripleStore& store, const TrainConfig& config,
                           TrainHooks<Real> extra = {}) {
  detail::check_masks(model, mask.masks);
  zero_masked(model, mask.masks);
  model.masked = true;
  TrainHooks<Real> hooks = extra;
  hooks.before_step = [&mask, user = extra.before_step](ModelGradient<Real>& g) {
    mask_gradient(g, mask.masks);
    if (user) user(g);
  };
  hooks.after_step = [&mask, user = extra.after_step](EmbeddingModel<Real>& m) {
    zero_masked(m, mask.masks);
    if (user) user(m);
  };
  return train<Real>(store, config, hooks, std::move(model));
}

template <typename Real>
std::size_t count_nonzero(const EmbeddingModel<Real>& model) {
  std::size_t n = 0;
  for (const auto* t : model.tables()) {
    for (auto v : t->values) n += v != Real(0);
  }
  return n;
}

struct PruneReport {
  double pruning_ratio = 0;
  std::size_t parameters_total = 0;
  std::size_t parameters_nonzero = 0;
  std::size_t checkpoint_bytes_dense = 0;
  std::size_t checkpoint_bytes_sparse = 0;
  double pre_prune_hits10 = std::numeric_limits<double>::quiet_NaN();
  double post_prune_hits10 = std::numeric_limits<double>::quiet_NaN();
  double post_finetune_hits10 = std::numeric_limits<double>::quiet_NaN();
  // Multiply-accumulates per triple score; the sparse figure scales the
  // dense count by the nonzero fraction.
  double macs_dense = 0;
  double macs_sparse = 0;
};

template <typename Real>
PruneReport prune_report(const EmbeddingModel<Real>& model, const PruneMask& mask) {
  PruneReport r;
  r.pruning_ratio = mask.pruning_ratio;
  r.parameters_total = model.parameter_count();
  r.parameters_nonzero = count_nonzero(model);
  r.checkpoint_bytes_dense = dense_checkpoint_bytes(model);
  r.checkpoint_bytes_sparse =
      encode_checkpoint(model, &mask.masks, CheckpointEncoding::kSparse).size();
  r.macs_dense = score_macs(model.kind, model.dim);
  r.macs_sparse = r.parameters_total == 0
                      ? 0.0
                      : r.macs_dense * static_cast<double>(r.parameters_nonzero) /
                            static_cast<double>(r.parameters_total);
  return r;
}

inline void write_prune_report_kv(const PruneReport& r, std::ostream& out) {
  const auto old_precision = out.precision(10);
  out << "pruning_ratio = " << r.pruning_ratio << '\n'
      << "parameters_total = " << r.parameters_total << '\n'
      << "parameters_nonzero = " << r.parameters_nonzero << '\n'
      << "checkpoint_bytes_dense = " << r.checkpoint_bytes_dense << '\n'
      << "checkpoint_bytes_sparse = " << r.checkpoint_bytes_sparse << '\n'
      << "pre_prune_hits@10 = " << r.pre_prune_hits10 << '\n'
      << "post_prune_hits@10 = " << r.post_prune_hits10 << '\n'
      << "post_finetune_hits@10 = " << r.post_finetune_hits10 << '\n'
      << "macs_per_score_dense = " << r.macs_dense << '\n'
      << "macs_per_score_sparse = " << r.macs_sparse << '\n';
  out.precision(old_precision);
}

inline void write_prune_report_csv(const PruneReport& r, std::ostream& out, bool header = true) {
  const auto old_precision = out.precision(10);
  if (header) {
    out << "pruning_ratio,parameters_total,parameters_nonzero,checkpoint_bytes_dense,"
           "checkpoint_bytes_sparse,pre_prune_hits10,post_prune_hits10,post_finetune_hits10,"
           "macs_dense,macs_sparse\n";
  }
  out << r.pruning_ratio << ',' << r.parameters_total << ',' << r.parameters_nonzero << ','
      << r.checkpoint_bytes_dense << ',' << r.checkpoint_bytes_sparse << ','
      << r.pre_prune_hits10 << ',' << r.post_prune_hits10 << ',' << r.post_finetune_hits10 << ','
      << r.macs_dense << ',' << r.macs_sparse << '\n';
  out.precision(old_precision);
}

// Writes the masked model, choosing whichever of the dense and sparse
// encodings is smaller. Returns the file size.
template <typename Real>
std::size_t save_sparse(const EmbeddingModel<Real>& model, const PruneMask& mask,
                        const std::string& path) {
  return save_checkpoint(model, path, &mask.masks, CheckpointEncoding::kAuto);
}

template <typename Real>
Checkpoint<Real> load_sparse(const std::string& path) {
  return load_checkpoint<Real>(path);
}

}  // namespace kgedge

#endif  // KGEDGE_PRUNER_HPP_
