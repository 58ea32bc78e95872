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

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <vector>

#include "kgedge/pruner.hpp"
#include "kgedge/synth_graph.hpp"

namespace kgedge {
namespace {

namespace fs = std::filesystem;

SensitivityMap flat_map(std::vector<double> v) {
  SensitivityMap m;
  m.values[0] = std::move(v);
  return m;
}

TEST(BuildMask, PercentileByRank) {
  const auto mask = build_mask(flat_map({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}), 0.3);
  const std::vector<bool> expect{false, false, false, true, true, true, true, true, true, true};
  EXPECT_EQ(mask.masks.keep[0], expect);
  EXPECT_EQ(mask.pruned(), 3u);
  EXPECT_EQ(mask.threshold, 4.0);
  EXPECT_EQ(mask.pruning_ratio, 0.3);
}

TEST(BuildMask, RatioZeroKeepsEverything) {
  const auto mask = build_mask(flat_map({0, 0, 5, 1}), 0.0);
  EXPECT_EQ(mask.pruned(), 0u);
  for (bool k : mask.masks.keep[0]) EXPECT_TRUE(k);
}

TEST(BuildMask, TiesGoToEarlierPositions) {
  SensitivityMap m;
  m.values[0] = {1, 1, 1};
  m.values[1] = {1, 0.5};
  const auto mask = build_mask(m, 0.6);  // 3 of 5
  EXPECT_EQ(mask.masks.keep[1], (std::vector<bool>{true, false}));
  EXPECT_EQ(mask.masks.keep[0], (std::vector<bool>{false, false, true}));
}

TEST(BuildMask, ExactCountsAndNesting) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    SensitivityMap m;
    for (std::size_t t = 0; t < kNumTables; ++t) {
      m.values[t].resize(rng.uniform_index(400));
      // Few distinct values, so ties are common.
      for (auto& v : m.values[t]) v = double(rng.uniform_index(7));
    }
    if (m.size() == 0) continue;
    std::vector<double> ratios{0.0, 0.1, 0.3, 0.5, 0.67, 0.9, 0.999};
    std::vector<PruneMask> masks;
    for (double r : ratios) {
      masks.push_back(build_mask(m, r));
      const auto& mask = masks.back();
      EXPECT_EQ(mask.pruned(), static_cast<std::size_t>(std::llround(r * double(m.size()))));
      EXPECT_EQ(mask.total(), m.size());
      // Every pruned value is <= every kept value.
      double max_pruned = -1, min_kept = 1e300;
      for (std::size_t t = 0; t < kNumTables; ++t) {
        for (std::size_t i = 0; i < m.values[t].size(); ++i) {
          if (mask.masks.keep[t][i]) {
            min_kept = std::min(min_kept, m.values[t][i]);
          } else {
            max_pruned = std::max(max_pruned, m.values[t][i]);
          }
        }
      }
      EXPECT_LE(max_pruned, min_kept);
    }
    for (std::size_t a = 0; a + 1 < masks.size(); ++a) {
      for (std::size_t t = 0; t < kNumTables; ++t) {
        for (std::size_t i = 0; i < m.values[t].size(); ++i) {
          if (!masks[a].masks.keep[t][i]) { EXPECT_FALSE(masks[a + 1].masks.keep[t][i]); }
        }
      }
    }
  }
}

TEST(BuildMask, PerTableScope) {
  SensitivityMap m;
  m.values[0] = {1, 2, 3, 4};
  m.values[1] = {100, 200, 300, 400};
  const auto global = build_mask(m, 0.5);
  EXPECT_EQ(global.masks.keep[1], (std::vector<bool>{true, true, true, true}));
  const auto per = build_mask(m, 0.5, PruneScope::kPerTable);
  EXPECT_EQ(per.masks.keep[0], (std::vector<bool>{false, false, true, true}));
  EXPECT_EQ(per.masks.keep[1], (std::vector<bool>{false, false, true, true}));
}

TEST(BuildMask, RejectsBadInput) {
  EXPECT_THROW(build_mask(flat_map({1, 2}), 1.0), Error);
  EXPECT_THROW(build_mask(flat_map({1, 2}), -0.1), Error);
  EXPECT_THROW(build_mask(flat_map({1, -2}), 0.5), Error);
  EXPECT_THROW(build_mask(flat_map({1, std::numeric_limits<double>::infinity()}), 0.5), Error);
}

SensitivityMap random_sensitivity(const EmbeddingModel<float>& m, std::uint64_t seed) {
  Rng rng(seed);
  SensitivityMap s;
  const auto tables = m.tables();
  for (std::size_t t = 0; t < kNumTables; ++t) {
    s.values[t].resize(tables[t]->size());
    for (auto& v : s.values[t]) v = rng.uniform01();
  }
  return s;
}

TEST(ApplyMask, Cases) {
  const auto base = init_model<float>(ModelKind::kTransR, 4, 10, 3, 2);
  auto m = base;
  apply_mask(m, build_mask(random_sensitivity(m, 1), 0.0));
  EXPECT_EQ(m.entities, base.entities);
  EXPECT_EQ(m.relations, base.relations);
  EXPECT_EQ(m.projections, base.projections);
  EXPECT_TRUE(m.masked);

  // All pruned except one.
  m = base;
  PruneMask one;
  for (std::size_t t = 0; t < kNumTables; ++t) one.masks.keep[t].assign(m.tables()[t]->size(), false);
  one.masks.keep[1][5] = true;
  apply_mask(m, one);
  EXPECT_EQ(count_nonzero(m), 1u);
  EXPECT_EQ(m.relations.values[5], base.relations.values[5]);

  // Idempotence, consistency and untouched kept values.
  m = base;
  const auto mask = build_mask(random_sensitivity(m, 2), 0.5);
  apply_mask(m, mask);
  const auto once = m;
  apply_mask(m, mask);
  EXPECT_EQ(m, once);
  const auto tables = m.tables();
  const auto orig = base.tables();
  for (std::size_t t = 0; t < kNumTables; ++t) {
    for (std::size_t i = 0; i < tables[t]->size(); ++i) {
      if (mask.masks.keep[t][i]) {
        EXPECT_EQ(tables[t]->values[i], orig[t]->values[i]);
      } else {
        EXPECT_EQ(tables[t]->values[i], 0.0f);
      }
    }
  }

  auto wrong = mask;
  wrong.masks.keep[0].pop_back();
  try {
    apply_mask(m, wrong);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
  }
}

TEST(Sensitivity, MatchesExplicitAccumulation) {
  Rng rng(3);
  for (auto kind : kAllModelKinds) {
    const auto m = init_model<double>(kind, 1 + rng.uniform_index(8), 12, 3, rng.next());
    TrainConfig cfg;
    cfg.num_negatives = 3;
    std::vector<SensitivityBatch> batches(4);
    NegativeSampler sampler(12, nullptr, 0, 5);
    for (auto& b : batches) {
      for (int i = 0; i < 5; ++i) {
        b.positives.push_back({std::uint32_t(rng.uniform_index(12)),
                               std::uint32_t(rng.uniform_index(3)),
                               std::uint32_t(rng.uniform_index(12))});
      }
      sampler.sample(b.positives, 3, b.negatives);
    }
    for (bool wtg : {false, true}) {
      const auto sens = sensitivity(m, std::span<const SensitivityBatch>(batches), cfg, wtg);
      // Oracle: dense per-table sums of |g| (times |w|), then the mean.
      std::array<std::vector<double>, kNumTables> sum;
      const auto tables = m.tables();
      for (std::size_t t = 0; t < kNumTables; ++t) sum[t].assign(tables[t]->size(), 0.0);
      for (const auto& b : batches) {
        ModelGradient<double> g(m);
        compute_loss(m, std::span<const Triple>(b.positives), std::span<const Triple>(b.negatives),
                     cfg, g);
        for (std::size_t t = 0; t < kNumTables; ++t) {
          const auto w = tables[t]->width;
          for (std::uint32_t row = 0; row < tables[t]->rows; ++row) {
            const auto gr = g.tables[t].find(row);
            for (std::size_t j = 0; j < gr.size(); ++j) {
              const double weight = wtg ? std::abs(tables[t]->values[row * w + j]) : 1.0;
              sum[t][row * w + j] += std::abs(gr[j]) * weight;
            }
          }
        }
      }
      for (std::size_t t = 0; t < kNumTables; ++t) {
        ASSERT_EQ(sens.values[t].size(), sum[t].size());
        for (std::size_t i = 0; i < sum[t].size(); ++i) {
          EXPECT_NEAR(sens.values[t][i], sum[t][i] / 4.0, 1e-12) << model_kind_name(kind);
          EXPECT_GE(sens.values[t][i], 0.0);
        }
      }
    }
  }
}

TEST(Sensitivity, UntouchedEntityIsZero) {
  const auto m = init_model<double>(ModelKind::kRotatE, 4, 6, 1, 1);
  SensitivityBatch b;
  b.positives = {{0, 0, 1}};
  b.negatives = {{0, 0, 2}, {3, 0, 1}};
  TrainConfig cfg;
  const std::vector<SensitivityBatch> batches{b};
  const auto sens = sensitivity(m, std::span<const SensitivityBatch>(batches), cfg);
  const auto w = m.entities.width;
  for (std::uint32_t e : {4u, 5u}) {
    for (std::size_t j = 0; j < w; ++j) EXPECT_EQ(sens.values[0][e * w + j], 0.0);
  }
  double touched = 0;
  for (std::size_t j = 0; j < w; ++j) touched += sens.values[0][j];
  EXPECT_GT(touched, 0.0);
}

TEST(Sensitivity, ParameterOutsideTheLossIsZero) {
  // DistMult: every entity is zero in coordinate 1, so the loss does not
  // depend on relation coordinate 1.
  auto m = init_model<double>(ModelKind::kDistMult, 3, 5, 1, 2);
  for (std::size_t e = 0; e < 5; ++e) m.entities.row(e)[1] = 0.0;
  TrainConfig cfg;
  cfg.l2_coefficient = 0;
  SensitivityBatch b;
  b.positives = {{0, 0, 1}, {2, 0, 3}};
  NegativeSampler(5, nullptr, 0, 1).sample(b.positives, cfg.num_negatives, b.negatives);
  const std::vector<SensitivityBatch> batches{b};
  const auto sens = sensitivity(m, std::span<const SensitivityBatch>(batches), cfg);
  EXPECT_EQ(sens.values[1][1], 0.0);
  EXPECT_GT(sens.values[1][0], 0.0);
}

TripleStore small_store() {
  SynthConfig c;
  c.num_people = 300;
  return split(generate(c).store, SplitRatio{}, 2);
}

TEST(Sensitivity, StoreOverloadAndErrors) {
  auto s = small_store();
  TrainConfig cfg;
  cfg.dim = 8;
  const auto m = init_model<float>(cfg.model, cfg.dim, s.num_entities(), s.num_relations(), 1);
  SensitivityOptions o;
  o.batch_size = 64;
  const auto batches = sensitivity_batches(s, Split::kValid, cfg, o);
  EXPECT_EQ(batches.size(), (s.valid.size() + 63) / 64);
  std::size_t covered = 0;
  for (const auto& b : batches) {
    covered += b.positives.size();
    EXPECT_EQ(b.negatives.size(), b.positives.size() * cfg.num_negatives);
  }
  EXPECT_EQ(covered, s.valid.size());
  const auto a = sensitivity(m, s, cfg, o);
  const auto b = sensitivity(m, s, cfg, o);
  EXPECT_EQ(a.values, b.values);
  o.num_batches = 3;
  EXPECT_EQ(sensitivity_batches(s, Split::kValid, cfg, o).size(), 3u);
  s.valid.clear();
  try {
    sensitivity(m, s, cfg, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
}

TEST(Finetune, ZeroEpochsKeepsModelAndMask) {
  const auto s = small_store();
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 0;
  auto m = init_model<float>(cfg.model, cfg.dim, s.num_entities(), s.num_relations(), 1);
  const auto mask = build_mask(random_sensitivity(m, 4), 0.5);
  apply_mask(m, mask);
  const auto r = finetune(m, mask, s, cfg);
  EXPECT_EQ(r.model, m);
  EXPECT_TRUE(r.model.masked);
  EXPECT_EQ(finetune_config(cfg).epochs, 300u);
}

TEST(Finetune, MaskedPositionsZeroAfterEveryStep) {
  const auto s = small_store();
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 3;
  cfg.batch_size = 128;
  cfg.num_negatives = 4;
  cfg.eval_every = 1;
  auto m = init_model<float>(cfg.model, cfg.dim, s.num_entities(), s.num_relations(), 1);
  const auto mask = build_mask(random_sensitivity(m, 5), 0.67);
  apply_mask(m, mask);
  std::size_t steps = 0, violations = 0, grad_leaks = 0;
  TrainHooks<float> hooks;
  hooks.before_step = [&](ModelGradient<float>& g) {
    for (std::size_t t = 0; t < kNumTables; ++t) {
      const auto w = g.tables[t].width();
      for (std::size_t i = 0; i < g.tables[t].rows().size(); ++i) {
        const auto row = g.tables[t].rows()[i];
        const auto slot = g.tables[t].slot(i);
        for (std::size_t j = 0; j < w; ++j) {
          grad_leaks += !mask.masks.keep[t][row * w + j] && slot[j] != 0.0f;
        }
      }
    }
  };
  hooks.after_step = [&](EmbeddingModel<float>& model) {
    ++steps;
    const auto tables = model.tables();
    for (std::size_t t = 0; t < kNumTables; ++t) {
      for (std::size_t i = 0; i < tables[t]->size(); ++i) {
        violations += !mask.masks.keep[t][i] && tables[t]->values[i] != 0.0f;
      }
    }
  };
  const auto r = finetune(m, mask, s, cfg, hooks);
  EXPECT_GT(steps, 3u);
  EXPECT_EQ(violations, 0u);
  EXPECT_EQ(grad_leaks, 0u);
  EXPECT_LE(count_nonzero(r.model), mask.total() - mask.pruned());
  EXPECT_NE(r.model, m);  // kept weights did train
}

TEST(Report, CountsAndWriters) {
  auto m = init_model<float>(ModelKind::kRotatE, 16, 50, 4, 1);
  const auto mask = build_mask(random_sensitivity(m, 6), 0.67);
  apply_mask(m, mask);
  auto r = prune_report(m, mask);
  EXPECT_EQ(r.parameters_total, m.parameter_count());
  EXPECT_EQ(r.parameters_nonzero, r.parameters_total - mask.pruned());
  EXPECT_LE(r.parameters_nonzero, r.parameters_total);
  EXPECT_EQ(r.checkpoint_bytes_dense, dense_checkpoint_bytes(m));
  EXPECT_LT(r.checkpoint_bytes_sparse, r.checkpoint_bytes_dense);
  EXPECT_LT(r.macs_sparse, r.macs_dense);
  r.pre_prune_hits10 = 0.5;
  std::ostringstream kv, csv;
  write_prune_report_kv(r, kv);
  write_prune_report_csv(r, csv);
  EXPECT_NE(kv.str().find("pre_prune_hits@10 = 0.5"), std::string::npos);
  EXPECT_NE(kv.str().find("post_finetune_hits@10 = nan"), std::string::npos);
  EXPECT_EQ(csv.str().rfind("pruning_ratio,parameters_total,", 0), 0u);
}

TEST(Storage, SparseRoundTripAndSizes) {
  const auto dir = fs::temp_directory_path();
  auto base = init_model<float>(ModelKind::kRotatE, 32, 300, 6, 3);
  for (double ratio : {0.0, 0.3, 0.5, 0.67, 0.9}) {
    auto m = base;
    const auto mask = build_mask(random_sensitivity(m, 7), ratio);
    apply_mask(m, mask);
    const auto path = (dir / "kgedge_sparse.ckpt").string();
    const auto bytes = save_sparse(m, mask, path);
    const auto loaded = load_sparse<float>(path);
    EXPECT_EQ(loaded.model, m) << ratio;
    ASSERT_TRUE(loaded.masks.has_value());
    EXPECT_EQ(*loaded.masks, mask.masks);
    // Re-saving is byte-identical.
    const auto again = (dir / "kgedge_sparse2.ckpt").string();
    save_sparse(loaded.model, mask, again);
    EXPECT_EQ(read_file(path), read_file(again));
    const auto dense = dense_checkpoint_bytes(m);
    if (ratio == 0.0) { EXPECT_FALSE(loaded.sparse); }
    if (ratio > 0.5) { EXPECT_LT(bytes, dense); }
    if (ratio >= 0.67) { EXPECT_LE(double(bytes), 0.40 * double(dense)); }
  }
  std::string junk = "NOTACKPT" + std::string(60, '\0');
  EXPECT_THROW(decode_checkpoint<float>(junk), Error);
}

}  // namespace
}  // namespace kgedge
