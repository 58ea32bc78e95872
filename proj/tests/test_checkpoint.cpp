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

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "kgedge/checkpoint.hpp"

namespace kgedge {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("kgedge_ck_" + name);
}

// Random keep mask with roughly `keep_rate` of positions kept.
template <typename Real>
TableMasks random_masks(const EmbeddingModel<Real>& m, double keep_rate, std::uint64_t seed) {
  Rng rng(seed);
  TableMasks masks;
  const auto tables = m.tables();
  for (std::size_t t = 0; t < kNumTables; ++t) {
    if (tables[t]->size() == 0) continue;
    masks.keep[t].resize(tables[t]->size());
    for (std::size_t i = 0; i < tables[t]->size(); ++i) masks.keep[t][i] = rng.bernoulli(keep_rate);
  }
  return masks;
}

template <typename Real>
EmbeddingModel<Real> zeroed(EmbeddingModel<Real> m, const TableMasks& masks) {
  auto tables = m.tables();
  for (std::size_t t = 0; t < kNumTables; ++t) {
    for (std::size_t i = 0; i < masks.keep[t].size(); ++i) {
      if (!masks.keep[t][i]) tables[t]->values[i] = Real(0);
    }
  }
  return m;
}

TEST(Checkpoint, DenseRoundTripEveryKind) {
  for (auto kind : kAllModelKinds) {
    const auto m = init_model<float>(kind, 6, 11, 3, 17);
    const auto bytes = encode_checkpoint(m);
    EXPECT_EQ(bytes.size(), dense_checkpoint_bytes(m));
    const auto back = decode_checkpoint<float>(bytes);
    EXPECT_EQ(back.model, m) << model_kind_name(kind);
    EXPECT_FALSE(back.masks.has_value());
    EXPECT_FALSE(back.sparse);
  }
}

TEST(Checkpoint, DoubleModelsKeepPrecision) {
  const auto m = init_model<double>(ModelKind::kTransR, 4, 5, 2, 3);
  EXPECT_EQ(decode_checkpoint<double>(encode_checkpoint(m)).model, m);
  // Reading a 64-bit checkpoint as float narrows each value.
  const auto narrowed = decode_checkpoint<float>(encode_checkpoint(m)).model;
  EXPECT_EQ(narrowed, convert_model<float>(m));
}

TEST(Checkpoint, HeaderLayout) {
  const auto m = init_model<float>(ModelKind::kRotatE, 7, 9, 2, 1, NormKind::kL2);
  const auto bytes = encode_checkpoint(m);
  ASSERT_GE(bytes.size(), kCheckpointHeaderBytes);
  EXPECT_EQ(std::memcmp(bytes.data(), "KGECKPT", 8), 0);
  auto u32 = [&](std::size_t off) {
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + off, 4);
    return v;
  };
  auto u64 = [&](std::size_t off) {
    std::uint64_t v;
    std::memcpy(&v, bytes.data() + off, 8);
    return v;
  };
  EXPECT_EQ(u32(8), kCheckpointVersion);
  EXPECT_EQ(u32(12), static_cast<std::uint32_t>(ModelKind::kRotatE));
  EXPECT_EQ(u64(16), 7u);
  EXPECT_EQ(u64(24), 9u);
  EXPECT_EQ(u64(32), 2u);
  EXPECT_EQ(u32(40), static_cast<std::uint32_t>(NormKind::kL2));
  EXPECT_EQ(u32(44), 0u);
  // First entity value follows the header directly.
  float first;
  std::memcpy(&first, bytes.data() + kCheckpointHeaderBytes, 4);
  EXPECT_EQ(first, m.entities.values[0]);
}

TEST(Checkpoint, MaskedDenseAndSparseRoundTrip) {
  for (auto kind : kAllModelKinds) {
    for (double keep : {0.0, 0.05, 0.33, 0.9, 1.0}) {
      auto m = init_model<float>(kind, 5, 13, 4, 2);
      const auto masks = random_masks(m, keep, 99);
      m = zeroed(m, masks);
      m.masked = true;
      for (auto enc : {CheckpointEncoding::kDense, CheckpointEncoding::kSparse,
                       CheckpointEncoding::kAuto}) {
        const auto bytes = encode_checkpoint(m, &masks, enc);
        const auto back = decode_checkpoint<float>(bytes);
        EXPECT_EQ(back.model, m) << model_kind_name(kind) << " keep " << keep;
        ASSERT_TRUE(back.masks.has_value());
        EXPECT_EQ(*back.masks, masks);
      }
      const auto dense = encode_checkpoint(m, &masks, CheckpointEncoding::kDense);
      const auto sparse = encode_checkpoint(m, &masks, CheckpointEncoding::kSparse);
      const auto best = encode_checkpoint(m, &masks, CheckpointEncoding::kAuto);
      EXPECT_EQ(best.size(), std::min(dense.size(), sparse.size()));
      EXPECT_EQ(dense.size(), dense_checkpoint_bytes(m, &masks));
    }
  }
}

TEST(Checkpoint, SparseBodyShrinksWithPruning) {
  auto m = init_model<float>(ModelKind::kTransE, 32, 400, 5, 1);
  const auto masks = random_masks(m, 0.33, 5);
  m = zeroed(m, masks);
  const auto sparse = encode_checkpoint(m, &masks, CheckpointEncoding::kSparse);
  EXPECT_LT(double(sparse.size()), 0.45 * double(dense_checkpoint_bytes(m)));
}

TEST(Checkpoint, SparseNeedsMask) {
  const auto m = init_model<float>(ModelKind::kTransE, 3, 3, 1, 1);
  EXPECT_THROW(encode_checkpoint(m, nullptr, CheckpointEncoding::kSparse), Error);
}

TEST(Checkpoint, MaskShapeMismatchIsShapeError) {
  const auto m = init_model<float>(ModelKind::kTransE, 3, 3, 1, 1);
  auto masks = random_masks(m, 0.5, 1);
  masks.keep[0].pop_back();
  try {
    encode_checkpoint(m, &masks, CheckpointEncoding::kDense);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
  }
}

void expect_format_error(const std::string& bytes) {
  try {
    decode_checkpoint<float>(bytes);
    FAIL() << "decoded malformed bytes";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
  }
}

TEST(Checkpoint, RejectsMalformedBytes) {
  const auto m = init_model<float>(ModelKind::kDistMult, 4, 6, 2, 1);
  const auto good = encode_checkpoint(m);
  expect_format_error("");
  expect_format_error(good.substr(0, 20));
  expect_format_error(good.substr(0, good.size() - 1));
  expect_format_error(good + "x");
  auto bad = good;
  bad[0] = 'X';
  expect_format_error(bad);
  bad = good;
  bad[8] = 9;  // version
  expect_format_error(bad);
  bad = good;
  bad[12] = 42;  // kind
  expect_format_error(bad);
  bad = good;
  bad[40] = 7;  // norm
  expect_format_error(bad);
  bad = good;
  bad[44] = static_cast<char>(0x80);  // unknown flag bit
  expect_format_error(bad);
  bad = good;
  std::memset(bad.data() + 24, 0xff, 8);  // absurd entity count
  expect_format_error(bad);
}

TEST(Checkpoint, FileRoundTripAndIoErrors) {
  const auto path = temp_file("file.ckpt").string();
  const auto m = init_model<float>(ModelKind::kPairRE, 8, 10, 3, 4);
  const auto n = save_checkpoint(m, path);
  EXPECT_EQ(n, fs::file_size(path));
  EXPECT_EQ(load_checkpoint<float>(path).model, m);
  // Re-saving the loaded model is byte-identical.
  const auto again = temp_file("file2.ckpt").string();
  save_checkpoint(load_checkpoint<float>(path).model, again);
  EXPECT_EQ(read_file(path), read_file(again));
  try {
    save_checkpoint(m, "/nonexistent-dir/x.ckpt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
  EXPECT_THROW(load_checkpoint<float>("/nonexistent-dir/x.ckpt"), Error);
}

TEST(Checkpoint, Fnv1aReferenceValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(Vocabulary, RoundTrip) {
  TripleStoreBuilder b;
  b.add("alice", "knows", "bob");
  b.add("bob", "lives in", "old town");
  const auto s = std::move(b).finish();
  const auto path = temp_file("vocab").string();
  write_vocab(s, path);
  const auto v = read_vocab(path);
  EXPECT_EQ(v.entities, s.entities);
  EXPECT_EQ(v.relations, s.relations);
}

TEST(Vocabulary, RejectsGapsAndJunk) {
  const auto path = temp_file("vocab_bad").string();
  {
    std::ofstream out(path);
    out << "E\t0\ta\nE\t2\tb\n";
  }
  EXPECT_THROW(read_vocab(path), ParseError);
  {
    std::ofstream out(path);
    out << "Q\t0\ta\n";
  }
  EXPECT_THROW(read_vocab(path), ParseError);
  {
    std::ofstream out(path);
    out << "E\t0\ta\nE\t1\ta\n";
  }
  EXPECT_THROW(read_vocab(path), ParseError);
}

}  // namespace
}  // namespace kgedge
