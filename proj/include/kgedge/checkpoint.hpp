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

// Binary model checkpoints.
//
// Layout (all integers little-endian):
//
//   magic        8 bytes  "KGECKPT\0"
//   version      u32      1
//   kind         u32      ModelKind
//   dim          u64
//   entities     u64
//   relations    u64
//   norm         u32      NormKind
//   flags        u32      bit0 masked, bit1 sparse body, bit2 64-bit reals
//
// Tables follow in order entity, relation, projection (TransR only); each
// table's shape is implied by (kind, dim, counts).
//
// Dense body:  every table's values, then, when masked, one mask section per
//              table.
// Sparse body: per table, a mask section followed by the values of kept
//              positions in row-major order. Kept positions are recovered
//              from the mask, so no per-value index is stored.
//
// Mask section: u8 encoding (0 raw bitmap LSB-first, 1 run lengths), u64
// byte count, payload. Run lengths are LEB128 varints alternating
// keep/prune runs, starting with a (possibly empty) keep run. The writer
// picks the shorter encoding per table.

#ifndef KGEDGE_CHECKPOINT_HPP_
#define KGEDGE_CHECKPOINT_HPP_

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kgedge/common.hpp"
#include "kgedge/models.hpp"

namespace kgedge {

inline constexpr char kCheckpointMagic[8] = {'K', 'G', 'E', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderBytes = 48;

enum CheckpointFlags : std::uint32_t {
  kFlagMasked = 1u << 0,
  kFlagSparse = 1u << 1,
  kFlagDouble = 1u << 2,
};

// Keep bits per parameter table (true = keep). Same shapes as the tables.
struct TableMasks {
  std::array<std::vector<bool>, kNumTables> keep;

  friend bool operator==(const TableMasks&, const TableMasks&) = default;
};

enum class CheckpointEncoding { kDense, kSparse, kAuto };

template <typename Real>
struct Checkpoint {
  EmbeddingModel<Real> model;
  std::optional<TableMasks> masks;
  bool sparse = false;
};

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    bytes_.append(buf, sizeof(T));
  }
  void put_bytes(const char* data, std::size_t n) { bytes_.append(data, n); }
  void put_varint(std::uint64_t v) {
    while (v >= 0x80) {
      bytes_.push_back(static_cast<char>((v & 0x7F) | 0x80));
      v >>= 7;
    }
    bytes_.push_back(static_cast<char>(v));
  }
  std::string& bytes() { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string_view get_bytes(std::size_t n) {
    need(n);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint64_t get_varint() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      const auto byte = static_cast<std::uint8_t>(get<char>());
      v |= static_cast<std::uint64_t>(byte & 0x7F) << shift;
      if (!(byte & 0x80)) return v;
    }
    throw Error(ErrorCode::kFormat, "varint too long");
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::kFormat, "checkpoint truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline std::string encode_bitmap(const std::vector<bool>& keep) {
  std::string out((keep.size() + 7) / 8, '\0');
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) out[i / 8] = static_cast<char>(out[i / 8] | (1 << (i % 8)));
  }
  return out;
}

inline std::string encode_runs(const std::vector<bool>& keep) {
  ByteWriter w;
  bool current = true;
  std::size_t run = 0;
  for (bool bit : keep) {
    if (bit == current) {
      ++run;
    } else {
      w.put_varint(run);
      current = bit;
      run = 1;
    }
  }
  w.put_varint(run);
  return std::move(w.bytes());
}

inline void write_mask_section(ByteWriter& w, const std::vector<bool>& keep) {
  const auto bitmap = encode_bitmap(keep);
  const auto runs = encode_runs(keep);
  const bool use_runs = runs.size() < bitmap.size();
  const auto& payload = use_runs ? runs : bitmap;
  w.put<std::uint8_t>(use_runs ? 1 : 0);
  w.put<std::uint64_t>(payload.size());
  w.put_bytes(payload.data(), payload.size());
}

inline std::size_t mask_section_bytes(const std::vector<bool>& keep) {
  return 9 + std::min(encode_bitmap(keep).size(), encode_runs(keep).size());
}

inline std::vector<bool> read_mask_section(ByteReader& r, std::size_t count) {
  const auto encoding = r.get<std::uint8_t>();
  const auto length = r.get<std::uint64_t>();
  const auto payload = r.get_bytes(length);
  std::vector<bool> keep(count);
  if (encoding == 0) {
    if (length != (count + 7) / 8) throw Error(ErrorCode::kFormat, "bitmap size mismatch");
    for (std::size_t i = 0; i < count; ++i) {
      keep[i] = (static_cast<std::uint8_t>(payload[i / 8]) >> (i % 8)) & 1;
    }
  } else if (encoding == 1) {
    ByteReader runs(payload);
    std::size_t pos = 0;
    bool current = true;
    while (!runs.done()) {
      const auto run = runs.get_varint();
      if (run > count - pos) throw Error(ErrorCode::kFormat, "mask runs overflow table");
      for (std::size_t i = 0; i < run; ++i) keep[pos + i] = current;
      pos += run;
      current = !current;
    }
    if (pos != count) throw Error(ErrorCode::kFormat, "mask runs do not cover table");
  } else {
    throw Error(ErrorCode::kFormat, "unknown mask encoding");
  }
  return keep;
}

inline std::size_t table_count(ModelKind kind) {
  return kind == ModelKind::kTransR ? 3 : 2;
}

template <typename Real>
void check_masks(const EmbeddingModel<Real>& model, const TableMasks& masks) {
  auto tables = model.tables();
  for (std::size_t i = 0; i < kNumTables; ++i) {
    if (masks.keep[i].size() != tables[i]->size()) {
      throw Error(ErrorCode::kShape, "mask shape does not match model table " +
                                         std::to_string(i));
    }
  }
}

template <typename Real>
std::string encode_checkpoint(const EmbeddingModel<Real>& model, const TableMasks* masks,
                              bool sparse) {
  if (sparse && masks == nullptr) {
    throw Error(ErrorCode::kConfig, "sparse checkpoints need a mask");
  }
  if (masks) check_masks(model, *masks);
  ByteWriter w;
  w.put_bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.kind));
  w.put<std::uint64_t>(model.dim);
  w.put<std::uint64_t>(model.num_entities());
  w.put<std::uint64_t>(model.num_relations());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.norm));
  std::uint32_t flags = 0;
  if (masks) flags |= kFlagMasked;
  if (sparse) flags |= kFlagSparse;
  if (sizeof(Real) == 8) flags |= kFlagDouble;
  w.put<std::uint32_t>(flags);

  const auto tables = model.tables();
  const auto n_tables = table_count(model.kind);
  if (!sparse) {
    for (std::size_t t = 0; t < n_tables; ++t) {
      const auto& v = tables[t]->values;
      w.put_bytes(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(Real));
    }
    if (masks) {
      for (std::size_t t = 0; t < n_tables; ++t) write_mask_section(w, masks->keep[t]);
    }
  } else {
    for (std::size_t t = 0; t < n_tables; ++t) {
      const auto& keep = masks->keep[t];
      write_mask_section(w, keep);
      const auto& v = tables[t]->values;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (keep[i]) w.put<Real>(v[i]);
      }
    }
  }
  return std::move(w.bytes());
}

template <typename Real>
Checkpoint<Real> decode_checkpoint_as(ByteReader& r, ModelKind kind, std::size_t dim,
                                      std::size_t n_ent, std::size_t n_rel, NormKind norm,
                                      std::uint32_t flags) {
  Checkpoint<Real> out;
  auto& m = out.model;
  m.kind = kind;
  m.dim = dim;
  m.norm = norm;
  m.entities = ParameterTable<Real>(n_ent, entity_width(kind, dim));
  m.relations = ParameterTable<Real>(n_rel, relation_width(kind, dim));
  if (kind == ModelKind::kTransR) m.projections = ParameterTable<Real>(n_rel, dim * dim);
  m.masked = (flags & kFlagMasked) != 0;
  out.sparse = (flags & kFlagSparse) != 0;

  auto tables = m.tables();
  const auto n_tables = table_count(kind);
  if (!out.sparse) {
    for (std::size_t t = 0; t < n_tables; ++t) {
      auto& v = tables[t]->values;
      const auto raw = r.get_bytes(v.size() * sizeof(Real));
      std::memcpy(v.data(), raw.data(), raw.size());
    }
    if (m.masked) {
      out.masks.emplace();
      for (std::size_t t = 0; t < n_tables; ++t) {
        out.masks->keep[t] = read_mask_section(r, tables[t]->size());
      }
    }
  } else {
    out.masks.emplace();
    for (std::size_t t = 0; t < n_tables; ++t) {
      auto& keep = out.masks->keep[t];
      keep = read_mask_section(r, tables[t]->size());
      auto& v = tables[t]->values;
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = keep[i] ? r.get<Real>() : Real(0);
      }
    }
  }
  if (!r.done()) throw Error(ErrorCode::kFormat, "trailing bytes after checkpoint body");
  return out;
}

}  // namespace detail

template <typename Real>
std::string encode_checkpoint(const EmbeddingModel<Real>& model,
                              const TableMasks* masks = nullptr,
                              CheckpointEncoding encoding = CheckpointEncoding::kDense) {
  if (encoding == CheckpointEncoding::kAuto) {
    if (masks == nullptr) return detail::encode_checkpoint(model, nullptr, false);
    auto dense = detail::encode_checkpoint(model, masks, false);
    auto sparse = detail::encode_checkpoint(model, masks, true);
    return sparse.size() < dense.size() ? sparse : dense;
  }
  return detail::encode_checkpoint(model, masks, encoding == CheckpointEncoding::kSparse);
}

// Decodes a checkpoint, converting the stored real width to Real if needed.
template <typename Real>
Checkpoint<Real> decode_checkpoint(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (bytes.size() < kCheckpointHeaderBytes ||
      std::memcmp(r.get_bytes(8).data(), kCheckpointMagic, 8) != 0) {
    throw Error(ErrorCode::kFormat, "bad checkpoint magic");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kFormat, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto kind_raw = r.get<std::uint32_t>();
  if (kind_raw > static_cast<std::uint32_t>(ModelKind::kPairRE)) {
    throw Error(ErrorCode::kFormat, "unknown model kind " + std::to_string(kind_raw));
  }
  const auto kind = static_cast<ModelKind>(kind_raw);
  const auto dim = r.get<std::uint64_t>();
  const auto n_ent = r.get<std::uint64_t>();
  const auto n_rel = r.get<std::uint64_t>();
  const auto norm_raw = r.get<std::uint32_t>();
  if (norm_raw != 1 && norm_raw != 2) throw Error(ErrorCode::kFormat, "unknown norm kind");
  const auto norm = static_cast<NormKind>(norm_raw);
  const auto flags = r.get<std::uint32_t>();
  if (flags & ~std::uint32_t{7}) throw Error(ErrorCode::kFormat, "unknown checkpoint flags");
  if (dim == 0 || n_ent == 0 || n_rel == 0 || dim > (1u << 16) ||
      n_ent > (std::uint64_t{1} << 32) || n_rel > (std::uint64_t{1} << 32) ||
      n_ent * entity_width(kind, dim) > (std::uint64_t{1} << 32)) {
    throw Error(ErrorCode::kFormat, "implausible checkpoint dimensions");
  }
  if (flags & kFlagDouble) {
    auto ck = detail::decode_checkpoint_as<double>(r, kind, dim, n_ent, n_rel, norm, flags);
    if constexpr (std::is_same_v<Real, double>) {
      return ck;
    } else {
      return {convert_model<Real>(ck.model), std::move(ck.masks), ck.sparse};
    }
  }
  auto ck = detail::decode_checkpoint_as<float>(r, kind, dim, n_ent, n_rel, norm, flags);
  if constexpr (std::is_same_v<Real, float>) {
    return ck;
  } else {
    return {convert_model<Real>(ck.model), std::move(ck.masks), ck.sparse};
  }
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

template <typename Real>
std::size_t save_checkpoint(const EmbeddingModel<Real>& model, const std::string& path,
                            const TableMasks* masks = nullptr,
                            CheckpointEncoding encoding = CheckpointEncoding::kDense) {
  const auto bytes = encode_checkpoint(model, masks, encoding);
  write_file(path, bytes);
  return bytes.size();
}

template <typename Real>
Checkpoint<Real> load_checkpoint(const std::string& path) {
  return decode_checkpoint<Real>(read_file(path));
}

// Byte size of the dense encoding, computed from the format definition.
template <typename Real>
std::size_t dense_checkpoint_bytes(const EmbeddingModel<Real>& model,
                                   const TableMasks* masks = nullptr) {
  std::size_t bytes = kCheckpointHeaderBytes + model.parameter_count() * sizeof(Real);
  if (masks) {
    for (std::size_t t = 0; t < detail::table_count(model.kind); ++t) {
      bytes += detail::mask_section_bytes(masks->keep[t]);
    }
  }
  return bytes;
}

// FNV-1a over the encoded bytes; used to detect model mutation.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Label sidecar written next to a checkpoint so a deployed model can map
// labels to ids without the training data. Lines: "E|R <tab> id <tab> label".
inline void write_vocab(const TripleStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  for (std::uint32_t i = 0; i < store.num_entities(); ++i) {
    out << "E\t" << i << '\t' << store.entities.label(i) << '\n';
  }
  for (std::uint32_t i = 0; i < store.num_relations(); ++i) {
    out << "R\t" << i << '\t' << store.relations.label(i) << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

struct Vocabulary {
  Dictionary entities;
  Dictionary relations;
};

inline Vocabulary read_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for reading");
  Vocabulary v;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line, '\t');
    if (fields.size() != 3 || (fields[0] != "E" && fields[0] != "R")) {
      throw ParseError(line_no, "malformed vocabulary line");
    }
    auto& dict = fields[0] == "E" ? v.entities : v.relations;
    if (fields[1] != std::to_string(dict.size()) || dict.find(fields[2]).has_value()) {
      throw ParseError(line_no, "vocabulary ids must be dense and unique");
    }
    dict.intern(fields[2]);
  }
  return v;
}

}  // namespace kgedge

#endif  // KGEDGE_CHECKPOINT_HPP_
