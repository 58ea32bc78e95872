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

#ifndef KGEDGE_SYNTH_GRAPH_HPP_
#define KGEDGE_SYNTH_GRAPH_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "kgedge/common.hpp"
#include "kgedge/triple_store.hpp"

namespace kgedge {

// Generative relation families. Each one emits a fixed set of relations:
//   kSpouse       spouse_of in both directions
//   kParentChild  parent_of (parent -> child) and child_of (child -> parent)
//   kSibling      sibling_of for every ordered pair of distinct siblings
//   kWorksAs      works_as (person -> occupation), one per person
//   kLivesIn      lives_in (person -> location), one per person
enum class RelationRule { kSpouse, kParentChild, kSibling, kWorksAs, kLivesIn };

enum class EntityType : std::uint8_t { kPerson, kOccupation, kLocation };

struct SynthConfig {
  std::size_t num_people = 4950;
  std::size_t num_occupations = 11;
  std::size_t num_locations = 39;
  std::vector<RelationRule> relation_rules = {
      RelationRule::kSpouse, RelationRule::kParentChild, RelationRule::kSibling,
      RelationRule::kWorksAs, RelationRule::kLivesIn};
  double noise_rate = 0.02;
  std::uint64_t seed = 20240601;

  // Household shape: children per couple uniform in [min, max]; a spouse is
  // drawn from the pool of unmarried children with `spouse_reuse`.
  std::size_t min_children = 1;
  std::size_t max_children = 5;
  double spouse_reuse = 0.95;
  // Share of people whose occupation is the catch-all "unknown" class, and
  // chance that a child follows a parent's occupation otherwise.
  double unknown_occupation_share = 0.4;
  double occupation_inheritance = 0.5;

  bool has_rule(RelationRule rule) const {
    return std::find(relation_rules.begin(), relation_rules.end(), rule) !=
           relation_rules.end();
  }
};

struct SynthGraph {
  TripleStore store;
  // Indexed by entity id of `store`.
  std::vector<EntityType> entity_types;
  std::size_t clean_triples = 0;
  std::size_t noise_triples = 0;
  std::size_t households = 0;
};

inline std::string person_label(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "person_%06zu", i);
  return buf;
}

inline std::string occupation_label(std::size_t i) {
  if (i == 0) return "occupation_unknown";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "occupation_%02zu", i);
  return buf;
}

inline std::string location_label(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "location_%03zu", i);
  return buf;
}

namespace detail {

struct Person {
  std::optional<std::size_t> birth_household;
  std::optional<std::size_t> married_household;
  std::size_t occupation = 0;
};

struct Household {
  std::size_t spouse_a = 0;
  std::size_t spouse_b = 0;
  std::vector<std::size_t> children;
  std::size_t location = 0;
};

inline std::size_t draw_occupation(Rng& rng, const SynthConfig& config,
                                   const std::vector<Person>& people,
                                   const Household* parents) {
  if (config.num_occupations == 1 || rng.bernoulli(config.unknown_occupation_share)) {
    return 0;
  }
  if (parents != nullptr && rng.bernoulli(config.occupation_inheritance)) {
    const auto& parent =
        people[rng.bernoulli(0.5) ? parents->spouse_a : parents->spouse_b];
    if (parent.occupation != 0) return parent.occupation;
  }
  return 1 + rng.uniform_index(config.num_occupations - 1);
}

}  // namespace detail

inline void validate(const SynthConfig& config) {
  if (!(config.noise_rate >= 0.0 && config.noise_rate <= 1.0)) {
    throw Error(ErrorCode::kConfig, "noise_rate must lie in [0, 1]");
  }
  if (config.num_people == 0 || config.num_occupations == 0 ||
      config.num_locations == 0) {
    throw Error(ErrorCode::kConfig, "entity counts must be positive");
  }
  if (config.num_people < 2 &&
      (config.has_rule(RelationRule::kSpouse) ||
       config.has_rule(RelationRule::kParentChild) ||
       config.has_rule(RelationRule::kSibling))) {
    throw Error(ErrorCode::kConfig, "family rules need at least two people");
  }
  if (config.min_children > config.max_children) {
    throw Error(ErrorCode::kConfig, "min_children exceeds max_children");
  }
  if (!(config.spouse_reuse >= 0.0 && config.spouse_reuse <= 1.0) ||
      !(config.unknown_occupation_share >= 0.0 &&
        config.unknown_occupation_share <= 1.0) ||
      !(config.occupation_inheritance >= 0.0 &&
        config.occupation_inheritance <= 1.0)) {
    throw Error(ErrorCode::kConfig, "probabilities must lie in [0, 1]");
  }
  if (config.relation_rules.empty()) {
    throw Error(ErrorCode::kConfig, "at least one relation rule is required");
  }
}

// Builds a multi-generation household graph. Founding couples are created
// fresh; later couples are mostly drawn from the unmarried children of
// earlier households, so most people are both a child and a parent.
inline SynthGraph generate(const SynthConfig& config) {
  validate(config);
  Rng rng(config.seed);

  std::vector<detail::Person> people;
  std::vector<detail::Household> households;
  std::vector<std::size_t> pool;  // unmarried children

  auto new_person = [&]() -> std::optional<std::size_t> {
    if (people.size() >= config.num_people) return std::nullopt;
    people.emplace_back();
    return people.size() - 1;
  };
  auto take_from_pool = [&](std::optional<std::size_t> avoid_household)
      -> std::optional<std::size_t> {
    for (int attempt = 0; attempt < 4 && !pool.empty(); ++attempt) {
      const auto slot = rng.uniform_index(pool.size());
      const auto candidate = pool[slot];
      if (avoid_household && people[candidate].birth_household == avoid_household) {
        continue;
      }
      pool[slot] = pool.back();
      pool.pop_back();
      return candidate;
    }
    return std::nullopt;
  };
  auto pick_spouse = [&](std::optional<std::size_t> avoid_household)
      -> std::optional<std::size_t> {
    if (!pool.empty() && rng.bernoulli(config.spouse_reuse)) {
      if (auto p = take_from_pool(avoid_household)) return p;
    }
    return new_person();
  };

  while (people.size() < config.num_people) {
    const auto a = pick_spouse(std::nullopt);
    if (!a) break;
    const auto b = pick_spouse(people[*a].birth_household);
    if (!b) {
      // Out of fresh people: the last unmatched spouse stays single.
      if (people[*a].birth_household) pool.push_back(*a);
      break;
    }
    detail::Household h;
    h.spouse_a = *a;
    h.spouse_b = *b;
    h.location = rng.uniform_index(config.num_locations);
    const auto id = households.size();
    people[*a].married_household = id;
    people[*b].married_household = id;
    const auto want = config.min_children +
                      rng.uniform_index(config.max_children - config.min_children + 1);
    for (std::size_t c = 0; c < want; ++c) {
      const auto child = new_person();
      if (!child) break;
      people[*child].birth_household = id;
      h.children.push_back(*child);
      pool.push_back(*child);
    }
    households.push_back(std::move(h));
  }
  // A lone person (num_people odd with no pool) is still a valid entity.
  if (people.empty()) people.emplace_back();

  // Occupations in creation order so parents are assigned before children.
  for (std::size_t p = 0; p < people.size(); ++p) {
    const auto& birth = people[p].birth_household;
    people[p].occupation = detail::draw_occupation(
        rng, config, people, birth ? &households[*birth] : nullptr);
  }

  std::vector<std::array<std::string, 3>> clean;
  auto emit = [&](std::string h, const char* r, std::string t) {
    clean.push_back({std::move(h), r, std::move(t)});
  };
  for (const auto& h : households) {
    const auto a = person_label(h.spouse_a);
    const auto b = person_label(h.spouse_b);
    if (config.has_rule(RelationRule::kSpouse)) {
      emit(a, "spouse_of", b);
      emit(b, "spouse_of", a);
    }
    if (config.has_rule(RelationRule::kParentChild)) {
      for (auto c : h.children) {
        const auto child = person_label(c);
        emit(a, "parent_of", child);
        emit(b, "parent_of", child);
        emit(child, "child_of", a);
        emit(child, "child_of", b);
      }
    }
    if (config.has_rule(RelationRule::kSibling)) {
      for (auto x : h.children) {
        for (auto y : h.children) {
          if (x != y) emit(person_label(x), "sibling_of", person_label(y));
        }
      }
    }
  }
  for (std::size_t p = 0; p < people.size(); ++p) {
    if (config.has_rule(RelationRule::kWorksAs)) {
      emit(person_label(p), "works_as", occupation_label(people[p].occupation));
    }
    if (config.has_rule(RelationRule::kLivesIn)) {
      const auto& person = people[p];
      std::size_t location = rng.uniform_index(config.num_locations);
      if (person.married_household) {
        location = households[*person.married_household].location;
      } else if (person.birth_household) {
        location = households[*person.birth_household].location;
      }
      emit(person_label(p), "lives_in", location_label(location));
    }
  }

  SynthGraph out;
  TripleStoreBuilder builder;
  for (const auto& [h, r, t] : clean) builder.add(h, r, t);
  out.clean_triples = builder.size();
  out.households = households.size();

  // Noise: random type-consistent facts from the enabled families.
  const auto noise_target =
      static_cast<std::size_t>(std::llround(config.noise_rate * out.clean_triples));
  struct Family {
    const char* relation;
    EntityType tail_type;
  };
  std::vector<Family> families;
  if (config.has_rule(RelationRule::kSpouse)) families.push_back({"spouse_of", EntityType::kPerson});
  if (config.has_rule(RelationRule::kParentChild)) {
    families.push_back({"parent_of", EntityType::kPerson});
    families.push_back({"child_of", EntityType::kPerson});
  }
  if (config.has_rule(RelationRule::kSibling)) families.push_back({"sibling_of", EntityType::kPerson});
  if (config.has_rule(RelationRule::kWorksAs)) families.push_back({"works_as", EntityType::kOccupation});
  if (config.has_rule(RelationRule::kLivesIn)) families.push_back({"lives_in", EntityType::kLocation});
  std::size_t attempts = 0;
  while (out.noise_triples < noise_target && attempts < 100 * (noise_target + 1)) {
    ++attempts;
    const auto& family = families[rng.uniform_index(families.size())];
    const auto head = person_label(rng.uniform_index(people.size()));
    std::string tail;
    switch (family.tail_type) {
      case EntityType::kPerson: tail = person_label(rng.uniform_index(people.size())); break;
      case EntityType::kOccupation: tail = occupation_label(rng.uniform_index(config.num_occupations)); break;
      case EntityType::kLocation: tail = location_label(rng.uniform_index(config.num_locations)); break;
    }
    if (head == tail) continue;
    if (builder.add(head, family.relation, tail)) ++out.noise_triples;
  }

  out.store = std::move(builder).finish();
  out.entity_types.resize(out.store.num_entities());
  for (std::uint32_t e = 0; e < out.store.num_entities(); ++e) {
    const auto& label = out.store.entities.label(e);
    out.entity_types[e] = label.starts_with("person_")       ? EntityType::kPerson
                          : label.starts_with("occupation_") ? EntityType::kOccupation
                                                             : EntityType::kLocation;
  }
  return out;
}

enum class CorruptionKind { kHeadSwap, kTailSwap, kRelationSwap };

inline std::string_view corruption_kind_name(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::kHeadSwap: return "head-swap";
    case CorruptionKind::kTailSwap: return "tail-swap";
    case CorruptionKind::kRelationSwap: return "relation-swap";
  }
  return "?";
}

struct CorruptionLabel {
  std::size_t triple_index = 0;
  CorruptionKind kind = CorruptionKind::kHeadSwap;
  Triple original;
};

struct CorruptedStore {
  TripleStore store;
  std::vector<CorruptionLabel> labels;  // sorted by triple_index
};

// Replaces round(fraction * |test|) test triples by type-plausible swaps that
// do not collide with any clean triple. `entity_types` may be empty, in which
// case all entities form one class.
inline CorruptedStore inject_corruptions(const TripleStore& store,
                                         std::span<const EntityType> entity_types,
                                         double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::kConfig, "corruption fraction must lie in (0, 1)");
  }
  if (!entity_types.empty() && entity_types.size() != store.num_entities()) {
    throw Error(ErrorCode::kShape, "entity type table does not match store");
  }
  CorruptedStore out{store, {}};
  const auto count =
      static_cast<std::size_t>(std::llround(fraction * store.test.size()));
  if (count == 0) return out;

  auto type_of = [&](std::uint32_t e) {
    return entity_types.empty() ? EntityType::kPerson : entity_types[e];
  };
  std::vector<std::vector<std::uint32_t>> by_type(3);
  for (std::uint32_t e = 0; e < store.num_entities(); ++e) {
    by_type[static_cast<int>(type_of(e))].push_back(e);
  }
  // Relations compatible with a (head type, tail type) signature.
  std::set<std::tuple<std::uint32_t, int, int>> signatures;
  for (const auto& t : store.triples) {
    signatures.emplace(t.relation, static_cast<int>(type_of(t.head)),
                       static_cast<int>(type_of(t.tail)));
  }

  Rng rng(seed);
  std::vector<std::size_t> positions(store.test);
  rng.shuffle(std::span<std::size_t>(positions));
  positions.resize(count);
  std::sort(positions.begin(), positions.end());

  TripleSet taken = store.triple_set();
  for (const auto index : positions) {
    const Triple original = store.triples[index];
    bool done = false;
    for (int attempt = 0; attempt < 200 && !done; ++attempt) {
      const auto kind = static_cast<CorruptionKind>(rng.uniform_index(3));
      Triple candidate = original;
      if (kind == CorruptionKind::kRelationSwap) {
        if (store.num_relations() < 2) continue;
        candidate.relation =
            static_cast<std::uint32_t>(rng.uniform_index(store.num_relations()));
        if (!signatures.contains({candidate.relation,
                                  static_cast<int>(type_of(original.head)),
                                  static_cast<int>(type_of(original.tail))})) {
          continue;
        }
      } else {
        auto& slot = kind == CorruptionKind::kHeadSwap ? candidate.head : candidate.tail;
        const auto& pool = by_type[static_cast<int>(type_of(slot))];
        slot = pool[rng.uniform_index(pool.size())];
      }
      if (candidate == original || taken.contains(candidate)) continue;
      taken.insert(candidate);
      out.store.triples[index] = candidate;
      out.labels.push_back({index, kind, original});
      done = true;
    }
    if (!done) {
      throw Error(ErrorCode::kGeneration,
                  "no non-colliding corruption found for triple " +
                      std::to_string(index));
    }
  }
  return out;
}

inline void write_corruption_labels(const TripleStore& clean_store,
                                    std::span<const CorruptionLabel> labels,
                                    std::ostream& out) {
  out << "index,kind,orig_head,orig_rel,orig_tail\n";
  for (const auto& l : labels) {
    out << l.triple_index << ',' << corruption_kind_name(l.kind) << ','
        << detail::csv_field(clean_store.entities.label(l.original.head)) << ','
        << detail::csv_field(clean_store.relations.label(l.original.relation)) << ','
        << detail::csv_field(clean_store.entities.label(l.original.tail)) << '\n';
  }
}

}  // namespace kgedge

#endif  // KGEDGE_SYNTH_GRAPH_HPP_
