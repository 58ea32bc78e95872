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

#include <map>
#include <set>
#include <sstream>
#include <string>

#include "kgedge/synth_graph.hpp"

namespace kgedge {
namespace {

bool has(const TripleStore& s, const std::string& h, const std::string& r, const std::string& t) {
  const auto hi = s.entities.find(h), ti = s.entities.find(t);
  const auto ri = s.relations.find(r);
  if (!hi || !ti || !ri) return false;
  return s.triple_set().contains({*hi, *ri, *ti});
}

TEST(Generate, TwoPeopleSpouseBothDirections) {
  SynthConfig c;
  c.num_people = 2;
  c.relation_rules = {RelationRule::kSpouse};
  c.noise_rate = 0;
  const auto g = generate(c);
  EXPECT_TRUE(has(g.store, person_label(0), "spouse_of", person_label(1)));
  EXPECT_TRUE(has(g.store, person_label(1), "spouse_of", person_label(0)));
}

TEST(Generate, IsPureFunctionOfConfig) {
  SynthConfig c;
  c.num_people = 600;
  const auto a = generate(c);
  const auto b = generate(c);
  EXPECT_EQ(a.store, b.store);
  EXPECT_EQ(a.entity_types, b.entity_types);
  c.seed += 1;
  EXPECT_NE(generate(c).store, a.store);
}

TEST(Generate, RulesHoldWithoutNoise) {
  SynthConfig c;
  c.num_people = 800;
  c.noise_rate = 0;
  const auto g = generate(c);
  const auto& s = g.store;
  const auto set = s.triple_set();
  const auto spouse = *s.relations.find("spouse_of");
  const auto parent = *s.relations.find("parent_of");
  const auto child = *s.relations.find("child_of");
  const auto sibling = *s.relations.find("sibling_of");
  const auto works = *s.relations.find("works_as");
  const auto lives = *s.relations.find("lives_in");
  std::map<std::uint32_t, int> works_count, lives_count;
  std::map<std::uint32_t, std::uint32_t> home;
  for (const auto& t : s.triples) {
    if (t.relation == spouse || t.relation == sibling) {
      EXPECT_TRUE(set.contains({t.tail, t.relation, t.head}));
      EXPECT_NE(t.head, t.tail);
    }
    if (t.relation == parent) { EXPECT_TRUE(set.contains({t.tail, child, t.head})); }
    if (t.relation == child) { EXPECT_TRUE(set.contains({t.tail, parent, t.head})); }
    if (t.relation == works) {
      EXPECT_EQ(g.entity_types[t.tail], EntityType::kOccupation);
      ++works_count[t.head];
    }
    if (t.relation == lives) {
      EXPECT_EQ(g.entity_types[t.tail], EntityType::kLocation);
      ++lives_count[t.head];
      home[t.head] = t.tail;
    }
  }
  // Spouses share a home; every person works and lives somewhere exactly once.
  for (const auto& t : s.triples) {
    if (t.relation == spouse) { EXPECT_EQ(home.at(t.head), home.at(t.tail)); }
  }
  for (std::uint32_t e = 0; e < s.num_entities(); ++e) {
    if (g.entity_types[e] != EntityType::kPerson) continue;
    EXPECT_EQ(works_count[e], 1);
    EXPECT_EQ(lives_count[e], 1);
  }
  EXPECT_EQ(g.noise_triples, 0u);
  EXPECT_EQ(g.clean_triples, s.triples.size());
}

TEST(Generate, UnknownOccupationDominates) {
  const auto g = generate(SynthConfig{});
  const auto works = *g.store.relations.find("works_as");
  std::map<std::uint32_t, int> freq;
  for (const auto& t : g.store.triples) {
    if (t.relation == works) ++freq[t.tail];
  }
  const auto unknown = *g.store.entities.find(occupation_label(0));
  for (const auto& [occ, n] : freq) {
    if (occ != unknown) { EXPECT_GT(freq[unknown], 2 * n); }
  }
}

TEST(Generate, DefaultSizeMatchesRuleFanOutExpectation) {
  // Closed form: children per household C ~ U[min, max]. A household adds C
  // people plus the fresh spouses not drawn from the pool, 2 (1 - reuse) in
  // expectation. Per household the rules emit 2 spouse facts, 4C parent/child
  // facts and C(C - 1) ordered sibling pairs; every person adds works_as and
  // lives_in. Noise scales the clean total.
  const SynthConfig c;
  double mean_c = 0, mean_c2 = 0;
  const double span = double(c.max_children - c.min_children + 1);
  for (auto k = c.min_children; k <= c.max_children; ++k) {
    mean_c += double(k) / span;
    mean_c2 += double(k * k) / span;
  }
  const double people_per_household = mean_c + 2.0 * (1.0 - c.spouse_reuse);
  const double households = double(c.num_people) / people_per_household;
  const double per_household = 2.0 + 4.0 * mean_c + (mean_c2 - mean_c);
  const double clean = households * per_household + 2.0 * double(c.num_people);
  const double expected = clean * (1.0 + c.noise_rate);

  const auto g = generate(c);
  const double got = double(g.store.triples.size());
  EXPECT_NEAR(got, expected, 0.10 * expected);
  EXPECT_EQ(g.store.num_entities(), c.num_people + c.num_occupations + c.num_locations);
}

TEST(Generate, NoiseRateControlsNoiseCount) {
  SynthConfig c;
  c.num_people = 1000;
  c.noise_rate = 0.05;
  const auto g = generate(c);
  EXPECT_NEAR(double(g.noise_triples), 0.05 * double(g.clean_triples), 1.0);
}

TEST(Generate, RejectsInvalidConfigs) {
  SynthConfig c;
  c.noise_rate = 1.5;
  EXPECT_THROW(generate(c), Error);
  c = SynthConfig{};
  c.num_people = 1;
  EXPECT_THROW(generate(c), Error);
  c = SynthConfig{};
  c.num_locations = 0;
  EXPECT_THROW(generate(c), Error);
  c = SynthConfig{};
  c.relation_rules.clear();
  EXPECT_THROW(generate(c), Error);
}

SynthGraph split_graph(std::size_t people, std::uint64_t seed) {
  SynthConfig c;
  c.num_people = people;
  auto g = generate(c);
  g.store = split(g.store, SplitRatio{}, seed);
  return g;
}

TEST(Corruption, CountIsRoundedFractionOfTest) {
  const auto g = split_graph(1500, 2);
  const auto out = inject_corruptions(g.store, g.entity_types, 0.01, 9);
  EXPECT_EQ(out.labels.size(),
            static_cast<std::size_t>(std::llround(0.01 * double(g.store.test.size()))));
}

TEST(Corruption, HundredOnTenThousandTest) {
  // Build a store whose test split holds exactly 10,000 triples.
  TripleStoreBuilder b;
  for (int i = 0; i < 10000; ++i) {
    b.add("p" + std::to_string(i), i % 2 ? "r1" : "r0", "p" + std::to_string((i * 7 + 1) % 10000));
  }
  auto s = std::move(b).finish();
  s.test = s.train;
  s.train.clear();
  const auto out = inject_corruptions(s, {}, 0.01, 1);
  EXPECT_EQ(out.labels.size(), 100u);
}

TEST(Corruption, TinyFractionRoundsToZero) {
  const auto g = split_graph(300, 1);
  const auto out = inject_corruptions(g.store, g.entity_types, 1e-6, 3);
  EXPECT_TRUE(out.labels.empty());
  EXPECT_EQ(out.store, g.store);
}

TEST(Corruption, AbsentFromCleanGraphAndRestorable) {
  const auto g = split_graph(2000, 4);
  const auto out = inject_corruptions(g.store, g.entity_types, 0.2, 5);
  const auto clean = g.store.triple_set();
  std::set<std::size_t> test_positions(g.store.test.begin(), g.store.test.end());
  auto restored = out.store;
  for (const auto& l : out.labels) {
    const auto& bad = out.store.triples[l.triple_index];
    EXPECT_FALSE(clean.contains(bad));
    EXPECT_TRUE(test_positions.contains(l.triple_index));
    EXPECT_EQ(l.original, g.store.triples[l.triple_index]);
    // Type plausibility: swapped entities keep their type.
    EXPECT_EQ(g.entity_types[bad.head], g.entity_types[l.original.head]);
    EXPECT_EQ(g.entity_types[bad.tail], g.entity_types[l.original.tail]);
    restored.triples[l.triple_index] = l.original;
  }
  EXPECT_EQ(restored, g.store);
}

TEST(Corruption, RejectsBadFraction) {
  const auto g = split_graph(300, 1);
  EXPECT_THROW(inject_corruptions(g.store, g.entity_types, 0.0, 1), Error);
  EXPECT_THROW(inject_corruptions(g.store, g.entity_types, 1.0, 1), Error);
}

TEST(Corruption, ImpossibleSwapIsGenerationError) {
  // One relation, two entities, both orderings present: nothing is free.
  TripleStoreBuilder b;
  b.add("a", "r", "b");
  b.add("b", "r", "a");
  b.add("a", "r", "a");
  b.add("b", "r", "b");
  auto s = std::move(b).finish();
  s.test = s.train;
  try {
    inject_corruptions(s, {}, 0.5, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGeneration);
  }
}

TEST(Corruption, LabelCsv) {
  const auto g = split_graph(500, 1);
  const auto out = inject_corruptions(g.store, g.entity_types, 0.1, 2);
  std::ostringstream csv;
  write_corruption_labels(g.store, out.labels, csv);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "index,kind,orig_head,orig_rel,orig_tail");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, out.labels.size());
}

}  // namespace
}  // namespace kgedge
