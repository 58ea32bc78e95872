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

// End-to-end tour on a small synthetic graph: train, evaluate, check data
// quality, prune and fine-tune.

#include <algorithm>
#include <filesystem>
#include <iostream>

#include "kgedge/kgedge.hpp"

using namespace kgedge;

int main() {
  SynthConfig synth;
  synth.num_people = 800;
  const auto graph = generate(synth);
  const auto store = split(graph.store, SplitRatio{}, 1);
  std::cout << store.triples.size() << " triples, " << store.num_entities() << " entities\n";

  TrainConfig config;
  config.model = ModelKind::kRotatE;
  config.dim = 64;
  config.batch_size = 512;
  config.num_negatives = 16;
  config.learning_rate = 0.01;
  config.epochs = 60;
  auto trained = train<float>(store, config);
  std::cout << "trained " << trained.report.epochs_run << " epochs\n";

  const auto before = evaluate(trained.model, store, Split::kTest);
  std::cout << "test hits@10 " << before.hits.at(10) << ", amri " << before.amri << '\n';

  // Plant 5% corrupted triples in the test split and see how many get flagged.
  const auto dirty = inject_corruptions(store, graph.entity_types, 0.05, 3);
  const auto report = assess(trained.model, dirty.store.split_triples(Split::kTest));
  std::vector<std::size_t> planted;
  for (const auto& label : dirty.labels) {
    const auto& test = dirty.store.test;
    planted.push_back(static_cast<std::size_t>(
        std::find(test.begin(), test.end(), label.triple_index) - test.begin()));
  }
  std::cout << "pdqa flagged " << report.flagged_count() << " of " << report.records.size()
            << ", recall of planted corruptions " << flagged_recall(report, planted) << '\n';

  auto model = trained.model;
  const auto mask = build_mask(sensitivity(model, store, config), 0.5);
  apply_mask(model, mask);
  std::cout << "pruned " << mask.pruned() << " of " << mask.total() << ", hits@10 "
            << evaluate(model, store, Split::kTest).hits.at(10) << '\n';

  config.epochs = 10;
  const auto tuned = finetune<float>(model, mask, store, config);
  std::cout << "fine-tuned hits@10 " << evaluate(tuned.model, store, Split::kTest).hits.at(10)
            << '\n';

  const auto path = (std::filesystem::temp_directory_path() / "quickstart.ckpt").string();
  const auto bytes = save_sparse(tuned.model, mask, path);
  std::cout << "checkpoint " << bytes << " bytes (dense " << dense_checkpoint_bytes(tuned.model)
            << ")\n";
  return 0;
}
