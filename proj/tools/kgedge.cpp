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

// kgedge command-line driver.
//
// Exit status: 0 success, 1 pdqa flagged at least one record, 2 usage or
// configuration error, 3 any other failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kgedge/http.hpp"
#include "kgedge/kgedge.hpp"

namespace fs = std::filesystem;
using namespace kgedge;

namespace {

constexpr int kExitFlagged = 1;
constexpr int kExitUsage = 2;
constexpr int kExitFailure = 3;

struct Options {
  std::string config_path;
  std::string model;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string profile = "paper-basic";
  double ratio = 0.67;
  double threshold = kDefaultPdqaThreshold;
  bool filtered = true;
  bool deterministic = false;
  std::vector<std::string> settings;
  std::size_t eval_limit = 0;
};

struct Settings {
  TrainConfig train;
  RuntimeConfig runtime;
};

void apply_pair(Settings& s, const std::string& key, const std::string& value) {
  if (apply_setting(s.train, key, value) || apply_setting(s.runtime, key, value)) return;
  throw Error(ErrorCode::kConfig, "unknown setting '" + key + "'");
}

// Profile, then the config file, then --set pairs, then dedicated flags.
Settings resolve(const Options& o, bool for_finetune = false) {
  Settings s;
  s.train = named_profile(o.profile);
  if (for_finetune) s.train = finetune_config(s.train);
  s.runtime.pdqa_threshold = o.threshold;
  if (!o.config_path.empty()) {
    for (const auto& [k, v] : read_kv_file(o.config_path)) apply_pair(s, k, v);
  }
  for (const auto& kv : o.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kConfig, "--set expects key=value");
    apply_pair(s, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) s.train.seed = *o.seed;
  if (o.deterministic) s.train.num_threads = 1;
  validate(s.train);
  return s;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw Error(ErrorCode::kConfig, std::string(flag) + " is required");
}

// A split directory, an exported node/edge directory, or a single TSV file.
TripleStore load_store(const std::string& path) {
  require(path, "--data");
  if (fs::is_directory(path)) {
    if (fs::exists(fs::path(path) / "train.tsv")) return read_split_dir(path);
    if (fs::exists(fs::path(path) / "nodes.csv")) {
      return ingest_graph((fs::path(path) / "nodes.csv").string(),
                          (fs::path(path) / "edges.csv").string());
    }
    throw Error(ErrorCode::kIo, "'" + path + "' holds neither a split nor a graph export");
  }
  return ingest(path);
}

Checkpoint<float> load_model(const std::string& path, const TripleStore* store = nullptr) {
  require(path, "--model");
  auto ckpt = load_checkpoint<float>(path);
  if (store != nullptr && (store->num_entities() != ckpt.model.num_entities() ||
                           store->num_relations() != ckpt.model.num_relations())) {
    throw Error(ErrorCode::kShape, "data dictionaries do not match the checkpoint tables");
  }
  return ckpt;
}

void copy_vocab(const std::string& from_ckpt, const std::string& to_ckpt) {
  const auto src = from_ckpt + ".vocab";
  if (fs::exists(src)) fs::copy_file(src, to_ckpt + ".vocab", fs::copy_options::overwrite_existing);
}

template <typename Fn>
void write_text(const std::string& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  fn(out);
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

EvalOptions eval_options(const Options& o, const Settings& s) {
  EvalOptions e;
  e.rank.filtered = o.filtered;
  e.rank.num_threads = s.train.num_threads;
  e.max_triples = o.eval_limit;
  e.sample_seed = s.train.seed;
  return e;
}

double test_hits10(const EmbeddingModel<float>& m, const TripleStore& store, const EvalOptions& e) {
  return evaluate(m, store, Split::kTest, e).hits.at(10);
}

int cmd_ingest(const Options& o) {
  require(o.out, "--out");
  const auto store = load_store(o.data);
  write_tsv(store, o.out);
  std::cout << "ingested " << store.triples.size() << " triples, " << store.num_entities()
            << " entities, " << store.num_relations() << " relations\n";
  return 0;
}

int cmd_synth(const Options& o, std::size_t people, double noise) {
  require(o.out, "--out");
  SynthConfig c;
  c.num_people = people;
  c.noise_rate = noise;
  if (o.seed) c.seed = *o.seed;
  const auto g = generate(c);
  write_tsv(g.store, o.out);
  std::cout << "generated " << g.store.triples.size() << " triples (" << g.noise_triples
            << " noise) over " << g.store.num_entities() << " entities\n";
  return 0;
}

int cmd_split(const Options& o, const std::vector<double>& ratios) {
  require(o.out, "--out");
  if (ratios.size() != 3) throw Error(ErrorCode::kConfig, "--ratios expects three values");
  const auto store = split(load_store(o.data), {ratios[0], ratios[1], ratios[2]}, o.seed.value_or(1));
  fs::create_directories(o.out);
  write_split_dir(store, o.out);
  std::cout << "train " << store.train.size() << ", valid " << store.valid.size() << ", test "
            << store.test.size() << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  require(o.out, "--out");
  const auto s = resolve(o);
  const auto store = load_store(o.data);
  std::optional<EmbeddingModel<float>> initial;
  if (!o.model.empty()) initial = load_model(o.model, &store).model;
  TrainHooks<float> hooks;
  hooks.on_epoch = [](std::size_t epoch, double loss) {
    std::cout << "epoch " << epoch << " loss " << loss << '\n';
  };
  auto result = train<float>(store, s.train, hooks, std::move(initial));
  if (o.deterministic) result.report.wall_clock_train_seconds = 0;
  save_checkpoint(result.model, o.out);
  write_vocab(store, o.out + ".vocab");
  write_text(o.out + ".train.txt", [&](std::ostream& out) { write_train_report(result.report, out); });
  write_text(o.out + ".loss.csv", [&](std::ostream& out) { write_loss_curve_csv(result.report, out); });
  write_train_report(result.report, std::cout);
  return 0;
}

int cmd_eval(const Options& o, const std::string& split_label, const std::string& ranks_path) {
  const auto s = resolve(o);
  const auto store = load_store(o.data);
  const auto ckpt = load_model(o.model, &store);
  Split which = Split::kTest;
  if (split_label == "train") which = Split::kTrain;
  else if (split_label == "valid") which = Split::kValid;
  else if (split_label != "test") throw Error(ErrorCode::kConfig, "--split must be train, valid or test");
  auto report = evaluate(ckpt.model, store, which, eval_options(o, s));
  if (o.deterministic) report.eval_seconds = 0;
  if (!o.out.empty()) {
    write_text(o.out + ".txt", [&](std::ostream& out) { write_report_kv(report, out); });
    write_text(o.out + ".csv", [&](std::ostream& out) { write_report_csv(report, out); });
  }
  if (!ranks_path.empty()) {
    write_text(ranks_path, [&](std::ostream& out) { write_ranks_csv(report, out); });
  }
  write_report_kv(report, std::cout);
  return 0;
}

int cmd_pdqa(const Options& o, const std::string& reference_path, const std::string& save_reference,
             bool per_relation) {
  const auto ckpt = load_model(o.model);
  const auto vocab = read_vocab(o.model + ".vocab");
  const auto batch_store = load_store(o.data);
  // Unknown labels get ids past the model tables, which assess reports as
  // out of vocabulary.
  auto entities = vocab.entities;
  auto relations = vocab.relations;
  std::vector<Triple> batch;
  batch.reserve(batch_store.triples.size());
  for (const auto& t : batch_store.triples) {
    batch.push_back({entities.intern(batch_store.entities.label(t.head)),
                     relations.intern(batch_store.relations.label(t.relation)),
                     entities.intern(batch_store.entities.label(t.tail))});
  }
  AnomalyReport report;
  if (!reference_path.empty()) {
    report = assess_streaming(ckpt.model, load_distribution(reference_path), batch, o.threshold);
  } else {
    report = assess(ckpt.model, batch, AssessOptions{o.threshold, per_relation});
  }
  if (!save_reference.empty()) save_distribution(report.distribution, save_reference);
  if (!o.out.empty()) {
    write_text(o.out, [&](std::ostream& out) { write_anomaly_csv(report, out, &entities, &relations); });
  }
  std::cout << "records = " << report.records.size() << '\n'
            << "flagged = " << report.flagged_count() << '\n'
            << "threshold = " << report.threshold << '\n'
            << "mean = " << report.distribution.mean << '\n'
            << "stddev = " << report.distribution.stddev << '\n';
  return report.flagged_count() > 0 ? kExitFlagged : 0;
}

PruneMask mask_of(const Checkpoint<float>& ckpt) {
  if (!ckpt.masks) throw Error(ErrorCode::kFormat, "checkpoint carries no prune mask");
  PruneMask mask;
  mask.masks = *ckpt.masks;
  mask.pruning_ratio = mask.total() == 0 ? 0.0
                                         : static_cast<double>(mask.pruned()) /
                                               static_cast<double>(mask.total());
  return mask;
}

void emit_prune_report(const PruneReport& r, const std::string& out) {
  write_text(out + ".report.txt", [&](std::ostream& s) { write_prune_report_kv(r, s); });
  write_text(out + ".report.csv", [&](std::ostream& s) { write_prune_report_csv(r, s); });
  write_prune_report_kv(r, std::cout);
}

int cmd_prune(const Options& o, std::size_t num_batches, bool weight_times_gradient, bool per_table) {
  require(o.out, "--out");
  const auto s = resolve(o);
  const auto store = load_store(o.data);
  auto model = load_model(o.model, &store).model;
  const auto e = eval_options(o, s);
  SensitivityOptions so;
  so.num_batches = num_batches;
  so.weight_times_gradient = weight_times_gradient;
  if (o.seed) so.seed = *o.seed;
  const auto sens = sensitivity(model, store, s.train, so);
  const auto mask =
      build_mask(sens, o.ratio, per_table ? PruneScope::kPerTable : PruneScope::kGlobal);
  const double before = test_hits10(model, store, e);
  apply_mask(model, mask);
  auto report = prune_report(model, mask);
  report.pre_prune_hits10 = before;
  report.post_prune_hits10 = test_hits10(model, store, e);
  save_sparse(model, mask, o.out);
  copy_vocab(o.model, o.out);
  emit_prune_report(report, o.out);
  return 0;
}

int cmd_finetune(const Options& o) {
  require(o.out, "--out");
  const auto s = resolve(o, true);
  const auto store = load_store(o.data);
  const auto ckpt = load_model(o.model, &store);
  const auto mask = mask_of(ckpt);
  const auto e = eval_options(o, s);
  const double before = test_hits10(ckpt.model, store, e);
  TrainHooks<float> hooks;
  hooks.on_epoch = [](std::size_t epoch, double loss) {
    std::cout << "epoch " << epoch << " loss " << loss << '\n';
  };
  auto result = finetune<float>(ckpt.model, mask, store, s.train, hooks);
  if (o.deterministic) result.report.wall_clock_train_seconds = 0;
  auto report = prune_report(result.model, mask);
  report.post_prune_hits10 = before;
  report.post_finetune_hits10 = test_hits10(result.model, store, e);
  save_sparse(result.model, mask, o.out);
  copy_vocab(o.model, o.out);
  write_text(o.out + ".train.txt", [&](std::ostream& out) { write_train_report(result.report, out); });
  emit_prune_report(report, o.out);
  return 0;
}

int cmd_export(const Options& o) {
  require(o.out, "--out");
  const auto store = load_store(o.data);
  fs::create_directories(o.out);
  export_graph(store, (fs::path(o.out) / "nodes.csv").string(),
               (fs::path(o.out) / "edges.csv").string());
  std::cout << "exported " << store.num_entities() << " nodes and " << store.triples.size()
            << " edges\n";
  return 0;
}

RuntimeConfig runtime_config(const Options& o, const std::string& reference,
                             const std::string& trusted) {
  auto c = resolve(o).runtime;
  if (!o.model.empty()) c.model_checkpoint_path = o.model;
  if (!reference.empty()) c.reference_distribution_path = reference;
  if (!trusted.empty()) c.trusted_triples_path = trusted;
  validate(c);
  return c;
}

int print_response(const Response& r) {
  std::cout << r.body << '\n';
  return r.status == 200 ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kgedge: knowledge graph embedding, pruning and data-quality checks"};
  app.require_subcommand(1);
  app.fallthrough();
  app.footer("Exit status: 0 ok, 1 pdqa flagged records, 2 usage error, 3 failure.");

  Options o;
  app.add_option("--config", o.config_path, "Key-value settings file")->check(CLI::ExistingFile);
  app.add_option("--model", o.model, "Input checkpoint");
  app.add_option("--data", o.data, "Triple TSV, split directory or graph export directory");
  app.add_option("--out", o.out, "Output path");
  app.add_option("--seed", o.seed, "Seed for generation, splitting, training and sampling");
  app.add_option("--profile", o.profile, "Training profile")
      ->check(CLI::IsMember({"paper-basic", "paper-tuned-rotate"}));
  app.add_option("--ratio", o.ratio, "Pruning ratio")->check(CLI::Range(0.0, 1.0));
  app.add_option("--threshold", o.threshold, "PDQA z threshold");
  app.add_flag("--filtered,!--raw", o.filtered, "Filtered (default) or raw ranking");
  app.add_flag("--deterministic", o.deterministic, "Single thread, timings reported as 0");
  app.add_option("--set", o.settings, "Override one setting, key=value");
  app.add_option("--eval-limit", o.eval_limit, "Evaluate at most this many test triples");

  auto* ingest_cmd = app.add_subcommand("ingest", "Normalize triples into a TSV file");
  auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic benchmark graph");
  std::size_t people = SynthConfig{}.num_people;
  double noise = SynthConfig{}.noise_rate;
  synth_cmd->add_option("--people", people, "Number of person entities");
  synth_cmd->add_option("--noise", noise, "Noise triple rate");

  auto* split_cmd = app.add_subcommand("split", "Seeded train/valid/test split into a directory");
  std::vector<double> ratios{0.8, 0.1, 0.1};
  split_cmd->add_option("--ratios", ratios, "train valid test proportions")->expected(3)->delimiter(',');

  auto* train_cmd = app.add_subcommand("train", "Train an embedding model");
  auto* eval_cmd = app.add_subcommand("eval", "Link prediction metrics");
  std::string split_label = "test", ranks_path;
  eval_cmd->add_option("--split", split_label, "train, valid or test");
  eval_cmd->add_option("--ranks", ranks_path, "Per-query ranks CSV");

  auto* pdqa_cmd = app.add_subcommand("pdqa", "Flag low-confidence triples");
  std::string reference_path, save_reference;
  bool per_relation = false;
  pdqa_cmd->add_option("--reference", reference_path, "Frozen score distribution file");
  pdqa_cmd->add_option("--save-reference", save_reference, "Write the fitted distribution");
  pdqa_cmd->add_flag("--per-relation", per_relation, "Fit one distribution per relation");

  auto* prune_cmd = app.add_subcommand("prune", "Sensitivity pruning");
  std::size_t num_batches = 0;
  bool wtg = false, per_table = false;
  prune_cmd->add_option("--batches", num_batches, "Sensitivity batches (0 = one pass)");
  prune_cmd->add_flag("--weight-times-gradient", wtg, "Rank by |gradient * weight|");
  prune_cmd->add_flag("--per-table", per_table, "Apply the ratio within each table");

  auto* finetune_cmd = app.add_subcommand("finetune", "Masked fine-tuning of a pruned checkpoint");
  auto* export_cmd = app.add_subcommand("export", "Write nodes.csv and edges.csv");

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP inference service");
  std::string trusted;
  serve_cmd->add_option("--reference", reference_path, "Frozen score distribution file");
  serve_cmd->add_option("--trusted", trusted, "Trusted TSV to fit the reference from");

  auto* score_cmd = app.add_subcommand("score", "Score one triple");
  auto* complete_cmd = app.add_subcommand("complete", "Rank candidates for a missing entity");
  std::string head, relation, tail;
  std::optional<long long> k;
  for (auto* sub : {score_cmd, complete_cmd}) {
    sub->add_option("--head", head);
    sub->add_option("--relation", relation)->required();
    sub->add_option("--tail", tail);
    sub->add_option("--reference", reference_path, "Frozen score distribution file");
  }
  complete_cmd->add_option("--k", k, "Number of candidates");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (ingest_cmd->parsed()) return cmd_ingest(o);
    if (synth_cmd->parsed()) return cmd_synth(o, people, noise);
    if (split_cmd->parsed()) return cmd_split(o, ratios);
    if (train_cmd->parsed()) return cmd_train(o);
    if (eval_cmd->parsed()) return cmd_eval(o, split_label, ranks_path);
    if (pdqa_cmd->parsed()) return cmd_pdqa(o, reference_path, save_reference, per_relation);
    if (prune_cmd->parsed()) return cmd_prune(o, num_batches, wtg, per_table);
    if (finetune_cmd->parsed()) return cmd_finetune(o);
    if (export_cmd->parsed()) return cmd_export(o);
    if (serve_cmd->parsed()) {
      const auto service = Service::from_config(runtime_config(o, reference_path, trusted));
      const auto& c = service.config();
      std::cout << "listening on " << c.bind_address << ':' << c.port << std::endl;
      if (!serve(service)) throw Error(ErrorCode::kIo, "cannot bind " + c.bind_address);
      return 0;
    }
    const auto service = Service::from_config(runtime_config(o, reference_path, ""));
    nlohmann::ordered_json body;
    if (!head.empty()) body["head"] = head;
    body["relation"] = relation;
    if (!tail.empty()) body["tail"] = tail;
    if (score_cmd->parsed()) return print_response(service.handle("POST", "/score", body.dump()));
    if (k) body["k"] = *k;
    return print_response(service.handle("POST", "/complete", body.dump()));
  } catch (const Error& e) {
    std::cerr << "kgedge: " << e.what() << '\n';
    return e.code() == ErrorCode::kConfig ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "kgedge: " << e.what() << '\n';
    return kExitFailure;
  }
}
