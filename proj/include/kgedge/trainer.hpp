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

#ifndef KGEDGE_TRAINER_HPP_
#define KGEDGE_TRAINER_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "kgedge/common.hpp"
#include "kgedge/evaluator.hpp"
#include "kgedge/models.hpp"
#include "kgedge/triple_store.hpp"

namespace kgedge {

enum class LossKind { kMarginRanking, kSelfAdversarialLogistic };
enum class SamplerKind { kBasicUniform, kSelfAdversarial };

struct TrainConfig {
  ModelKind model = ModelKind::kRotatE;
  std::optional<NormKind> norm;
  std::size_t dim = 400;
  double learning_rate = 0.001;
  std::size_t batch_size = 5000;
  std::size_t num_negatives = 50;
  std::size_t epochs = 100;
  double l2_coefficient = 0.01;
  LossKind loss = LossKind::kSelfAdversarialLogistic;
  double margin = 1.0;
  double adversarial_temperature = 1.0;
  // Added to distance-model scores inside the logistic loss, so a negated
  // distance d enters as gamma - d.
  double logistic_gamma = 12.0;
  SamplerKind sampler = SamplerKind::kSelfAdversarial;
  std::size_t patience = 3;
  std::size_t eval_every = 5;
  std::uint64_t seed = 1;

  std::size_t num_threads = 1;
  // Early-stopping evaluation uses at most this many validation triples.
  std::size_t validation_max_triples = 500;
  std::size_t negative_retries = 10;
};

// Named profiles. "paper-basic" is the model-comparison setting and
// "paper-tuned-rotate" the tuned RotatE setting.
inline TrainConfig profile_paper_basic() { return TrainConfig{}; }

inline TrainConfig profile_paper_tuned_rotate() {
  TrainConfig c;
  c.model = ModelKind::kRotatE;
  c.dim = 976;
  c.batch_size = 4096;
  c.num_negatives = 8;
  c.sampler = SamplerKind::kBasicUniform;
  return c;
}

inline TrainConfig named_profile(std::string_view name) {
  if (name == "paper-basic") return profile_paper_basic();
  if (name == "paper-tuned-rotate") return profile_paper_tuned_rotate();
  throw Error(ErrorCode::kConfig, "unknown profile '" + std::string(name) + "'");
}

inline void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0)) throw Error(ErrorCode::kConfig, "learning_rate must be > 0");
  if (c.batch_size < 1) throw Error(ErrorCode::kConfig, "batch_size must be >= 1");
  if (c.num_negatives < 1) throw Error(ErrorCode::kConfig, "num_negatives must be >= 1");
  if (c.patience < 1) throw Error(ErrorCode::kConfig, "patience must be >= 1");
  if (c.eval_every < 1) throw Error(ErrorCode::kConfig, "eval_every must be >= 1");
  if (c.dim < 1) throw Error(ErrorCode::kConfig, "dim must be >= 1");
  if (!(c.l2_coefficient >= 0)) throw Error(ErrorCode::kConfig, "l2_coefficient must be >= 0");
}

// Applies one key=value setting. Returns false for keys it does not own.
inline bool apply_setting(TrainConfig& c, std::string_view key, const std::string& value) {
  using detail::parse_real;
  using detail::parse_uint;
  if (key == "model") {
    auto kind = parse_model_kind(value);
    if (!kind) throw Error(ErrorCode::kConfig, "unknown model '" + value + "'");
    c.model = *kind;
  } else if (key == "norm" || key == "norm_kind") {
    if (value == "L1" || value == "l1") c.norm = NormKind::kL1;
    else if (value == "L2" || value == "l2") c.norm = NormKind::kL2;
    else throw Error(ErrorCode::kConfig, "norm must be L1 or L2");
  } else if (key == "dim") {
    c.dim = parse_uint(key, value);
  } else if (key == "learning_rate") {
    c.learning_rate = parse_real(key, value);
  } else if (key == "batch_size") {
    c.batch_size = parse_uint(key, value);
  } else if (key == "num_negatives") {
    c.num_negatives = parse_uint(key, value);
  } else if (key == "epochs") {
    c.epochs = parse_uint(key, value);
  } else if (key == "l2_coefficient") {
    c.l2_coefficient = parse_real(key, value);
  } else if (key == "loss_kind") {
    if (value == "margin-ranking") c.loss = LossKind::kMarginRanking;
    else if (value == "self-adversarial-logistic") c.loss = LossKind::kSelfAdversarialLogistic;
    else throw Error(ErrorCode::kConfig, "unknown loss_kind '" + value + "'");
  } else if (key == "margin") {
    c.margin = parse_real(key, value);
  } else if (key == "adversarial_temperature") {
    c.adversarial_temperature = parse_real(key, value);
  } else if (key == "logistic_gamma") {
    c.logistic_gamma = parse_real(key, value);
  } else if (key == "sampler_kind") {
    if (value == "basic-uniform") c.sampler = SamplerKind::kBasicUniform;
    else if (value == "self-adversarial") c.sampler = SamplerKind::kSelfAdversarial;
    else throw Error(ErrorCode::kConfig, "unknown sampler_kind '" + value + "'");
  } else if (key == "patience") {
    c.patience = parse_uint(key, value);
  } else if (key == "eval_every") {
    c.eval_every = parse_uint(key, value);
  } else if (key == "seed") {
    c.seed = parse_uint(key, value);
  } else if (key == "num_threads") {
    c.num_threads = parse_uint(key, value);
  } else if (key == "validation_max_triples") {
    c.validation_max_triples = parse_uint(key, value);
  } else if (key == "negative_retries") {
    c.negative_retries = parse_uint(key, value);
  } else {
    return false;
  }
  return true;
}

// Uniform one-slot corruption with bounded resampling against known facts.
class NegativeSampler {
 public:
  NegativeSampler(std::size_t num_entities, const TripleSet* known, std::size_t retries,
                  std::uint64_t seed)
      : num_entities_(num_entities), known_(known), retries_(retries), rng_(seed) {}

  // Appends k negatives per positive to `out`, grouped by positive.
  void sample(std::span<const Triple> positives, std::size_t k, std::vector<Triple>& out) {
    out.reserve(out.size() + positives.size() * k);
    for (const auto& pos : positives) {
      for (std::size_t j = 0; j < k; ++j) out.push_back(corrupt(pos));
    }
  }

  Triple corrupt(const Triple& pos) {
    Triple neg = pos;
    for (std::size_t attempt = 0; attempt <= retries_; ++attempt) {
      neg = pos;
      auto& slot = rng_.bernoulli(0.5) ? neg.head : neg.tail;
      slot = draw_other(slot);
      if (known_ == nullptr || !known_->contains(neg)) break;
    }
    return neg;
  }

 private:
  std::uint32_t draw_other(std::uint32_t original) {
    if (num_entities_ < 2) return original;
    auto e = static_cast<std::uint32_t>(rng_.uniform_index(num_entities_ - 1));
    return e >= original ? e + 1 : e;
  }

  std::size_t num_entities_;
  const TripleSet* known_;
  std::size_t retries_;
  Rng rng_;
};

struct LossValue {
  double total = 0;
  double data = 0;
  double regularization = 0;
};

namespace detail {

inline double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

// Per-positive negative weights: softmax of temperature * score under the
// self-adversarial sampler, uniform 1/k otherwise.
template <typename Real>
void negative_weights(std::span<const Real> negative_scores, std::size_t k,
                      const TrainConfig& config, std::span<double> out) {
  const auto n_pos = negative_scores.size() / k;
  for (std::size_t i = 0; i < n_pos; ++i) {
    auto s = negative_scores.subspan(i * k, k);
    auto w = out.subspan(i * k, k);
    if (config.sampler == SamplerKind::kBasicUniform) {
      std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(k));
      continue;
    }
    double peak = -std::numeric_limits<double>::infinity();
    for (auto v : s) peak = std::max(peak, config.adversarial_temperature * double(v));
    double sum = 0;
    for (std::size_t j = 0; j < k; ++j) {
      w[j] = std::exp(config.adversarial_temperature * double(s[j]) - peak);
      sum += w[j];
    }
    for (auto& v : w) v /= sum;
  }
}

namespace detail {

// Data term over positives [begin, end), normalized by `total_positives`.
template <typename Real>
double data_term(const EmbeddingModel<Real>& model, std::span<const Triple> positives,
                 std::span<const Triple> negatives, std::size_t k, const TrainConfig& config,
                 std::span<const double> fixed_weights, std::size_t total_positives,
                 ModelGradient<Real>& grad) {
  Scorer<Real> scorer(model);
  const auto b = positives.size();
  std::vector<Real> pos_scores(b), neg_scores(b * k);
  for (std::size_t i = 0; i < b; ++i) pos_scores[i] = scorer.score(positives[i]);
  for (std::size_t i = 0; i < b * k; ++i) neg_scores[i] = scorer.score(negatives[i]);

  std::vector<double> weights(b * k);
  if (!fixed_weights.empty()) {
    std::copy(fixed_weights.begin(), fixed_weights.end(), weights.begin());
  } else {
    negative_weights<Real>(neg_scores, k, config, weights);
  }

  const double scale = 1.0 / static_cast<double>(total_positives);
  const double shift = config.loss == LossKind::kSelfAdversarialLogistic &&
                               is_distance_model(model.kind)
                           ? config.logistic_gamma
                           : 0.0;
  double loss = 0;
  std::vector<Real> pos_up(b, Real(0)), neg_up(b * k, Real(0));
  for (std::size_t i = 0; i < b; ++i) {
    const double sp = pos_scores[i] + shift;
    double pos_grad = 0;
    if (config.loss == LossKind::kSelfAdversarialLogistic) {
      loss += softplus(-sp);
      pos_grad = -sigmoid(-sp);
    }
    for (std::size_t j = 0; j < k; ++j) {
      const auto idx = i * k + j;
      const double sn = neg_scores[idx] + shift;
      const double w = weights[idx];
      if (config.loss == LossKind::kSelfAdversarialLogistic) {
        loss += w * softplus(sn);
        neg_up[idx] = static_cast<Real>(scale * w * sigmoid(sn));
      } else {
        const double hinge = config.margin - sp + sn;
        if (hinge > 0) {
          loss += w * hinge;
          pos_grad -= w;
          neg_up[idx] = static_cast<Real>(scale * w);
        }
      }
    }
    pos_up[i] = static_cast<Real>(scale * pos_grad);
  }
  for (std::size_t i = 0; i < b; ++i) scorer.accumulate_grad(positives[i], pos_up[i], grad);
  for (std::size_t i = 0; i < b * k; ++i) {
    scorer.accumulate_grad(negatives[i], neg_up[i], grad);
  }
  return loss * scale;
}

}  // namespace detail

// Loss over a batch of positives and k negatives per positive (grouped by
// positive), plus l2_coefficient times the mean squared norm of every row the
// batch touches. When `fixed_weights` is non-empty it replaces the computed
// negative weights; the computed weights never carry gradient either way.
template <typename Real>
LossValue compute_loss(const EmbeddingModel<Real>& model, std::span<const Triple> positives,
                       std::span<const Triple> negatives, const TrainConfig& config,
                       ModelGradient<Real>& grad, std::span<const double> fixed_weights = {}) {
  const auto b = positives.size();
  if (b == 0) throw Error(ErrorCode::kShape, "empty positive batch");
  const auto k = negatives.size() / b;
  if (k == 0 || negatives.size() != b * k) {
    throw Error(ErrorCode::kShape, "negatives must be a positive multiple of positives");
  }
  if (!fixed_weights.empty() && fixed_weights.size() != negatives.size()) {
    throw Error(ErrorCode::kShape, "fixed weights do not match negatives");
  }
  grad.clear();
  LossValue value;

  const auto threads = std::max<std::size_t>(1, std::min(config.num_threads, b));
  if (threads == 1) {
    value.data = detail::data_term(model, positives, negatives, k, config, fixed_weights, b, grad);
  } else {
    // Shards reduce in a fixed order so results do not depend on scheduling.
    std::vector<ModelGradient<Real>> partial(threads, ModelGradient<Real>(model));
    std::vector<double> losses(threads, 0.0);
    std::vector<std::thread> pool;
    const auto chunk = (b + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const auto lo = std::min(b, t * chunk);
      const auto hi = std::min(b, lo + chunk);
      pool.emplace_back([&, t, lo, hi] {
        if (lo == hi) return;
        auto fw = fixed_weights.empty() ? fixed_weights : fixed_weights.subspan(lo * k, (hi - lo) * k);
        losses[t] = detail::data_term(model, positives.subspan(lo, hi - lo),
                                      negatives.subspan(lo * k, (hi - lo) * k), k, config, fw, b,
                                      partial[t]);
      });
    }
    for (auto& th : pool) th.join();
    for (std::size_t t = 0; t < threads; ++t) {
      value.data += losses[t];
      grad.add(partial[t]);
    }
  }

  if (config.l2_coefficient > 0) {
    const auto rows = grad.touched_rows();
    const double coeff = config.l2_coefficient / static_cast<double>(rows);
    auto tables = model.tables();
    double sq = 0;
    for (std::size_t t = 0; t < kNumTables; ++t) {
      auto& g = grad.tables[t];
      for (std::size_t i = 0; i < g.rows().size(); ++i) {
        const auto row = tables[t]->row(g.rows()[i]);
        auto out = g.slot(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
          sq += double(row[j]) * double(row[j]);
          out[j] += static_cast<Real>(2.0 * coeff * double(row[j]));
        }
      }
    }
    value.regularization = coeff * sq;
  }
  value.total = value.data + value.regularization;
  return value;
}

template <typename Real>
LossValue compute_loss(const EmbeddingModel<Real>& model, std::span<const Triple> positives,
                       std::span<const Triple> negatives, const TrainConfig& config,
                       std::span<const double> fixed_weights = {}) {
  ModelGradient<Real> grad(model);
  return compute_loss(model, positives, negatives, config, grad, fixed_weights);
}

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Lazy Adam: moments live per parameter row and are allocated on first
// touch. Only rows present in a gradient advance their step count.
template <typename Real>
class AdamState {
 public:
  struct RowMoments {
    std::uint64_t steps = 0;
    std::vector<Real> m;
    std::vector<Real> v;
  };

  AdamState() = default;
  explicit AdamState(const EmbeddingModel<Real>& model, AdamParams params = {})
      : params_(params) {
    auto tables = model.tables();
    for (std::size_t t = 0; t < kNumTables; ++t) rows_[t].resize(tables[t]->rows);
  }

  void step(EmbeddingModel<Real>& model, const ModelGradient<Real>& grad, double learning_rate) {
    auto tables = model.tables();
    for (std::size_t t = 0; t < kNumTables; ++t) {
      const auto& g = grad.tables[t];
      if (rows_[t].size() != tables[t]->rows) {
        throw Error(ErrorCode::kShape, "optimizer state does not match model");
      }
      for (std::size_t i = 0; i < g.rows().size(); ++i) {
        const auto r = g.rows()[i];
        auto& state = rows_[t][r];
        if (!state) {
          state = std::make_unique<RowMoments>();
          state->m.assign(g.width(), Real(0));
          state->v.assign(g.width(), Real(0));
        }
        ++state->steps;
        const double c1 = 1.0 - std::pow(params_.beta1, double(state->steps));
        const double c2 = 1.0 - std::pow(params_.beta2, double(state->steps));
        auto row = tables[t]->row(r);
        const auto gr = g.slot(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
          const double gj = gr[j];
          const double m = params_.beta1 * state->m[j] + (1.0 - params_.beta1) * gj;
          const double v = params_.beta2 * state->v[j] + (1.0 - params_.beta2) * gj * gj;
          state->m[j] = static_cast<Real>(m);
          state->v[j] = static_cast<Real>(v);
          const double update = learning_rate * (m / c1) / (std::sqrt(v / c2) + params_.epsilon);
          row[j] = static_cast<Real>(double(row[j]) - update);
        }
      }
    }
  }

  const RowMoments* moments(std::size_t table, std::size_t row) const {
    return rows_[table][row].get();
  }

  std::size_t allocated_rows() const {
    std::size_t n = 0;
    for (const auto& t : rows_) {
      for (const auto& r : t) n += r != nullptr;
    }
    return n;
  }

 private:
  AdamParams params_;
  std::array<std::vector<std::unique_ptr<RowMoments>>, kNumTables> rows_;
};

template <typename Real>
void adam_step(EmbeddingModel<Real>& model, const ModelGradient<Real>& grad,
               AdamState<Real>& state, double learning_rate) {
  state.step(model, grad, learning_rate);
}

struct TrainReport {
  std::size_t epochs_run = 0;
  double final_train_loss = 0;
  double best_validation_metric = 0;  // filtered HITS@10 unless overridden
  double wall_clock_train_seconds = 0;
  std::vector<double> loss_curve;
  std::size_t evaluations = 0;
  bool early_stopped = false;
};

template <typename Real>
struct TrainHooks {
  // Replaces the default validation metric (filtered HITS@10 on the valid
  // split). Higher is better.
  std::function<double(const EmbeddingModel<Real>&)> validation_metric;
  // Runs on each batch gradient before the optimizer sees it.
  std::function<void(ModelGradient<Real>&)> before_step;
  // Runs after every optimizer step and constraint projection.
  std::function<void(EmbeddingModel<Real>&)> after_step;
  std::function<void(std::size_t epoch, double loss)> on_epoch;
};

template <typename Real>
struct TrainResult {
  EmbeddingModel<Real> model;
  TrainReport report;
};

// Mini-batch training with early stopping on the validation metric. Starts
// from `initial` when given, otherwise from init_model(config). Returns the
// best evaluated snapshot when validation is active.
template <typename Real>
TrainResult<Real> train(const TripleStore& store, const TrainConfig& config,
                        const TrainHooks<Real>& hooks = {},
                        std::optional<EmbeddingModel<Real>> initial = std::nullopt) {
  validate(config);
  if (store.train.empty()) throw Error(ErrorCode::kEmptyStore, "train split is empty");
  Stopwatch watch;
  TrainResult<Real> result;
  result.model = initial ? std::move(*initial)
                         : init_model<Real>(config.model, config.dim, store.num_entities(),
                                            store.num_relations(), config.seed, config.norm);
  auto& model = result.model;
  auto& report = result.report;
  if (model.num_entities() < store.num_entities() ||
      model.num_relations() < store.num_relations()) {
    throw Error(ErrorCode::kShape, "model tables smaller than the store dictionaries");
  }
  if (config.epochs == 0) {
    report.wall_clock_train_seconds = watch.seconds();
    return result;
  }

  std::function<double(const EmbeddingModel<Real>&)> metric = hooks.validation_metric;
  std::optional<KnownTriples> known_all;
  std::vector<Triple> validation;
  if (!metric) {
    if (store.valid.empty()) {
      log_warning("validation split is empty; early stopping disabled");
    } else {
      known_all.emplace(store);
      validation = sample_triples(store.split_triples(Split::kValid),
                                  config.validation_max_triples, config.seed ^ 0x5EEDULL);
      metric = [&](const EmbeddingModel<Real>& m) {
        EvalOptions options;
        options.rank.num_threads = config.num_threads;
        return evaluate(m, *known_all, validation, options).hits.at(10);
      };
    }
  }

  const auto train_triples = store.split_triples(Split::kTrain);
  const TripleSet known_train(train_triples.begin(), train_triples.end());
  Rng rng(config.seed ^ 0x7A11ULL);
  NegativeSampler sampler(store.num_entities(), &known_train, config.negative_retries,
                          rng.next());
  AdamState<Real> adam(model);
  ModelGradient<Real> grad(model);

  std::vector<std::size_t> order(train_triples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Triple> positives, negatives;
  std::optional<EmbeddingModel<Real>> best;
  double best_metric = -std::numeric_limits<double>::infinity();
  std::size_t bad_evaluations = 0;
  std::size_t batch_index = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto end = std::min(order.size(), start + config.batch_size);
      positives.clear();
      for (auto i = start; i < end; ++i) positives.push_back(train_triples[order[i]]);
      negatives.clear();
      sampler.sample(positives, config.num_negatives, negatives);
      const auto loss = compute_loss(model, positives, negatives, config, grad);
      if (!std::isfinite(loss.total)) throw NonFiniteLossError(batch_index);
      if (hooks.before_step) hooks.before_step(grad);
      adam.step(model, grad, config.learning_rate);
      project_constraints(model, grad);
      if (hooks.after_step) hooks.after_step(model);
      epoch_loss += loss.total;
      ++batches;
      ++batch_index;
    }
    epoch_loss /= static_cast<double>(batches);
    report.loss_curve.push_back(epoch_loss);
    report.final_train_loss = epoch_loss;
    report.epochs_run = epoch + 1;
    if (hooks.on_epoch) hooks.on_epoch(epoch, epoch_loss);

    const bool last = epoch + 1 == config.epochs;
    if (metric && ((epoch + 1) % config.eval_every == 0 || last)) {
      const double value = metric(model);
      ++report.evaluations;
      if (value > best_metric) {
        best_metric = value;
        best = model;
        bad_evaluations = 0;
      } else if (++bad_evaluations >= config.patience) {
        report.early_stopped = !last;
        break;
      }
    }
  }
  if (best) {
    model = std::move(*best);
    report.best_validation_metric = best_metric;
  }
  report.wall_clock_train_seconds = watch.seconds();
  return result;
}

inline void write_train_report(const TrainReport& r, std::ostream& out) {
  const auto old_precision = out.precision(10);
  out << "epochs_run = " << r.epochs_run << '\n';
  out << "final_train_loss = " << r.final_train_loss << '\n';
  out << "best_validation_hits@10 = " << r.best_validation_metric << '\n';
  out << "evaluations = " << r.evaluations << '\n';
  out << "early_stopped = " << (r.early_stopped ? "true" : "false") << '\n';
  out << "wall_clock_train_seconds = " << r.wall_clock_train_seconds << '\n';
  out.precision(old_precision);
}

inline void write_loss_curve_csv(const TrainReport& r, std::ostream& out) {
  const auto old_precision = out.precision(17);
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < r.loss_curve.size(); ++i) {
    out << i + 1 << ',' << r.loss_curve[i] << '\n';
  }
  out.precision(old_precision);
}

}  // namespace kgedge

#endif  // KGEDGE_TRAINER_HPP_
