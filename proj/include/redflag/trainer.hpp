/* Copyright 2026 The redflag authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "redflag/batcher.hpp"
#include "redflag/corpus.hpp"
#include "redflag/metrics.hpp"
#include "redflag/model.hpp"
#include "redflag/textproc.hpp"

namespace redflag {

struct TrainConfig {
  double lr = 2e-5;
  int max_epochs = 20;
  int patience = 5;
  std::size_t max_tokens_per_batch = 5000;
  std::size_t max_len = 224;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (max_len < 2) throw ConfigError("max_len must be at least 2");
    if (max_tokens_per_batch < 1) throw ConfigError("max_tokens_per_batch must be at least 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
      throw ConfigError("adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  }
};

/// First/second moment estimates mirroring the parameter store, plus the
/// step counter.
template <typename Scalar>
struct AdamState {
  ParamStore<Scalar> m;
  ParamStore<Scalar> v;
  long t = 0;

  static AdamState init_like(const ParamStore<Scalar>& params) {
    AdamState state;
    state.m = ParamStore<Scalar>::zeros_like(params);
    state.v = ParamStore<Scalar>::zeros_like(params);
    return state;
  }
};

/// One bias-corrected Adam update:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
///   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps).
/// Throws NumericError (naming the tensor) on a non-finite gradient.
template <typename Scalar>
void adam_step(ParamStore<Scalar>& params, const ParamStore<Scalar>& grads,
               AdamState<Scalar>& state, const TrainConfig& cfg) {
  const std::string bad = grads.first_non_finite();
  if (!bad.empty()) throw NumericError("non-finite gradient in tensor '" + bad + "'");

  state.t += 1;
  const Scalar b1 = static_cast<Scalar>(cfg.adam_beta1);
  const Scalar b2 = static_cast<Scalar>(cfg.adam_beta2);
  const Scalar m_corr = Scalar(1) - static_cast<Scalar>(std::pow(cfg.adam_beta1, state.t));
  const Scalar v_corr = Scalar(1) - static_cast<Scalar>(std::pow(cfg.adam_beta2, state.t));
  const Scalar lr = static_cast<Scalar>(cfg.lr);
  const Scalar eps = static_cast<Scalar>(cfg.adam_eps);

  auto p_it = params.items().begin();
  auto m_it = state.m.items().begin();
  auto v_it = state.v.items().begin();
  for (const auto& g_item : grads.items()) {
    if (p_it->name != g_item.name) throw ConfigError("gradient store does not mirror parameters");
    auto& p = p_it->value;
    auto& m = m_it->value;
    auto& v = v_it->value;
    const auto& g = g_item.value;
    m = b1 * m + (Scalar(1) - b1) * g;
    v = (b2 * v.array() + (Scalar(1) - b2) * g.array().square()).matrix();
    p -= (lr * (m.array() / m_corr) / ((v.array() / v_corr).sqrt() + eps)).matrix();
    ++p_it;
    ++m_it;
    ++v_it;
  }
}

/// Stops after `patience` consecutive epochs without strict improvement.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {
    if (patience < 1) throw ConfigError("patience must be at least 1");
  }

  /// Records one epoch's metric; returns true when training should stop.
  bool observe(double metric) {
    ++epoch_;
    if (metric > best_) {
      best_ = metric;
      best_epoch_ = epoch_;
      since_improve_ = 0;
    } else {
      ++since_improve_;
    }
    return since_improve_ >= patience_;
  }

  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }
  int epochs_since_improve() const { return since_improve_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  int since_improve_ = 0;
  double best_ = -std::numeric_limits<double>::infinity();
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_metric = 0.0;
  double seconds = 0.0;
};

struct TrainState {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_metric = 0.0;
  int epochs_since_improve = 0;
  std::vector<EpochStats> history;
  bool diverged = false;
  std::string diagnostic;
};

template <typename Scalar>
struct TrainResult {
  TaskModel<Scalar> model;  // parameters restored to the best epoch
  TrainState state;
};

namespace detail {

template <typename Scalar>
std::vector<int> argmax_rows(const MatX<Scalar>& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    scores.row(r).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

struct EncodedDataset {
  std::vector<TokenSeq> sequences;
  std::vector<Label> labels;
  std::vector<std::size_t> lengths;
};

inline EncodedDataset encode_dataset(const Dataset& dataset, const Vocab& vocab,
                                     std::size_t max_len) {
  EncodedDataset out;
  out.sequences.reserve(dataset.size());
  out.labels.reserve(dataset.size());
  out.lengths.reserve(dataset.size());
  for (const auto& record : dataset.records) {
    out.sequences.push_back(encode(tokenize(record.text), vocab, max_len));
    out.labels.push_back(record.label);
    out.lengths.push_back(out.sequences.back().length());
  }
  return out;
}

}  // namespace detail

/// Eval-mode predictions over a whole dataset, rows in dataset order.
template <typename Scalar>
MatX<Scalar> predict_scores(const TaskModel<Scalar>& model, const Dataset& dataset,
                            const Vocab& vocab, std::size_t max_len,
                            std::size_t max_tokens_per_batch) {
  const auto encoded = detail::encode_dataset(dataset, vocab, max_len);
  const BatchPlan plan = plan_batches(encoded.lengths, max_tokens_per_batch, 0, false);

  MatX<Scalar> all(dataset.size(), model.head.output_dim);
  for (const auto& group : plan.groups) {
    const Batch batch = collate(encoded.sequences, group, Vocab::kPadId);
    const MatX<Scalar> scores = forward(model, batch, false, 0);
    for (std::size_t r = 0; r < group.size(); ++r)
      all.row(static_cast<Eigen::Index>(group[r])) = scores.row(static_cast<Eigen::Index>(r));
  }
  return all;
}

/// Computes every metric applicable to the task kind on the given dataset.
template <typename Scalar>
MetricsReport evaluate_task(const TaskModel<Scalar>& model, const Dataset& dataset,
                            const Vocab& vocab, std::size_t max_len,
                            std::size_t max_tokens_per_batch) {
  if (dataset.size() == 0) throw DataError("cannot evaluate on an empty dataset");
  const MatX<Scalar> scores =
      predict_scores(model, dataset, vocab, max_len, max_tokens_per_batch);

  switch (model.task.kind) {
    case TaskKind::classification: {
      std::vector<int> truth;
      truth.reserve(dataset.size());
      for (const auto& record : dataset.records) truth.push_back(std::get<int>(record.label));
      return classification_report(truth, detail::argmax_rows(scores),
                                   model.task.num_classes());
    }
    case TaskKind::multilabel: {
      std::vector<MultiLabel> truth;
      truth.reserve(dataset.size());
      for (const auto& record : dataset.records)
        truth.push_back(std::get<MultiLabel>(record.label));
      return multilabel_report(truth, scores.template cast<double>());
    }
    case TaskKind::regression: {
      std::vector<double> truth;
      std::vector<double> predicted;
      truth.reserve(dataset.size());
      predicted.reserve(dataset.size());
      for (std::size_t i = 0; i < dataset.size(); ++i) {
        truth.push_back(std::get<double>(dataset.records[i].label));
        predicted.push_back(static_cast<double>(scores(static_cast<Eigen::Index>(i), 0)));
      }
      return regression_report(predicted, truth);
    }
  }
  throw DataError("unknown task kind");
}

/// Per-epoch dev metric; by default evaluate_task on the dev set, replaceable
/// for tests that script the metric stream.
template <typename Scalar>
using DevEvaluator = std::function<double(const TaskModel<Scalar>&, int epoch)>;

/// Fine-tunes one task model: per epoch, plan token-budget batches (reshuffled
/// by an epoch-derived seed), run forward/loss/backward/adam over every
/// batch, then evaluate the selection metric on dev. Keeps the best-dev
/// checkpoint and stops after `patience` epochs without strict improvement or
/// at max_epochs. On divergence the best model so far is returned with a
/// diagnostic. When `log_stream` is set, one JSON line is written per epoch.
template <typename Scalar>
TrainResult<Scalar> train_task(const Dataset& train, const Dataset& dev, TaskModel<Scalar> model,
                               const Vocab& vocab, const TrainConfig& cfg,
                               std::ostream* log_stream = nullptr,
                               const DevEvaluator<Scalar>& dev_evaluator = {}) {
  cfg.validate();
  if (dev.size() == 0) throw DataError("dev dataset must be non-empty");
  if (train.spec.name != dev.spec.name || train.spec.kind != dev.spec.kind)
    throw ConfigError("train and dev datasets must share one task spec");

  const std::string metric_name = train.spec.effective_selection_metric();
  const auto encoded = detail::encode_dataset(train, vocab, cfg.max_len);

  AdamState<Scalar> adam = AdamState<Scalar>::init_like(model.params);
  EarlyStopper stopper(cfg.patience);
  TrainResult<Scalar> result;
  result.model = model;  // replaced on first improvement

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    const std::uint64_t epoch_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch));
    const BatchPlan plan =
        plan_batches(encoded.lengths, cfg.max_tokens_per_batch, epoch_seed, true);

    double loss_sum = 0.0;
    std::size_t example_count = 0;
    for (std::size_t batch_index = 0; batch_index < plan.groups.size(); ++batch_index) {
      const Batch batch =
          collate(encoded.sequences, encoded.labels, train.spec.kind,
                  train.spec.num_classes(), plan.groups[batch_index], Vocab::kPadId);
      ModelTrace<Scalar> trace;
      forward(model, batch, true, mix_seed(epoch_seed, batch_index), &trace);
      const double loss = compute_loss(model.head.kind, trace.scores, batch.labels);
      if (!std::isfinite(loss)) {
        result.state.diverged = true;
        result.state.diagnostic = "non-finite loss at epoch " + std::to_string(epoch) +
                                  ", batch " + std::to_string(batch_index);
        break;
      }
      loss_sum += loss * static_cast<double>(batch.rows());
      example_count += static_cast<std::size_t>(batch.rows());
      try {
        const ParamStore<Scalar> grads = backward(model, trace, batch);
        adam_step(model.params, grads, adam, cfg);
      } catch (const NumericError& e) {
        result.state.diverged = true;
        result.state.diagnostic =
            std::string(e.what()) + " at epoch " + std::to_string(epoch);
        break;
      }
    }
    if (result.state.diverged) break;

    const double train_loss =
        example_count > 0 ? loss_sum / static_cast<double>(example_count) : 0.0;
    double dev_metric = 0.0;
    if (dev_evaluator) {
      dev_metric = dev_evaluator(model, epoch);
    } else {
      const MetricsReport report =
          evaluate_task(model, dev, vocab, cfg.max_len, cfg.max_tokens_per_batch);
      const auto it = report.find(metric_name);
      if (it == report.end())
        throw ConfigError("selection metric '" + metric_name + "' not produced for task '" +
                          train.spec.name + "'");
      dev_metric = it->second;
    }

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    result.state.history.push_back({epoch, train_loss, dev_metric, seconds});
    result.state.epochs_run = epoch;
    if (log_stream) {
      (*log_stream) << "{\"epoch\":" << epoch << ",\"train_loss\":" << train_loss
                    << ",\"dev_metric\":" << dev_metric << ",\"seconds\":" << seconds << "}\n";
    }

    const bool improved = dev_metric > stopper.best();
    const bool stop = stopper.observe(dev_metric);
    if (improved) result.model = model;
    if (stop) break;
  }

  result.state.best_epoch = stopper.best_epoch();
  result.state.best_metric = stopper.best();
  result.state.epochs_since_improve = stopper.epochs_since_improve();
  return result;
}

}  // namespace redflag
