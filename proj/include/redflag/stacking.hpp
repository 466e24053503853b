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

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "redflag/batcher.hpp"
#include "redflag/corpus.hpp"
#include "redflag/linalg.hpp"
#include "redflag/model.hpp"
#include "redflag/textproc.hpp"

namespace redflag {

/// Fixed global ordering of feature slots, grouped by the task model that
/// produces them. Slot names are "<task>.<label>" ("<task>.score" for
/// regression).
struct FeatureSchema {
  struct Group {
    std::string name;  // task name
    std::vector<std::string> slots;
  };
  std::vector<Group> groups;

  std::size_t slot_count() const;
  std::vector<std::string> flat_slots() const;
  /// Column indices of the named groups, in schema order. Unknown names throw.
  std::vector<std::size_t> columns_for(const std::vector<std::string>& group_names) const;
};

FeatureSchema feature_schema(const std::vector<TaskSpec>& tasks);

/// Feature rows for a response set, plus ids and binary labels.
struct FeatureMatrix {
  FeatureSchema schema;
  std::vector<std::string> ids;
  std::vector<int> labels;  // 0/1
  MatX<double> values;      // N x slot_count
};

/// CSV with header "id,<slot...>,disturbing"; values printed with enough
/// digits to round-trip exactly.
void save_feature_csv(const std::filesystem::path& path, const FeatureMatrix& features);
FeatureMatrix load_feature_csv(const std::filesystem::path& path);

/// A frozen task model together with its text frontend.
template <typename Scalar>
struct TaskPredictor {
  TaskModel<Scalar> model;
  Vocab vocab;
  std::size_t max_len = 224;
};

namespace stacking_detail {

/// Eval-mode scores for one encoded chunk, converted to feature space:
/// probabilities by default (exp of log-softmax; sigmoid output as-is;
/// regression passes the raw score), raw logits behind the flag.
template <typename Scalar>
VecX<double> chunk_scores(const TaskPredictor<Scalar>& predictor,
                          const std::vector<std::string>& tokens, bool use_logits) {
  const TokenSeq seq = encode(tokens, predictor.vocab, predictor.max_len);
  const Batch batch = collate({seq}, {0}, Vocab::kPadId);
  const MatX<Scalar> scores = forward(predictor.model, batch, false, 0);

  VecX<double> out(scores.cols());
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    const double raw = static_cast<double>(scores(0, c));
    if (!use_logits && predictor.model.head.kind == TaskKind::classification)
      out(c) = std::exp(raw);
    else
      out(c) = raw;
  }
  return out;
}

}  // namespace stacking_detail

/// Chunk-averaged features for one text: the text is split into chunks of
/// `chunk_size` content tokens, every chunk runs through every model in eval
/// mode, and per-model output scores are averaged over chunks (uniform
/// weights), then concatenated in schema order.
template <typename Scalar>
VecX<double> extract_features(const std::string& text,
                              const std::vector<TaskPredictor<Scalar>>& predictors,
                              std::size_t chunk_size = 50, bool use_logits = false) {
  if (predictors.empty()) throw ConfigError("feature extraction needs at least one model");
  const ChunkSet chunks = chunk(tokenize(text), chunk_size);

  std::size_t total_slots = 0;
  for (const auto& predictor : predictors)
    total_slots += static_cast<std::size_t>(predictor.model.head.output_dim);

  VecX<double> features(static_cast<Eigen::Index>(total_slots));
  Eigen::Index cursor = 0;
  for (const auto& predictor : predictors) {
    const auto dim = static_cast<Eigen::Index>(predictor.model.head.output_dim);
    VecX<double> sum = VecX<double>::Zero(dim);
    for (const auto& chunk_tokens : chunks.chunks)
      sum += stacking_detail::chunk_scores(predictor, chunk_tokens, use_logits);
    features.segment(cursor, dim) = sum / static_cast<double>(chunks.chunks.size());
    cursor += dim;
  }
  return features;
}

/// Features for a whole response set, rows in response order.
template <typename Scalar>
FeatureMatrix extract_feature_matrix(const std::vector<ResponseRecord>& responses,
                                     const std::vector<TaskPredictor<Scalar>>& predictors,
                                     std::size_t chunk_size = 50, bool use_logits = false) {
  std::vector<TaskSpec> tasks;
  tasks.reserve(predictors.size());
  for (const auto& predictor : predictors) tasks.push_back(predictor.model.task);

  FeatureMatrix out;
  out.schema = feature_schema(tasks);
  out.values.resize(static_cast<Eigen::Index>(responses.size()),
                    static_cast<Eigen::Index>(out.schema.slot_count()));
  out.ids.reserve(responses.size());
  out.labels.reserve(responses.size());
  for (std::size_t i = 0; i < responses.size(); ++i) {
    out.ids.push_back(responses[i].id);
    out.labels.push_back(responses[i].disturbing);
    out.values.row(static_cast<Eigen::Index>(i)) =
        extract_features(responses[i].text, predictors, chunk_size, use_logits).transpose();
  }
  return out;
}

/// Logistic-regression stacker: probability = sigmoid(w . fv + b),
/// flag = probability >= threshold.
struct StackerModel {
  std::vector<std::string> slots;
  VecX<double> weights;
  double bias = 0.0;
  double threshold = 0.5;  // runtime config, valid range [0, 1]
};

void save_stacker(const std::filesystem::path& path, const StackerModel& model);
StackerModel load_stacker(const std::filesystem::path& path);

/// Maximizes the mean L2-regularized binomial log-likelihood by gradient
/// ascent with backtracking line search, from a zero start, until the
/// gradient norm drops below 1e-6 or 10^4 iterations pass. Deterministic;
/// the seed is reserved for future stochastic variants. The bias is not
/// penalized.
StackerModel train_stacker(const MatX<double>& features, const std::vector<int>& labels,
                           double reg_strength, std::uint64_t seed,
                           const std::vector<std::string>& slots);

struct StackerPrediction {
  double probability = 0.0;
  bool flag = false;
};

StackerPrediction predict_disturbing(const StackerModel& model, const VecX<double>& features);

/// Throws ConfigError unless the feature slots equal the model's slots.
void check_schema(const StackerModel& model, const std::vector<std::string>& slots);

struct FoldMetrics {
  double accuracy = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

struct CVReport {
  std::string feature_set;
  std::vector<FoldMetrics> folds;
  FoldMetrics aggregate;  // unweighted mean over folds
};

/// Stratified fold assignment: indices of each class are shuffled by the
/// seed and dealt round-robin, so fold sizes differ by at most one and every
/// training fold keeps both classes (requires >= 2 examples per class).
std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& labels, int k,
                                                       std::uint64_t seed);

CVReport cross_validate(const MatX<double>& features, const std::vector<int>& labels, int k,
                        std::uint64_t seed, double reg_strength,
                        const std::string& feature_set_name = "all");

/// Runs cross_validate once per requested group combination over the matching
/// feature columns. All combinations share the fold assignment derived from
/// (labels, k, seed), so rows are comparable.
std::vector<CVReport> ablate(const FeatureMatrix& features,
                             const std::vector<std::vector<std::string>>& combinations, int k,
                             std::uint64_t seed, double reg_strength);

void save_ablation_csv(const std::filesystem::path& path, const std::vector<CVReport>& reports);

/// Features sorted by signed weight descending, names breaking ties.
std::vector<std::pair<std::string, double>> feature_weight_report(const StackerModel& model);

void save_weight_csv(const std::filesystem::path& path, const StackerModel& model);

}  // namespace redflag
