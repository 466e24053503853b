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
#include "redflag/batcher.hpp"

#include <algorithm>
#include <numeric>

namespace redflag {

BatchPlan plan_batches(const std::vector<std::size_t>& lengths, std::size_t max_tokens,
                       std::uint64_t seed, bool shuffle) {
  if (max_tokens < 1) throw ConfigError("max_tokens_per_batch must be at least 1");

  BatchPlan plan;
  plan.max_tokens_per_batch = max_tokens;
  if (lengths.empty()) return plan;

  std::vector<std::size_t> order(lengths.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (lengths[a] != lengths[b]) return lengths[a] < lengths[b];
    return a < b;
  });

  std::vector<std::size_t> run{order[0]};
  for (std::size_t i = 1; i < order.size(); ++i) {
    const std::size_t idx = order[i];
    // sorted order: lengths[idx] is the max of run + idx
    if ((run.size() + 1) * lengths[idx] <= max_tokens) {
      run.push_back(idx);
    } else {
      plan.groups.push_back(std::move(run));
      run = {idx};
    }
  }
  plan.groups.push_back(std::move(run));

  if (shuffle) {
    SplitMix64 rng(seed);
    shuffle_in_place(plan.groups, rng);
  }
  return plan;
}

Batch collate(const std::vector<TokenSeq>& sequences, const std::vector<std::size_t>& group,
              int pad_id) {
  if (group.empty()) throw DataError("cannot collate an empty group");

  std::size_t max_len = 0;
  for (const std::size_t idx : group) {
    if (idx >= sequences.size())
      throw DataError("collate index " + std::to_string(idx) + " out of range");
    max_len = std::max(max_len, sequences[idx].length());
  }

  const auto rows = static_cast<Eigen::Index>(group.size());
  const auto cols = static_cast<Eigen::Index>(max_len);
  Batch batch;
  batch.ids = Eigen::MatrixXi::Constant(rows, cols, pad_id);
  batch.mask = Eigen::MatrixXi::Zero(rows, cols);
  batch.lengths.reserve(group.size());
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& seq = sequences[group[static_cast<std::size_t>(r)]];
    for (std::size_t t = 0; t < seq.ids.size(); ++t) {
      batch.ids(r, static_cast<Eigen::Index>(t)) = seq.ids[t];
      batch.mask(r, static_cast<Eigen::Index>(t)) = 1;
    }
    batch.lengths.push_back(seq.length());
  }
  return batch;
}

Batch collate(const std::vector<TokenSeq>& sequences, const std::vector<Label>& labels,
              TaskKind kind, int num_classes, const std::vector<std::size_t>& group, int pad_id) {
  if (labels.size() != sequences.size())
    throw DataError("labels and sequences must have equal length");

  Batch batch = collate(sequences, group, pad_id);
  batch.labels.kind = kind;
  batch.labels.present = true;

  const auto rows = static_cast<Eigen::Index>(group.size());
  switch (kind) {
    case TaskKind::classification:
      batch.labels.class_ids.reserve(group.size());
      for (const std::size_t idx : group)
        batch.labels.class_ids.push_back(std::get<int>(labels[idx]));
      break;
    case TaskKind::multilabel: {
      batch.labels.multi_hot = MatX<double>::Zero(rows, num_classes);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& bits = std::get<MultiLabel>(labels[group[static_cast<std::size_t>(r)]]);
        for (int c = 0; c < num_classes; ++c)
          batch.labels.multi_hot(r, c) = bits[static_cast<std::size_t>(c)] ? 1.0 : 0.0;
      }
      break;
    }
    case TaskKind::regression:
      batch.labels.scores = VecX<double>(rows);
      for (Eigen::Index r = 0; r < rows; ++r)
        batch.labels.scores(r) = std::get<double>(labels[group[static_cast<std::size_t>(r)]]);
      break;
  }
  return batch;
}

}  // namespace redflag
