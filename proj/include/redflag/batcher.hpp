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
#include <vector>

#include "redflag/corpus.hpp"
#include "redflag/linalg.hpp"
#include "redflag/textproc.hpp"

namespace redflag {

/// Token-budget batch plan: index groups over a dataset, each group chosen so
/// its padded size |group| * max_len_in_group stays within the budget (except
/// singleton groups holding one oversize sequence).
struct BatchPlan {
  std::vector<std::vector<std::size_t>> groups;
  std::size_t max_tokens_per_batch = 0;
};

/// Groups sequences of similar length under a padded-token budget.
///
/// Fixed algorithm: sort indices by (length, index); walk the sorted order,
/// greedily extending the current run while (run_size + 1) * next_len stays
/// within max_tokens. Oversize sequences become singleton batches. When
/// shuffle is set, the order of batches (never their contents) is permuted
/// with the seed.
BatchPlan plan_batches(const std::vector<std::size_t>& lengths, std::size_t max_tokens,
                       std::uint64_t seed, bool shuffle);

/// Labels aligned with the rows of a Batch. Only the container matching
/// `kind` is populated.
struct BatchLabels {
  TaskKind kind = TaskKind::classification;
  bool present = false;
  std::vector<int> class_ids;
  MatX<double> multi_hot;   // B x C
  VecX<double> scores;      // B
};

/// Rectangular view of one index group: ids padded to the longest row,
/// mask 1 exactly on non-PAD positions (padding is always a suffix).
struct Batch {
  Eigen::MatrixXi ids;
  Eigen::MatrixXi mask;
  std::vector<std::size_t> lengths;
  BatchLabels labels;

  Eigen::Index rows() const { return ids.rows(); }
  Eigen::Index cols() const { return ids.cols(); }
};

Batch collate(const std::vector<TokenSeq>& sequences, const std::vector<std::size_t>& group,
              int pad_id);

/// As above, also copying labels in row order.
Batch collate(const std::vector<TokenSeq>& sequences, const std::vector<Label>& labels,
              TaskKind kind, int num_classes, const std::vector<std::size_t>& group, int pad_id);

}  // namespace redflag
