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
#include <variant>
#include <vector>

#include "redflag/common.hpp"

namespace redflag {

/// The three problem formulations a task model can be trained for.
enum class TaskKind { classification, multilabel, regression };

TaskKind task_kind_from_string(const std::string& name);
std::string to_string(TaskKind kind);

/// Description of one labeled task: what kind of labels it carries, their
/// names and order, and which metric drives model selection.
struct TaskSpec {
  std::string name;
  TaskKind kind = TaskKind::classification;
  std::vector<std::string> label_names;  // empty for regression
  std::string selection_metric;          // empty -> per-kind default

  int num_classes() const { return static_cast<int>(label_names.size()); }

  /// Throws ConfigError on duplicate label names or a class count that does
  /// not fit the kind (>= 2 for classification/multilabel, 0 for regression).
  void validate() const;

  /// "macro_f1" for classification, "jaccard" for multilabel,
  /// "neg_mae" for regression, unless overridden.
  std::string effective_selection_metric() const;
};

using MultiLabel = std::vector<std::uint8_t>;  // length C, entries 0/1

/// Class index, per-label indicator vector, or real-valued score.
using Label = std::variant<int, MultiLabel, double>;

struct TextRecord {
  std::string id;
  std::string text;
  Label label;
};

/// One constructed response with its binary disturbing annotation. Feeds the
/// stacker, never a task head, hence a distinct type from TextRecord.
struct ResponseRecord {
  std::string id;
  std::string text;
  int disturbing = 0;  // 0 or 1
};

struct Dataset {
  TaskSpec spec;
  std::vector<TextRecord> records;

  std::size_t size() const { return records.size(); }
};

/// Throws DataError (naming the offending record) unless the label's shape
/// matches the spec: class index in [0, C), indicator vector of length C, or
/// a finite score.
void validate_label(const Label& label, const TaskSpec& spec, const std::string& record_id);

/// Reads a JSONL file (one object per line, fields id/text/label) and
/// validates every record against the spec. Errors report the line number.
Dataset load_task_dataset(const std::filesystem::path& path, const TaskSpec& spec);

/// Writes the dataset in the same JSONL format load_task_dataset reads.
void save_task_dataset(const std::filesystem::path& path, const Dataset& dataset);

/// Deterministic train/test partition. Test size is round(N * test_fraction)
/// clamped to [1, N-1]; both halves keep the original record order.
std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset, double test_fraction,
                                             std::uint64_t seed);

/// Reads a response JSONL file (fields id/text/disturbing). Rejects empty
/// files and disturbing values outside {0, 1}.
std::vector<ResponseRecord> load_response_set(const std::filesystem::path& path);

void save_response_set(const std::filesystem::path& path,
                       const std::vector<ResponseRecord>& responses);

std::size_t count_positive(const std::vector<ResponseRecord>& responses);

}  // namespace redflag
