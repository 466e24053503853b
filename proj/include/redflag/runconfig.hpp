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
#include <optional>
#include <string>
#include <vector>

#include "redflag/corpus.hpp"
#include "redflag/model.hpp"
#include "redflag/trainer.hpp"

namespace redflag {

struct TaskRunConfig {
  TaskSpec spec;
  std::filesystem::path path;
  std::size_t max_len = 0;              // 0 -> train.max_len
  std::size_t max_tokens_per_batch = 0; // 0 -> train.max_tokens_per_batch
  std::vector<int> head_hidden;         // empty -> two layers of hidden_dim
};

/// One declarative configuration document per run; flags only override the
/// scalar fields seed/threshold and the output/checkpoint roots. Relative
/// paths are resolved against the config file's directory.
struct RunConfig {
  std::uint64_t seed = 0;
  double threshold = 0.5;  // [0, 1]
  std::size_t chunk_size = 50;
  double reg_strength = 1.0;
  int cv_folds = 5;
  std::filesystem::path output_root = "runs";
  std::optional<std::filesystem::path> checkpoint_root;

  EncoderConfig encoder;  // vocab_size filled per task at train time
  TrainConfig train;
  double test_fraction = 0.2;
  double dev_fraction = 0.2;
  double head_dropout_p = 0.5;
  std::size_t vocab_min_count = 1;

  std::vector<TaskRunConfig> tasks;
  std::filesystem::path responses;
  std::vector<std::string> feature_groups;
  std::vector<std::vector<std::string>> ablation;

  std::string config_hash;  // of the raw document

  const TaskRunConfig& task(const std::string& name) const;
  bool has_task(const std::string& name) const;

  /// Root seed fanned out per task: fnv1a64(task name) XOR seed.
  std::uint64_t task_seed(const std::string& name) const {
    return fnv1a64(name) ^ seed;
  }

  /// Per-task train config with the task's overrides and seed applied.
  TrainConfig train_config_for(const TaskRunConfig& task) const;
};

/// Parses and validates the config document. Unknown keys are rejected at
/// every level.
RunConfig load_run_config(const std::filesystem::path& path);

/// Creates `<output_root>/<hash8>-<YYYYMMDD-HHMMSS>[-n]/`. The directory is
/// created atomically and never reused, so two commands cannot write the
/// same output directory.
std::filesystem::path create_run_dir(const std::filesystem::path& output_root,
                                     const std::string& config_hash);

}  // namespace redflag
