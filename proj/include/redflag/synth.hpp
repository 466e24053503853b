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
#include <vector>

#include "redflag/corpus.hpp"

namespace redflag::synth {

/// Deterministic synthetic corpora with planted signal, used by the demo
/// tooling and the test fixtures.
///
/// Three toy tasks plus a response set:
///  - "forum": 3-class classification; each class has its own marker pool.
///  - "tone": 3-label multilabel (gloom/anger/calm); active labels inject
///    their markers.
///  - "static": 2-label multilabel (hiss/hum); learnable on its own corpus,
///    but its markers are sprinkled into responses independently of the
///    disturbing annotation, so its features carry no stacking signal.
///  - responses: disturbing texts draw from the forum crisis pool and gloomy
///    tone markers; normal texts from the benign pools. Long enough to span
///    several 50-token chunks.
struct SynthConfig {
  std::uint64_t seed = 7;
  int task_examples = 96;
  int response_count = 120;
  int response_words = 130;
};

TaskSpec forum_spec();
TaskSpec tone_spec();
TaskSpec static_spec();
/// "level": regression with noiseless targets in {0, 0.5, 1}, one marker pool
/// per level.
TaskSpec level_spec();

Dataset make_forum_dataset(int examples, std::uint64_t seed);
Dataset make_tone_dataset(int examples, std::uint64_t seed);
Dataset make_static_dataset(int examples, std::uint64_t seed);
Dataset make_level_dataset(int examples, std::uint64_t seed);

std::vector<ResponseRecord> make_responses(const SynthConfig& config);

struct SynthFiles {
  std::filesystem::path forum;
  std::filesystem::path tone;
  std::filesystem::path statics;
  std::filesystem::path responses;
};

/// Writes forum/tone/static task JSONL files and the response JSONL into dir.
SynthFiles write_synth_corpus(const std::filesystem::path& dir, const SynthConfig& config);

}  // namespace redflag::synth
