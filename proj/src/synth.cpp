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
#include "redflag/synth.hpp"

#include <string>

#include "redflag/common.hpp"

namespace redflag::synth {
namespace {

using Pool = std::vector<std::string>;

const Pool kFiller = {"the", "and", "a", "to", "of", "on", "it", "we", "day", "time", "note"};

const std::vector<Pool> kForumPools = {
    {"storm", "shadow", "ember", "falter", "hollow", "drift"},
    {"soil", "bloom", "seed", "water", "prune", "sprout"},
    {"orbit", "lunar", "comet", "nebula", "star", "gaze"},
};

const std::vector<Pool> kTonePools = {
    {"murk", "gray", "fog", "dim"},
    {"spark", "flare", "sharp", "clash"},
    {"still", "soft", "even", "quiet"},
};

const std::vector<Pool> kStaticPools = {
    {"crackle", "fizz", "rasp"},
    {"drone", "buzz", "thrum"},
};

const std::vector<Pool> kLevelPools = {
    {"pebble", "dust", "grain"},
    {"ridge", "slope", "ledge"},
    {"summit", "peak", "crest"},
};

const std::string& pick(const Pool& pool, SplitMix64& rng) {
  return pool[static_cast<std::size_t>(rng.bounded(pool.size()))];
}

std::string join(std::vector<std::string> words, SplitMix64& rng, bool shuffle = true) {
  if (shuffle) shuffle_in_place(words, rng);
  std::string text;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) text += ' ';
    text += words[i];
  }
  return text;
}

std::string record_id(const std::string& prefix, int i) {
  return prefix + "-" + std::to_string(i);
}

Dataset make_multilabel(const TaskSpec& spec, const std::vector<Pool>& pools, int examples,
                        std::uint64_t seed) {
  SplitMix64 rng(seed);
  Dataset dataset;
  dataset.spec = spec;
  for (int i = 0; i < examples; ++i) {
    MultiLabel bits(pools.size(), 0);
    std::vector<std::string> words;
    const int filler_count = 8 + static_cast<int>(rng.bounded(5));
    for (int w = 0; w < filler_count; ++w) words.push_back(pick(kFiller, rng));
    for (std::size_t label = 0; label < pools.size(); ++label) {
      if (rng.next_double() < 0.5) {
        bits[label] = 1;
        for (int w = 0; w < 3; ++w) words.push_back(pick(pools[label], rng));
      }
    }
    dataset.records.push_back(
        {record_id(spec.name, i), join(std::move(words), rng), Label(bits)});
  }
  return dataset;
}

}  // namespace

TaskSpec forum_spec() {
  TaskSpec spec;
  spec.name = "forum";
  spec.kind = TaskKind::classification;
  spec.label_names = {"stormwatch", "gardening", "astronomy"};
  return spec;
}

TaskSpec tone_spec() {
  TaskSpec spec;
  spec.name = "tone";
  spec.kind = TaskKind::multilabel;
  spec.label_names = {"gloom", "anger", "calm"};
  return spec;
}

TaskSpec static_spec() {
  TaskSpec spec;
  spec.name = "static";
  spec.kind = TaskKind::multilabel;
  spec.label_names = {"hiss", "hum"};
  return spec;
}

TaskSpec level_spec() {
  TaskSpec spec;
  spec.name = "level";
  spec.kind = TaskKind::regression;
  return spec;
}

Dataset make_forum_dataset(int examples, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Dataset dataset;
  dataset.spec = forum_spec();
  for (int i = 0; i < examples; ++i) {
    const int cls = i % 3;
    std::vector<std::string> words;
    const int length = 10 + static_cast<int>(rng.bounded(6));
    for (int w = 0; w < length; ++w) {
      const bool marker = rng.next_double() < 0.6;
      words.push_back(marker ? pick(kForumPools[static_cast<std::size_t>(cls)], rng)
                             : pick(kFiller, rng));
    }
    dataset.records.push_back({record_id("forum", i), join(std::move(words), rng), Label(cls)});
  }
  return dataset;
}

Dataset make_tone_dataset(int examples, std::uint64_t seed) {
  return make_multilabel(tone_spec(), kTonePools, examples, seed);
}

Dataset make_static_dataset(int examples, std::uint64_t seed) {
  return make_multilabel(static_spec(), kStaticPools, examples, seed);
}

Dataset make_level_dataset(int examples, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Dataset dataset;
  dataset.spec = level_spec();
  for (int i = 0; i < examples; ++i) {
    const int level = i % 3;
    std::vector<std::string> words;
    const int length = 8 + static_cast<int>(rng.bounded(4));
    for (int w = 0; w < length; ++w) {
      const bool marker = rng.next_double() < 0.7;
      words.push_back(marker ? pick(kLevelPools[static_cast<std::size_t>(level)], rng)
                             : pick(kFiller, rng));
    }
    dataset.records.push_back(
        {record_id("level", i), join(std::move(words), rng), Label(level * 0.5)});
  }
  return dataset;
}

std::vector<ResponseRecord> make_responses(const SynthConfig& config) {
  SplitMix64 rng(config.seed ^ 0xAB5EDF00DULL);
  std::vector<ResponseRecord> responses;
  responses.reserve(static_cast<std::size_t>(config.response_count));
  for (int i = 0; i < config.response_count; ++i) {
    const int disturbing = i % 5 < 2 ? 1 : 0;  // 40% positive
    std::vector<std::string> words;
    for (int w = 0; w < config.response_words; ++w) {
      const double u = rng.next_double();
      if (disturbing == 1) {
        if (u < 0.50) words.push_back(pick(kForumPools[0], rng));
        else if (u < 0.70) words.push_back(pick(kTonePools[0], rng));
        else if (u < 0.80) words.push_back(pick(kTonePools[1], rng));
        else words.push_back(pick(kFiller, rng));
      } else {
        if (u < 0.25) words.push_back(pick(kForumPools[1], rng));
        else if (u < 0.50) words.push_back(pick(kForumPools[2], rng));
        else if (u < 0.70) words.push_back(pick(kTonePools[2], rng));
        else words.push_back(pick(kFiller, rng));
      }
    }
    // static markers land everywhere, independent of the annotation
    for (int w = 0; w < 6; ++w) {
      const auto& pool = kStaticPools[static_cast<std::size_t>(rng.bounded(2))];
      words.push_back(pick(pool, rng));
    }
    responses.push_back(
        {record_id("resp", i), join(std::move(words), rng), disturbing});
  }
  return responses;
}

SynthFiles write_synth_corpus(const std::filesystem::path& dir, const SynthConfig& config) {
  std::filesystem::create_directories(dir);
  SynthFiles files;
  files.forum = dir / "forum.jsonl";
  files.tone = dir / "tone.jsonl";
  files.statics = dir / "static.jsonl";
  files.responses = dir / "responses.jsonl";
  save_task_dataset(files.forum, make_forum_dataset(config.task_examples, config.seed));
  save_task_dataset(files.tone, make_tone_dataset(config.task_examples, config.seed + 1));
  save_task_dataset(files.statics, make_static_dataset(config.task_examples, config.seed + 2));
  save_response_set(files.responses, make_responses(config));
  return files;
}

}  // namespace redflag::synth
