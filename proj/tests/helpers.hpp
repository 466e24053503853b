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

#include <filesystem>
#include <fstream>
#include <string>

#include "redflag/batcher.hpp"
#include "redflag/corpus.hpp"
#include "redflag/model.hpp"
#include "redflag/textproc.hpp"

namespace redflag::testing {

/// Unique temp directory, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("redflag-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

/// Tiny vocabulary over a fixed word list, for model tests.
inline Vocab tiny_vocab() {
  return Vocab::build({"alpha beta gamma delta epsilon zeta eta theta iota kappa"}, 1);
}

inline TaskSpec tiny_task(TaskKind kind, int classes = 3) {
  TaskSpec spec;
  spec.name = "tiny";
  spec.kind = kind;
  if (kind != TaskKind::regression)
    for (int c = 0; c < classes; ++c) spec.label_names.push_back("c" + std::to_string(c));
  return spec;
}

inline EncoderConfig tiny_encoder(int vocab_size, int hidden = 8, int layers = 2, int heads = 2,
                                  int ff = 16) {
  EncoderConfig cfg;
  cfg.num_layers = layers;
  cfg.hidden_dim = hidden;
  cfg.num_heads = heads;
  cfg.ff_dim = ff;
  cfg.vocab_size = vocab_size;
  cfg.max_positions = 16;
  cfg.dropout_p = 0.0;
  return cfg;
}

/// Random batch of `rows` sequences with lengths in [2, max_len], labeled
/// for the given kind.
inline Batch random_batch(const Vocab& vocab, TaskKind kind, int classes, int rows,
                          std::size_t max_len, SplitMix64& rng) {
  std::vector<TokenSeq> seqs;
  std::vector<Label> labels;
  std::vector<std::size_t> group;
  for (int r = 0; r < rows; ++r) {
    TokenSeq seq;
    seq.ids.push_back(Vocab::kClsId);
    const auto content = 1 + rng.bounded(max_len - 1);
    for (std::size_t t = 0; t < content; ++t)
      seq.ids.push_back(3 + static_cast<int>(rng.bounded(
                                static_cast<std::uint64_t>(vocab.size() - 3))));
    seqs.push_back(seq);
    switch (kind) {
      case TaskKind::classification:
        labels.emplace_back(static_cast<int>(rng.bounded(static_cast<std::uint64_t>(classes))));
        break;
      case TaskKind::multilabel: {
        MultiLabel bits(static_cast<std::size_t>(classes), 0);
        for (auto& bit : bits) bit = rng.next_double() < 0.5 ? 1 : 0;
        labels.emplace_back(bits);
        break;
      }
      case TaskKind::regression:
        labels.emplace_back(rng.next_double());
        break;
    }
    group.push_back(static_cast<std::size_t>(r));
  }
  return collate(seqs, labels, kind, classes, group, Vocab::kPadId);
}

}  // namespace redflag::testing
