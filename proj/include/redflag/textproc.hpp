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
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "redflag/common.hpp"

namespace redflag {

/// Whitespace-and-punctuation tokenizer.
///
/// Rules, applied to the UTF-8 input:
///  - split on Unicode whitespace,
///  - ASCII letters are lowercased (no multilingual case folding),
///  - every ASCII character that is neither alphanumeric nor an apostrophe
///    between two word characters becomes its own token,
///  - non-ASCII codepoints count as word characters; invalid UTF-8 bytes are
///    kept as word characters rather than rejected.
std::vector<std::string> tokenize(std::string_view text);

/// Token ids with PAD fixed at 0. Immutable once built.
class Vocab {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;
  static constexpr int kClsId = 2;
  static constexpr const char* kPadToken = "[PAD]";
  static constexpr const char* kUnkToken = "[UNK]";
  static constexpr const char* kClsToken = "[CLS]";

  /// Builds the vocabulary from raw text: specials first, then every token
  /// with frequency >= min_count in descending frequency, ties broken
  /// lexicographically. Deterministic.
  static Vocab build(const std::vector<std::string>& corpus, std::size_t min_count);

  /// One token per line; the line number is the id.
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  int id_of(std::string_view token) const;  // kUnkId when absent
  const std::string& token_of(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }

 private:
  explicit Vocab(std::vector<std::string> tokens);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// An encoded sequence: ids[0] is always the CLS id.
struct TokenSeq {
  std::vector<int> ids;

  std::size_t length() const { return ids.size(); }
};

/// Prepends CLS, maps unknown tokens to UNK, truncates to max_len total ids.
/// max_len must be >= 2 so at least one content token survives.
TokenSeq encode(const std::vector<std::string>& tokens, const Vocab& vocab, std::size_t max_len);

/// Contiguous non-overlapping chunks of content tokens. CLS is not counted;
/// it is added per chunk at encode time. The final partial chunk is kept and
/// an empty token list yields one empty chunk.
struct ChunkSet {
  std::vector<std::vector<std::string>> chunks;
  std::size_t chunk_size = 0;
};

ChunkSet chunk(const std::vector<std::string>& tokens, std::size_t chunk_size = 50);

}  // namespace redflag
