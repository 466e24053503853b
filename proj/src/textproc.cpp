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
#include "redflag/textproc.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>

namespace redflag {
namespace {

bool is_unicode_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
    case 0x20: case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_ascii_alnum(char32_t cp) {
  return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
}

// Word characters: ASCII alphanumerics and everything beyond ASCII.
bool is_word_char(char32_t cp) { return cp >= 0x80 || is_ascii_alnum(cp); }

struct Codepoint {
  char32_t value;
  std::size_t bytes;  // how many input bytes it consumed
  bool raw;           // invalid UTF-8, emit the byte unchanged
};

// Lenient UTF-8 decode: an invalid lead/continuation byte is returned as a
// single raw byte instead of failing.
Codepoint decode(std::string_view text, std::size_t pos) {
  const auto byte = static_cast<unsigned char>(text[pos]);
  if (byte < 0x80) return {byte, 1, false};

  int extra = 0;
  char32_t cp = 0;
  if ((byte & 0xE0) == 0xC0) {
    extra = 1;
    cp = byte & 0x1F;
  } else if ((byte & 0xF0) == 0xE0) {
    extra = 2;
    cp = byte & 0x0F;
  } else if ((byte & 0xF8) == 0xF0) {
    extra = 3;
    cp = byte & 0x07;
  } else {
    return {byte, 1, true};
  }
  if (pos + static_cast<std::size_t>(extra) >= text.size()) return {byte, 1, true};
  for (int i = 1; i <= extra; ++i) {
    const auto cont = static_cast<unsigned char>(text[pos + static_cast<std::size_t>(i)]);
    if ((cont & 0xC0) != 0x80) return {byte, 1, true};
    cp = (cp << 6) | (cont & 0x3F);
  }
  return {cp, static_cast<std::size_t>(extra) + 1, false};
}

void append_codepoint(std::string& out, const Codepoint& cp, std::string_view source,
                      std::size_t pos) {
  if (cp.value < 0x80) {
    char c = static_cast<char>(cp.value);
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out += c;
  } else {
    out.append(source.substr(pos, cp.bytes));
  }
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  const auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };

  std::size_t pos = 0;
  while (pos < text.size()) {
    const Codepoint cp = decode(text, pos);
    if (!cp.raw && is_unicode_space(cp.value)) {
      flush();
    } else if (cp.raw || is_word_char(cp.value)) {
      append_codepoint(current, cp, text, pos);
    } else if (cp.value == '\'' && !current.empty() && pos + 1 < text.size() &&
               [&] {
                 const Codepoint next = decode(text, pos + 1);
                 return !next.raw && is_word_char(next.value);
               }()) {
      // keep apostrophes inside words: can't stays one token
      current += '\'';
    } else {
      flush();
      tokens.emplace_back(1, static_cast<char>(cp.value));
    }
    pos += cp.bytes;
  }
  flush();
  return tokens;
}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
      throw DataError("duplicate vocabulary token '" + tokens_[i] + "'");
  }
  if (tokens_.size() < 3 || tokens_[0] != kPadToken || tokens_[1] != kUnkToken ||
      tokens_[2] != kClsToken)
    throw DataError("vocabulary must start with the special tokens");
}

Vocab Vocab::build(const std::vector<std::string>& corpus, std::size_t min_count) {
  if (corpus.empty()) throw DataError("cannot build a vocabulary from an empty corpus");

  std::map<std::string, std::size_t> counts;
  for (const auto& text : corpus) {
    for (auto& token : tokenize(text)) ++counts[std::move(token)];
  }

  std::vector<std::pair<std::string, std::size_t>> kept;
  kept.reserve(counts.size());
  for (auto& [token, count] : counts) {
    if (count >= min_count) kept.emplace_back(token, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::vector<std::string> tokens{kPadToken, kUnkToken, kClsToken};
  tokens.reserve(tokens.size() + kept.size());
  for (auto& kv : kept) tokens.push_back(std::move(kv.first));
  return Vocab(std::move(tokens));
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return Vocab(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary file " + path.string());
  for (const auto& token : tokens_) out << token << '\n';
}

int Vocab::id_of(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token_of(int id) const {
  if (id < 0 || id >= size()) throw DataError("token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

TokenSeq encode(const std::vector<std::string>& tokens, const Vocab& vocab, std::size_t max_len) {
  if (max_len < 2) throw ConfigError("max_len must be at least 2");
  TokenSeq seq;
  seq.ids.reserve(std::min(tokens.size() + 1, max_len));
  seq.ids.push_back(Vocab::kClsId);
  for (const auto& token : tokens) {
    if (seq.ids.size() >= max_len) break;
    seq.ids.push_back(vocab.id_of(token));
  }
  return seq;
}

ChunkSet chunk(const std::vector<std::string>& tokens, std::size_t chunk_size) {
  if (chunk_size < 1) throw ConfigError("chunk_size must be at least 1");
  ChunkSet set;
  set.chunk_size = chunk_size;
  if (tokens.empty()) {
    set.chunks.emplace_back();
    return set;
  }
  for (std::size_t start = 0; start < tokens.size(); start += chunk_size) {
    const std::size_t stop = std::min(start + chunk_size, tokens.size());
    set.chunks.emplace_back(tokens.begin() + static_cast<long>(start),
                            tokens.begin() + static_cast<long>(stop));
  }
  return set;
}

}  // namespace redflag
