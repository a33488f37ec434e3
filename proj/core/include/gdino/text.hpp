// Copyright 2026 The gdino Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gdino/tensor.hpp"

namespace gdino::text {

inline constexpr int kMaxTokens = 256;
inline constexpr std::string_view kSeparator = ".";
inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";

// Word-level vocabulary; token id = line index in the vocabulary file.
class Vocabulary {
 public:
  Vocabulary() = default;
  // Must contain [PAD], [UNK] and the separator.
  explicit Vocabulary(std::vector<std::string> tokens);

  static Vocabulary builtin();
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  int id(std::string_view word) const;  // unk_id() for unknown words
  bool contains(std::string_view word) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }
  int pad_id() const { return pad_; }
  int unk_id() const { return unk_; }
  int separator_id() const { return sep_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int pad_ = -1, unk_ = -1, sep_ = -1;
};

struct TokenizedPrompt {
  std::vector<int> tokens;
  std::vector<int> phrase_id;  // -1 for separators and padding
  std::vector<int> position;   // restarts at 0 in every phrase; separators are 0
  Mask is_special;             // separators and padding
  Mask valid;                  // 0 for padding

  int size() const { return static_cast<int>(tokens.size()); }
  int num_phrases() const;
  // Token indices of each phrase, ordered by phrase id.
  std::vector<std::vector<int>> phrase_spans() const;
};

// Square boolean matrix over tokens, row-major.
struct SubSentenceMask {
  int n = 0;
  Mask allow;
  bool at(int i, int j) const { return allow[static_cast<std::size_t>(i) * n + j] != 0; }
};

// "cat", "dog" -> "cat . dog ."
std::string assemble_prompt(std::span<const std::string> categories);

// Lowercases, splits on whitespace and around '.', maps words to ids.
// Unknown words map to [UNK]. Throws if the prompt exceeds kMaxTokens.
TokenizedPrompt tokenize(std::string_view prompt, const Vocabulary& vocab);

// Appends [PAD] tokens up to `length`.
TokenizedPrompt pad_to(const TokenizedPrompt& tp, int length, const Vocabulary& vocab);

// allow[i][j] iff same phrase (both >= 0) or i == j.
SubSentenceMask build_subsentence_mask(const TokenizedPrompt& tp);
// allow[i][j] iff both tokens are real (not padding).
SubSentenceMask build_wordlevel_mask(const TokenizedPrompt& tp);

// Space-joined tokens without padding.
std::string detokenize(const TokenizedPrompt& tp, const Vocabulary& vocab);
// Lowercased, whitespace-normalized prompt as tokenize() sees it.
std::string normalize_prompt(std::string_view prompt);
// Text of each phrase, ordered by phrase id.
std::vector<std::string> phrase_texts(const TokenizedPrompt& tp, const Vocabulary& vocab);

}  // namespace gdino::text
