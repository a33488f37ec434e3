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

#include "gdino/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace gdino::text {
namespace {

const std::vector<std::string>& builtin_words() {
  static const std::vector<std::string> words = {
      "[PAD]", "[UNK]", ".",
      // colors
      "red", "green", "blue", "yellow", "purple", "orange", "cyan", "white", "black", "gray", "pink", "brown",
      "magenta", "violet", "gold", "silver",
      // shapes
      "circle", "square", "triangle", "rectangle", "ellipse", "star", "hexagon", "pentagon", "diamond", "cross",
      "ring", "disk", "box", "shape", "object", "thing", "blob",
      // referring-expression words
      "the", "a", "an", "of", "in", "on", "at", "to", "and", "with", "near", "next", "left", "right", "top",
      "bottom", "middle", "center", "corner", "upper", "lower", "above", "below", "beside", "between", "big",
      "small", "large", "tiny", "little", "huge", "leftmost", "rightmost", "topmost", "bottommost", "first",
      "second", "third", "one", "two", "three", "four", "five", "six", "other", "another", "that", "this", "is",
      "it", "which", "closest", "farthest", "side", "edge", "image", "picture", "background", "foreground",
      "dark", "light", "bright", "pale", "solid", "filled", "empty", "outlined", "round", "pointy", "flat",
      // everyday nouns (open-vocabulary prompts in tests and docs)
      "cat", "dog", "bird", "table", "chair", "person", "car", "bus", "truck", "bicycle", "horse", "cow",
      "sheep", "boat", "airplane", "train", "bottle", "cup", "bowl", "apple", "banana", "orange_fruit", "book",
      "clock", "vase", "laptop", "phone", "tv", "couch", "bed", "plant", "tree", "flower", "house", "window",
      "door", "road", "sky", "water", "grass", "ball", "kite", "umbrella", "bag", "hat", "shoe", "shirt",
      "glass", "lamp", "desk", "fence", "sign", "light_pole", "bench", "mouse", "keyboard", "remote", "sink",
      "oven", "toaster", "fridge", "knife", "fork", "spoon", "pizza", "cake", "donut", "sandwich", "carrot",
      "broccoli", "elephant", "bear", "zebra", "giraffe", "man", "woman", "child", "boy", "girl", "hand",
      "face", "head", "wheel", "toy", "teddy", "bear_toy", "frisbee", "skis", "surfboard"};
  return words;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string> split_words(std::string_view prompt) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) words.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : prompt) {
    if (is_space(c)) {
      flush();
    } else if (c == kSeparator[0]) {
      flush();
      words.emplace_back(kSeparator);
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return words;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw Error("vocabulary: duplicate token '" + tokens_[i] + "'");
    }
  }
  auto must = [&](std::string_view t) {
    auto it = index_.find(std::string(t));
    if (it == index_.end()) throw Error("vocabulary: missing required token '" + std::string(t) + "'");
    return it->second;
  };
  pad_ = must(kPadToken);
  unk_ = must(kUnkToken);
  sep_ = must(kSeparator);
}

Vocabulary Vocabulary::builtin() { return Vocabulary(builtin_words()); }

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open vocabulary file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write vocabulary file " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

int Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? unk_ : it->second;
}

bool Vocabulary::contains(std::string_view word) const { return index_.count(std::string(word)) > 0; }

int TokenizedPrompt::num_phrases() const {
  int n = 0;
  for (int p : phrase_id) n = std::max(n, p + 1);
  return n;
}

std::vector<std::vector<int>> TokenizedPrompt::phrase_spans() const {
  std::vector<std::vector<int>> spans(static_cast<std::size_t>(num_phrases()));
  for (int i = 0; i < size(); ++i)
    if (phrase_id[i] >= 0) spans[static_cast<std::size_t>(phrase_id[i])].push_back(i);
  return spans;
}

std::string assemble_prompt(std::span<const std::string> categories) {
  if (categories.empty()) throw Error("assemble_prompt: empty category list");
  std::string out;
  for (const auto& c : categories) {
    const bool blank = std::all_of(c.begin(), c.end(), is_space);
    if (blank) throw Error("assemble_prompt: empty category name");
    if (c.find(kSeparator[0]) != std::string::npos) {
      throw Error("assemble_prompt: category '" + c + "' contains the separator");
    }
    if (!out.empty()) out += ' ';
    out += c;
    out += " .";
  }
  return out;
}

std::string normalize_prompt(std::string_view prompt) {
  std::string out;
  for (const auto& w : split_words(prompt)) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

TokenizedPrompt tokenize(std::string_view prompt, const Vocabulary& vocab) {
  const auto words = split_words(prompt);
  if (static_cast<int>(words.size()) > kMaxTokens) {
    throw Error("prompt has " + std::to_string(words.size()) + " tokens; the limit is " +
                std::to_string(kMaxTokens));
  }
  TokenizedPrompt tp;
  int phrase = 0;
  int position = 0;
  bool phrase_open = false;
  for (const auto& w : words) {
    const bool sep = w == kSeparator;
    tp.tokens.push_back(vocab.id(w));
    tp.is_special.push_back(sep ? 1 : 0);
    tp.valid.push_back(1);
    if (sep) {
      tp.phrase_id.push_back(-1);
      tp.position.push_back(0);
      if (phrase_open) ++phrase;
      phrase_open = false;
      position = 0;
    } else {
      tp.phrase_id.push_back(phrase);
      tp.position.push_back(position++);
      phrase_open = true;
    }
  }
  return tp;
}

TokenizedPrompt pad_to(const TokenizedPrompt& tp, int length, const Vocabulary& vocab) {
  if (length < tp.size()) throw Error("pad_to: prompt longer than target length");
  if (length > kMaxTokens) throw Error("pad_to: target exceeds the token limit");
  TokenizedPrompt out = tp;
  while (out.size() < length) {
    out.tokens.push_back(vocab.pad_id());
    out.phrase_id.push_back(-1);
    out.position.push_back(0);
    out.is_special.push_back(1);
    out.valid.push_back(0);
  }
  return out;
}

SubSentenceMask build_subsentence_mask(const TokenizedPrompt& tp) {
  SubSentenceMask m;
  m.n = tp.size();
  m.allow.assign(static_cast<std::size_t>(m.n) * m.n, 0);
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) {
      const bool same = tp.phrase_id[i] >= 0 && tp.phrase_id[i] == tp.phrase_id[j];
      m.allow[static_cast<std::size_t>(i) * m.n + j] = (same || i == j) ? 1 : 0;
    }
  return m;
}

SubSentenceMask build_wordlevel_mask(const TokenizedPrompt& tp) {
  SubSentenceMask m;
  m.n = tp.size();
  m.allow.assign(static_cast<std::size_t>(m.n) * m.n, 0);
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) m.allow[static_cast<std::size_t>(i) * m.n + j] = (tp.valid[i] && tp.valid[j]) ? 1 : 0;
  return m;
}

std::string detokenize(const TokenizedPrompt& tp, const Vocabulary& vocab) {
  std::string out;
  for (int i = 0; i < tp.size(); ++i) {
    if (!tp.valid[i]) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token(tp.tokens[i]);
  }
  return out;
}

std::vector<std::string> phrase_texts(const TokenizedPrompt& tp, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (const auto& span : tp.phrase_spans()) {
    std::string s;
    for (int i : span) {
      if (!s.empty()) s += ' ';
      s += vocab.token(tp.tokens[i]);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace gdino::text
