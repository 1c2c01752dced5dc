// Copyright 2026 The Chorus Authors.
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

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chorus/common.hpp"

namespace chorus {

struct Token {
  std::string text;
  // Offsets in Unicode scalar values, half-open.
  std::size_t start = 0;
  std::size_t end = 0;
  // Same span in UTF-8 bytes.
  std::size_t byte_start = 0;
  std::size_t byte_end = 0;
  std::string shape;
};

struct TokenizedText {
  std::string source;
  std::vector<Token> tokens;
  // Index of the first token of every sentence after the first one.
  std::vector<std::size_t> sentence_boundaries;

  // Half-open token ranges, one per sentence. Empty text has no sentences.
  std::vector<std::pair<std::size_t, std::size_t>> Sentences() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (tokens.empty()) return out;
    std::size_t begin = 0;
    for (std::size_t b : sentence_boundaries) {
      out.emplace_back(begin, b);
      begin = b;
    }
    out.emplace_back(begin, tokens.size());
    return out;
  }
};

// Case/digit pattern of a token: uppercase -> 'X', lowercase -> 'x',
// digit -> 'd', anything else -> '-', with runs longer than two cut to two.
inline std::string ShapeOf(std::string_view token_text) {
  if (token_text.empty()) throw ParameterError("shape of empty token");
  std::string out;
  char prev = 0;
  int run = 0;
  for (char32_t c : util::DecodeUtf8(token_text)) {
    char s = util::IsUpper(c)   ? 'X'
             : util::IsLower(c) ? 'x'
             : util::IsDigit(c) ? 'd'
                                : '-';
    run = s == prev ? run + 1 : 1;
    prev = s;
    if (run <= 2) out.push_back(s);
  }
  return out;
}

// Rule-based tokenizer: split on whitespace, then peel leading and trailing
// punctuation off each chunk one character at a time. A sentence starts at a
// token that follows a lone ".", "!" or "?" token across whitespace and
// begins with an uppercase letter.
inline TokenizedText Tokenize(std::string_view source) {
  TokenizedText out;
  out.source = std::string(source);
  const std::u32string text = util::DecodeUtf8(source);

  // Byte offset of every scalar value, plus the end.
  std::vector<std::size_t> byte_at(text.size() + 1);
  {
    std::size_t b = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
      byte_at[i] = b;
      std::string tmp;
      util::AppendUtf8(tmp, text[i]);
      b += tmp.size();
    }
    byte_at[text.size()] = b;
  }
  // Byte offsets are computed from the re-encoded text; invalid input bytes
  // were replaced during decoding, so slice the re-encoded form.
  const std::string encoded = util::EncodeUtf8(text);

  const auto emit = [&](std::size_t s, std::size_t e) {
    Token t;
    t.start = s;
    t.end = e;
    t.byte_start = byte_at[s];
    t.byte_end = byte_at[e];
    t.text = encoded.substr(t.byte_start, t.byte_end - t.byte_start);
    t.shape = ShapeOf(t.text);
    out.tokens.push_back(std::move(t));
  };

  std::size_t i = 0;
  while (i < text.size()) {
    if (util::IsSpace(text[i])) {
      ++i;
      continue;
    }
    std::size_t chunk_end = i;
    while (chunk_end < text.size() && !util::IsSpace(text[chunk_end])) ++chunk_end;

    std::size_t core_begin = i;
    while (core_begin < chunk_end && util::IsPunct(text[core_begin])) ++core_begin;
    std::size_t core_end = chunk_end;
    while (core_end > core_begin && util::IsPunct(text[core_end - 1])) --core_end;

    for (std::size_t k = i; k < core_begin; ++k) emit(k, k + 1);
    if (core_begin < core_end) emit(core_begin, core_end);
    for (std::size_t k = core_end; k < chunk_end; ++k)
      emit(k, k + 1);
    i = chunk_end;
  }

  for (std::size_t k = 1; k < out.tokens.size(); ++k) {
    const Token &prev = out.tokens[k - 1];
    const Token &cur = out.tokens[k];
    bool terminal = prev.text == "." || prev.text == "!" || prev.text == "?";
    if (terminal && cur.start > prev.end && util::IsUpper(text[cur.start]))
      out.sentence_boundaries.push_back(k);
  }
  return out;
}

}  // namespace chorus
