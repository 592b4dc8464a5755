// Copyright 2026 The babelforge Authors.
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

#ifndef BABELFORGE_TEXT_HPP_
#define BABELFORGE_TEXT_HPP_

#include <string>
#include <string_view>
#include <vector>

// UTF-8 helpers backed by ICU.
namespace babelforge::text {

std::u32string to_u32(std::string_view utf8);
std::string to_utf8(std::u32string_view cps);
std::string to_utf8(char32_t cp);

std::string nfc(std::string_view utf8);

// Collapses every run of Unicode whitespace to one ASCII space and trims both ends.
std::string collapse_whitespace(std::string_view utf8);

// NFC followed by whitespace collapsing; the canonical form used by the tokenizer.
std::string normalize(std::string_view utf8);

// Like normalize() but keeps newlines (runs of other whitespace inside a line
// become one space, blank lines are removed). Used for documents, whose
// paragraph structure matters.
std::string normalize_document(std::string_view utf8);

std::string fold_case(std::string_view utf8);

bool is_space(char32_t cp);

std::vector<std::string_view> split_lines(std::string_view s);
std::vector<std::string_view> split_whitespace(std::string_view s);

}  // namespace babelforge::text

#endif  // BABELFORGE_TEXT_HPP_
