/* Copyright 2026 The kdistill Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace kdistill::text {

// True for code points with the Unicode White_Space property.
bool is_unicode_space(char32_t cp);

// Lowercases ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic letters.
// Other code points pass through. Invalid UTF-8 bytes are kept verbatim.
std::string to_lower(std::string_view utf8);

// Splits on Unicode whitespace; no empty tokens.
std::vector<std::string> split_whitespace(std::string_view utf8);

// Lowercase followed by whitespace split.
std::vector<std::string> tokenize(std::string_view utf8);

bool is_blank(std::string_view utf8);

}  // namespace kdistill::text
