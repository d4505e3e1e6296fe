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

#include "csv.hpp"

#include "error.hpp"

namespace kdistill::csv {

std::vector<Record> parse(std::string_view content) {
  std::vector<Record> records;
  Record current;
  std::string field;
  std::size_t line = 1;
  std::size_t i = 0;
  bool record_open = false;
  bool field_quoted = false;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    field_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(current));
    current = Record{};
    record_open = false;
  };

  while (i < content.size()) {
    if (!record_open) {
      current.line = line;
      record_open = true;
    }
    const char c = content[i];
    if (c == '"' && field.empty() && !field_quoted) {
      field_quoted = true;
      const std::size_t quote_line = line;
      ++i;
      for (;;) {
        if (i >= content.size()) {
          throw DataError("line " + std::to_string(quote_line) +
                          ": unterminated quoted field");
        }
        if (content[i] == '"') {
          if (i + 1 < content.size() && content[i + 1] == '"') {
            field.push_back('"');
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        if (content[i] == '\n') ++line;
        field.push_back(content[i++]);
      }
      if (i < content.size() && content[i] != ',' && content[i] != '\n' &&
          content[i] != '\r') {
        throw DataError("line " + std::to_string(line) +
                        ": unexpected character after closing quote");
      }
      continue;
    }
    if (c == ',') {
      end_field();
      ++i;
    } else if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') {
      end_record();
      i += 2;
      ++line;
    } else if (c == '\n') {
      end_record();
      ++i;
      ++line;
    } else {
      field.push_back(c);
      ++i;
    }
  }
  if (record_open) end_record();
  return records;
}

std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace kdistill::csv
