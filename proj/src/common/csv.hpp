// Copyright 2026 The caebench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CAEBENCH_COMMON_CSV_HPP_
#define CAEBENCH_COMMON_CSV_HPP_

// Minimal RFC 4180 style CSV: quoted fields may hold commas and doubled
// quotes; no embedded newlines.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "caebench/error.hpp"

namespace caebench::csv {

inline std::vector<std::string> SplitLine(const std::string& raw, std::size_t line_no) {
  std::string line = raw;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"' && fields.back().empty()) {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else {
      fields.back() += ch;
    }
  }
  if (quoted) Fail(ErrorKind::kFormat, "line " + std::to_string(line_no) + ": unterminated quote");
  return fields;
}

inline std::string Quote(const std::string& field) {
  if (field.find_first_of(",\"") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

inline std::string Join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += Quote(fields[i]);
  }
  return out;
}

// Shortest text that round-trips is not needed; %.17g always does.
inline std::string Number(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] inline void LineError(ErrorKind kind, std::size_t line, const std::string& what) {
  Fail(kind, "line " + std::to_string(line) + ": " + what);
}

inline double ParseDouble(const std::string& s, std::size_t line, const char* field) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    LineError(ErrorKind::kFormat, line, std::string("bad ") + field + " '" + s + "'");
  }
  return v;
}

inline long ParseInt(const std::string& s, std::size_t line, const char* field) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    LineError(ErrorKind::kFormat, line, std::string("bad ") + field + " '" + s + "'");
  }
  return v;
}

inline bool ParseBool(const std::string& s, std::size_t line, const char* field) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  LineError(ErrorKind::kFormat, line, std::string(field) + " must be 0 or 1, got '" + s + "'");
}

}  // namespace caebench::csv

#endif  // CAEBENCH_COMMON_CSV_HPP_
