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

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "chorus/common.hpp"

namespace chorus {

// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

// Days since the Unix epoch (UTC calendar days).
using Day = std::int64_t;

namespace timeutil {

inline constexpr std::int64_t kSecondsPerDay = 86400;

inline Day DayOf(Timestamp t) {
  // Floor division so that pre-epoch instants land in the right day.
  return t >= 0 ? t / kSecondsPerDay : -((-t + kSecondsPerDay - 1) / kSecondsPerDay);
}

inline Day DaysFromCivil(int y, unsigned m, unsigned d) {
  using namespace std::chrono;
  return sys_days{year{y} / month{m} / day{d}}.time_since_epoch().count();
}

inline std::chrono::year_month_day CivilFromDays(Day d) {
  return std::chrono::year_month_day{
      std::chrono::sys_days{std::chrono::days{d}}};
}

// First day of the month containing d.
inline Day MonthStart(Day d) {
  auto ymd = CivilFromDays(d);
  return DaysFromCivil(static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), 1);
}

inline Day NextMonthStart(Day d) {
  auto ymd = CivilFromDays(d);
  int y = static_cast<int>(ymd.year());
  unsigned m = static_cast<unsigned>(ymd.month());
  if (++m > 12) {
    m = 1;
    ++y;
  }
  return DaysFromCivil(y, m, 1);
}

inline std::string FormatDay(Day d) {
  auto ymd = CivilFromDays(d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u",
                static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

// Canonical RFC 3339 rendering in UTC ("2017-02-20T08:15:00Z").
inline std::string FormatTimestamp(Timestamp t) {
  Day d = DayOf(t);
  std::int64_t secs = t - d * kSecondsPerDay;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%sT%02d:%02d:%02dZ", FormatDay(d).c_str(),
                static_cast<int>(secs / 3600), static_cast<int>(secs / 60 % 60),
                static_cast<int>(secs % 60));
  return buf;
}

namespace internal {

inline bool ReadDigits(std::string_view s, std::size_t &pos, int count,
                       int &value) {
  if (pos + count > s.size()) return false;
  value = 0;
  for (int i = 0; i < count; ++i) {
    char c = s[pos + i];
    if (c < '0' || c > '9') return false;
    value = value * 10 + (c - '0');
  }
  pos += count;
  return true;
}

}  // namespace internal

// Parses an RFC 3339 date-time. Fractional seconds are dropped; the offset is
// applied so the result is UTC. Returns nullopt on any syntax error.
inline std::optional<Timestamp> ParseTimestamp(std::string_view s) {
  using internal::ReadDigits;
  std::size_t pos = 0;
  int year, month, day, hour, minute, second;
  if (!ReadDigits(s, pos, 4, year)) return std::nullopt;
  if (pos >= s.size() || s[pos++] != '-') return std::nullopt;
  if (!ReadDigits(s, pos, 2, month)) return std::nullopt;
  if (pos >= s.size() || s[pos++] != '-') return std::nullopt;
  if (!ReadDigits(s, pos, 2, day)) return std::nullopt;
  if (pos >= s.size() || (s[pos] != 'T' && s[pos] != 't' && s[pos] != ' '))
    return std::nullopt;
  ++pos;
  if (!ReadDigits(s, pos, 2, hour)) return std::nullopt;
  if (pos >= s.size() || s[pos++] != ':') return std::nullopt;
  if (!ReadDigits(s, pos, 2, minute)) return std::nullopt;
  if (pos >= s.size() || s[pos++] != ':') return std::nullopt;
  if (!ReadDigits(s, pos, 2, second)) return std::nullopt;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    std::size_t digits = 0;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      ++pos;
      ++digits;
    }
    if (digits == 0) return std::nullopt;
  }
  if (pos >= s.size()) return std::nullopt;
  int offset = 0;
  if (s[pos] == 'Z' || s[pos] == 'z') {
    ++pos;
  } else if (s[pos] == '+' || s[pos] == '-') {
    int sign = s[pos] == '+' ? 1 : -1;
    ++pos;
    int oh, om;
    if (!ReadDigits(s, pos, 2, oh)) return std::nullopt;
    if (pos >= s.size() || s[pos++] != ':') return std::nullopt;
    if (!ReadDigits(s, pos, 2, om)) return std::nullopt;
    if (oh > 23 || om > 59) return std::nullopt;
    offset = sign * (oh * 3600 + om * 60);
  } else {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;

  std::chrono::year_month_day ymd{std::chrono::year{year},
                                  std::chrono::month{static_cast<unsigned>(month)},
                                  std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60)
    return std::nullopt;
  // Leap seconds are folded onto the following second.
  Day d = DaysFromCivil(year, month, day);
  return d * kSecondsPerDay + hour * 3600 + minute * 60 + second - offset;
}

// Accepts "YYYY-MM-DD" or a full RFC 3339 timestamp. Returns the UTC day.
inline std::optional<Day> ParseDay(std::string_view s) {
  if (s.size() == 10) {
    auto t = ParseTimestamp(std::string(s) + "T00:00:00Z");
    if (!t) return std::nullopt;
    return DayOf(*t);
  }
  auto t = ParseTimestamp(s);
  if (!t) return std::nullopt;
  return DayOf(*t);
}

}  // namespace timeutil

// Inclusive range of UTC days. Unbounded sides are nullopt.
struct DateRange {
  std::optional<Day> from;
  std::optional<Day> to;

  bool Contains(Day d) const {
    return (!from || d >= *from) && (!to || d <= *to);
  }
  bool Empty() const { return from && to && *from > *to; }
};

}  // namespace chorus
