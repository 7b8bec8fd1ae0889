#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace pvdiff {

// Timestamps are whole hours since 1970-01-01 00:00 (naive, no time zone).
using HourStamp = std::int64_t;
using DayNumber = std::int64_t;

inline DayNumber day_of(HourStamp h) { return h >= 0 ? h / 24 : (h - 23) / 24; }
inline int hour_of_day(HourStamp h) { return static_cast<int>(h - day_of(h) * 24); }

inline std::optional<DayNumber> days_from_ymd(int y, unsigned m, unsigned d) {
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return std::chrono::sys_days{ymd}.time_since_epoch().count();
}

namespace detail {
inline bool parse_uint(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  out = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    out = out * 10 + (s[i] - '0');
  }
  return true;
}
}  // namespace detail

/// Accepts "YYYY-MM-DD HH:MM[:SS]", "YYYY-MM-DDTHH:MM[:SS]", "YYYYMMDD HH:MM" and
/// "YYYY-MM-DD" (midnight). Minutes and seconds must be zero.
inline std::optional<HourStamp> parse_timestamp(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '"' || s.back() == '\r')) s.remove_suffix(1);
  int y = 0, mo = 0, d = 0, hh = 0, mi = 0, ss = 0;
  std::size_t pos = 0;
  if (s.size() >= 10 && s[4] == '-' && s[7] == '-') {
    if (!detail::parse_uint(s, 0, 4, y) || !detail::parse_uint(s, 5, 2, mo) ||
        !detail::parse_uint(s, 8, 2, d)) {
      return std::nullopt;
    }
    pos = 10;
  } else if (s.size() >= 8 && detail::parse_uint(s, 0, 8, y)) {
    d = y % 100;
    mo = (y / 100) % 100;
    y /= 10000;
    pos = 8;
  } else {
    return std::nullopt;
  }
  if (pos < s.size()) {
    if (s[pos] != ' ' && s[pos] != 'T') return std::nullopt;
    ++pos;
    // Hours may be written with one digit ("1:00") in some exports.
    std::size_t colon = s.find(':', pos);
    if (colon == std::string_view::npos || colon - pos < 1 || colon - pos > 2) return std::nullopt;
    if (!detail::parse_uint(s, pos, colon - pos, hh)) return std::nullopt;
    if (!detail::parse_uint(s, colon + 1, 2, mi)) return std::nullopt;
    pos = colon + 3;
    if (pos < s.size()) {
      if (s[pos] != ':' || !detail::parse_uint(s, pos + 1, 2, ss) || pos + 3 != s.size()) {
        return std::nullopt;
      }
    }
  }
  if (mi != 0 || ss != 0 || hh > 24) return std::nullopt;
  auto days = days_from_ymd(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  if (!days) return std::nullopt;
  // "24:00" is accepted as midnight of the next day (GEFCom convention).
  return *days * 24 + hh;
}

inline std::string format_day(DayNumber day) {
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{day}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

inline std::string format_timestamp(HourStamp h) {
  char buf[8];
  std::snprintf(buf, sizeof buf, " %02d:00", hour_of_day(h));
  return format_day(day_of(h)) + buf;
}

inline std::optional<DayNumber> parse_day(std::string_view s) {
  auto h = parse_timestamp(s);
  if (!h || hour_of_day(*h) != 0) return std::nullopt;
  return day_of(*h);
}

}  // namespace pvdiff
