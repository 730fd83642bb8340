#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace xsynth {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problem with user-supplied input (bad record, bad file, bad argument).
class InputError : public Error {
 public:
  using Error::Error;
};

class ParseError : public InputError {
 public:
  ParseError(std::string field, const std::string& detail)
      : InputError("parse error in field '" + field + "': " + detail), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ValidationError : public InputError {
 public:
  ValidationError(std::string field, const std::string& detail)
      : InputError("invalid '" + field + "': " + detail), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class NotFoundError : public InputError {
 public:
  using InputError::InputError;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Time
// ---------------------------------------------------------------------------

using Instant = std::chrono::sys_seconds;
using Seconds = std::chrono::seconds;

inline constexpr std::int64_t kSecondsPerDay = 86400;

inline Seconds days(std::int64_t n) { return Seconds{n * kSecondsPerDay}; }

inline std::int64_t epoch_seconds(Instant t) { return t.time_since_epoch().count(); }

inline Instant from_epoch(std::int64_t s) { return Instant{Seconds{s}}; }

namespace detail {
inline bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  for (std::size_t i = pos; i < pos + len; ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  auto res = std::from_chars(s.data() + pos, s.data() + pos + len, out);
  return res.ec == std::errc{};
}
}  // namespace detail

/// Parses `YYYY-MM-DDTHH:MM:SSZ`. Returns false on anything else.
inline bool try_parse_utc(std::string_view s, Instant& out) {
  using namespace std::chrono;
  if (s.size() != 20 || s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' ||
      s[16] != ':' || s[19] != 'Z')
    return false;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  if (!detail::parse_fixed_int(s, 0, 4, y) || !detail::parse_fixed_int(s, 5, 2, mo) ||
      !detail::parse_fixed_int(s, 8, 2, d) || !detail::parse_fixed_int(s, 11, 2, h) ||
      !detail::parse_fixed_int(s, 14, 2, mi) || !detail::parse_fixed_int(s, 17, 2, se))
    return false;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || se > 59) return false;
  out = sys_days{ymd} + hours{h} + minutes{mi} + Seconds{se};
  return true;
}

inline Instant parse_utc(std::string_view s) {
  Instant t;
  if (!try_parse_utc(s, t)) throw ParseError("ts", "expected YYYY-MM-DDTHH:MM:SSZ, got '" + std::string(s) + "'");
  return t;
}

inline std::string format_utc(Instant t) {
  using namespace std::chrono;
  const auto day_point = floor<std::chrono::days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02lldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long long>(hms.seconds().count()));
  return buf;
}

/// Start of the UTC day containing `t`.
inline Instant day_floor(Instant t) {
  return std::chrono::time_point_cast<Seconds>(std::chrono::floor<std::chrono::days>(t));
}

/// Half-open interval [start, end).
struct Window {
  Instant start;
  Instant end;

  Window() = default;
  Window(Instant s, Instant e) : start(s), end(e) {
    if (!(s < e)) throw ValidationError("window", "start must precede end");
  }

  bool contains(Instant t) const noexcept { return start <= t && t < end; }
  std::int64_t length_seconds() const noexcept { return (end - start).count(); }

  /// Window of `n_days` ending (exclusively) at `end`.
  static Window ending_at(Instant end, std::int64_t n_days) { return Window{end - days(n_days), end}; }

  friend bool operator==(const Window&, const Window&) = default;
};

// ---------------------------------------------------------------------------
// Hashing and text
// ---------------------------------------------------------------------------

/// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
inline std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// Lowercases, trims, and collapses internal whitespace runs to one space.
inline std::string normalize_space_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

/// Lowercase ASCII alphanumeric runs; everything else separates tokens.
inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

}  // namespace xsynth
