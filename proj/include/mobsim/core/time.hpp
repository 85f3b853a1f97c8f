#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mobsim {

// Seconds since an agreed midnight. GTFS-style values may exceed 24h.
using Sec = std::int64_t;

constexpr Sec kSecondsPerDay = 86400;

// Civil date. Thin wrapper over std::chrono so callers get day arithmetic,
// weekday queries and ISO formatting without touching <chrono> directly.
class Date {
 public:
  Date() : days_{0} {}

  static Date from_ymd(int year, unsigned month, unsigned day);
  // "YYYY-MM-DD"
  static Date from_iso(const std::string& s);
  // "YYYYMMDD" (GTFS calendar format)
  static Date from_compact(const std::string& s);

  std::string to_iso() const;
  std::string to_compact() const;

  // 0 = Monday ... 6 = Sunday
  int weekday_index() const;
  bool is_weekend() const { return weekday_index() >= 5; }
  const char* weekday_name() const;

  Date plus_days(int n) const;
  // *this - other, in days
  int days_since(const Date& other) const { return static_cast<int>(days_ - other.days_); }

  bool operator==(const Date& o) const { return days_ == o.days_; }
  bool operator!=(const Date& o) const { return days_ != o.days_; }
  bool operator<(const Date& o) const { return days_ < o.days_; }
  bool operator<=(const Date& o) const { return days_ <= o.days_; }
  bool operator>(const Date& o) const { return days_ > o.days_; }
  bool operator>=(const Date& o) const { return days_ >= o.days_; }

 private:
  explicit Date(std::int64_t days) : days_{days} {}
  std::int64_t days_;  // days since 1970-01-01
};

struct DateParseError : std::runtime_error {
  explicit DateParseError(const std::string& what) : std::runtime_error(what) {}
};

// "HH:MM:SS" or "H:MM:SS"; hours may exceed 23. Returns -1 on malformed input.
Sec parse_hms(const std::string& s);
// Seconds-of-day -> "HH:MM:SS" (hours not wrapped).
std::string format_hms(Sec t);
// Seconds-of-day -> "HH:MM", rounded down to the minute.
std::string format_hm(Sec t);
// date + seconds-of-day -> "YYYY-MM-DDTHH:MM:SS"; seconds >= 86400 roll the date.
std::string format_iso_datetime(const Date& date, Sec seconds_of_day);

// "morning" / "afternoon" / "evening" / "night"
const char* period_of_day(Sec seconds_of_day);

}  // namespace mobsim
