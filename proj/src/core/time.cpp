#include "mobsim/core/time.hpp"

#include <cstdio>

namespace mobsim {

namespace {

namespace chr = std::chrono;

std::int64_t to_days(int y, unsigned m, unsigned d) {
  chr::year_month_day ymd{chr::year{y}, chr::month{m}, chr::day{d}};
  if (!ymd.ok()) {
    throw DateParseError("invalid calendar date");
  }
  return chr::sys_days{ymd}.time_since_epoch().count();
}

chr::year_month_day to_ymd(std::int64_t days) {
  return chr::year_month_day{chr::sys_days{chr::days{days}}};
}

}  // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  return Date{to_days(year, month, day)};
}

Date Date::from_iso(const std::string& s) {
  int y = 0;
  unsigned m = 0, d = 0;
  if (std::sscanf(s.c_str(), "%4d-%2u-%2u", &y, &m, &d) != 3 || s.size() != 10) {
    throw DateParseError("expected YYYY-MM-DD, got '" + s + "'");
  }
  return Date{to_days(y, m, d)};
}

Date Date::from_compact(const std::string& s) {
  int y = 0;
  unsigned m = 0, d = 0;
  if (std::sscanf(s.c_str(), "%4d%2u%2u", &y, &m, &d) != 3 || s.size() != 8) {
    throw DateParseError("expected YYYYMMDD, got '" + s + "'");
  }
  return Date{to_days(y, m, d)};
}

std::string Date::to_iso() const {
  auto ymd = to_ymd(days_);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string Date::to_compact() const {
  auto ymd = to_ymd(days_);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%04d%02u%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int Date::weekday_index() const {
  chr::weekday wd{chr::sys_days{chr::days{days_}}};
  return static_cast<int>(wd.iso_encoding()) - 1;  // Monday=1..Sunday=7 -> 0..6
}

const char* Date::weekday_name() const {
  static const char* names[] = {"Monday", "Tuesday",  "Wednesday", "Thursday",
                                "Friday", "Saturday", "Sunday"};
  return names[weekday_index()];
}

Date Date::plus_days(int n) const { return Date{days_ + n}; }

Sec parse_hms(const std::string& s) {
  int h = 0, m = 0, sec = 0;
  int consumed = 0;
  if (std::sscanf(s.c_str(), "%d:%d:%d%n", &h, &m, &sec, &consumed) != 3) {
    return -1;
  }
  if (static_cast<size_t>(consumed) != s.size() || h < 0 || m < 0 || m > 59 || sec < 0 ||
      sec > 59) {
    return -1;
  }
  return static_cast<Sec>(h) * 3600 + m * 60 + sec;
}

std::string format_hms(Sec t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", static_cast<long long>(t / 3600),
                static_cast<long long>((t / 60) % 60), static_cast<long long>(t % 60));
  return buf;
}

std::string format_hm(Sec t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld", static_cast<long long>(t / 3600),
                static_cast<long long>((t / 60) % 60));
  return buf;
}

std::string format_iso_datetime(const Date& date, Sec seconds_of_day) {
  Date d = date.plus_days(static_cast<int>(seconds_of_day / kSecondsPerDay));
  Sec tod = seconds_of_day % kSecondsPerDay;
  return d.to_iso() + "T" + format_hms(tod);
}

const char* period_of_day(Sec seconds_of_day) {
  Sec h = (seconds_of_day % kSecondsPerDay) / 3600;
  if (h >= 5 && h < 12) return "morning";
  if (h >= 12 && h < 17) return "afternoon";
  if (h >= 17 && h < 22) return "evening";
  return "night";
}

}  // namespace mobsim
