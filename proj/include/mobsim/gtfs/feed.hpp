#pragma once

#include <array>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mobsim/core/geo.hpp"
#include "mobsim/core/time.hpp"

namespace mobsim::gtfs {

enum class Mode { bus, metro, tram, cablecar, other };

// Display name used in rendered itineraries ("Bus", "Metro", ...).
const char* mode_name(Mode m);
Mode mode_from_route_type(int route_type);

struct Stop {
  std::string id;
  std::string name;
  GeoPoint position;
};

struct Route {
  std::string id;
  std::string short_name;
  Mode mode = Mode::other;
};

struct StopTime {
  std::string stop_id;
  Sec arrival = 0;    // seconds since service midnight, may exceed 24h
  Sec departure = 0;  // departure >= arrival
  int sequence = 0;
};

struct Trip {
  std::string id;
  std::string route_id;
  std::string service_id;
  std::vector<StopTime> stop_times;  // sorted by sequence

  Sec first_departure() const { return stop_times.front().departure; }
  Sec last_arrival() const { return stop_times.back().arrival; }
};

struct ServiceCalendar {
  std::string service_id;
  std::array<bool, 7> weekdays{};  // Monday..Sunday
  Date start_date;
  Date end_date;
  std::set<Date> added;    // exception type 1
  std::set<Date> removed;  // exception type 2

  bool active_on(const Date& d) const {
    if (removed.count(d)) return false;
    if (added.count(d)) return true;
    return d >= start_date && d <= end_date && weekdays[static_cast<size_t>(d.weekday_index())];
  }
};

// Why a row or reference was rejected during loading. Loading keeps going;
// the report is how dirt in real feeds surfaces.
struct LoadIssue {
  enum class Kind { malformed_row, dangling_reference, ignored_exception_date };
  Kind kind;
  std::string file;
  size_t line = 0;  // 0 when not row-specific
  std::string detail;
};

struct LoadReport {
  std::vector<LoadIssue> issues;
  size_t dropped_trips = 0;
  size_t dropped_stop_times = 0;

  size_t count(LoadIssue::Kind k) const;
};

struct TransitFeed {
  std::map<std::string, Stop> stops;
  std::map<std::string, Route> routes;
  std::map<std::string, Trip> trips;
  std::map<std::string, ServiceCalendar> calendars;
  Date feed_start;
  Date feed_end;
  LoadReport report;

  // stop id -> (trip id, index into that trip's stop_times), for departure
  // queries and the kernel's boarding checks.
  std::map<std::string, std::vector<std::pair<std::string, size_t>>> stop_visits;
};

struct FeedError : std::runtime_error {
  enum class Code { missing_table, malformed_row, unknown_stop, date_out_of_range, bad_source };
  FeedError(Code c, const std::string& what) : std::runtime_error(what), code{c} {}
  Code code;
};

// Load a feed from a directory of GTFS .txt tables or from a .zip archive.
// Requires stops/routes/trips/stop_times plus calendar and/or calendar_dates.
// Rows and cross-references that fail validation are dropped and reported.
TransitFeed load_feed(const std::string& source);

// Same, from already-read table contents keyed by file name ("stops.txt", ...).
TransitFeed load_feed_from_tables(const std::map<std::string, std::string>& tables);

// Service ids active on `date` (weekday mask + date range, then exceptions).
std::set<std::string> active_services(const TransitFeed& feed, const Date& date);

struct Departure {
  std::string trip_id;
  std::string route_id;
  Sec departure;
};

// Departures from `stop_id` on `date` within [t0, t1), sorted by departure
// time then trip id. Only trips whose service is active on `date`.
std::vector<Departure> departures_at(const TransitFeed& feed, const std::string& stop_id,
                                     const Date& date, Sec t0, Sec t1);

}  // namespace mobsim::gtfs
