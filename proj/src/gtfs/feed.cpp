#include "mobsim/gtfs/feed.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mobsim/core/csv.hpp"
#include "zip_reader.hpp"

namespace mobsim::gtfs {

namespace fs = std::filesystem;

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::bus:
      return "Bus";
    case Mode::metro:
      return "Metro";
    case Mode::tram:
      return "Tram";
    case Mode::cablecar:
      return "Cablecar";
    case Mode::other:
      break;
  }
  return "Transit";
}

Mode mode_from_route_type(int route_type) {
  switch (route_type) {
    case 0:
      return Mode::tram;
    case 1:
      return Mode::metro;
    case 3:
    case 11:
      return Mode::bus;
    case 5:
    case 6:
    case 7:
      return Mode::cablecar;
    default:
      break;
  }
  if (route_type >= 700 && route_type <= 799) return Mode::bus;  // extended bus types
  if (route_type >= 900 && route_type <= 906) return Mode::tram;
  return Mode::other;
}

size_t LoadReport::count(LoadIssue::Kind k) const {
  return static_cast<size_t>(
      std::count_if(issues.begin(), issues.end(), [&](const LoadIssue& i) { return i.kind == k; }));
}

namespace {

void issue(TransitFeed& feed, LoadIssue::Kind kind, const std::string& file, size_t line,
           const std::string& detail) {
  feed.report.issues.push_back({kind, file, line, detail});
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  try {
    size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_int(const std::string& s, int& out) {
  if (s.empty()) return false;
  try {
    size_t pos = 0;
    out = std::stoi(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_date(const std::string& s, Date& out) {
  try {
    out = Date::from_compact(s);
    return true;
  } catch (const DateParseError&) {
    return false;
  }
}

void load_stops(TransitFeed& feed, const csv::Table& t) {
  for (size_t r = 0; r < t.row_count(); ++r) {
    Stop s;
    s.id = t.get(r, "stop_id");
    s.name = t.get(r, "stop_name");
    if (s.id.empty() || !parse_double(t.get(r, "stop_lat"), s.position.lat) ||
        !parse_double(t.get(r, "stop_lon"), s.position.lon)) {
      issue(feed, LoadIssue::Kind::malformed_row, "stops.txt", r + 2,
            "missing stop_id or unparseable coordinates");
      continue;
    }
    feed.stops[s.id] = s;
  }
}

void load_routes(TransitFeed& feed, const csv::Table& t) {
  for (size_t r = 0; r < t.row_count(); ++r) {
    Route route;
    route.id = t.get(r, "route_id");
    if (route.id.empty()) {
      issue(feed, LoadIssue::Kind::malformed_row, "routes.txt", r + 2, "missing route_id");
      continue;
    }
    route.short_name = t.get(r, "route_short_name");
    if (route.short_name.empty()) route.short_name = t.get(r, "route_long_name");
    if (route.short_name.empty()) route.short_name = route.id;
    int type = -1;
    parse_int(t.get(r, "route_type"), type);
    route.mode = mode_from_route_type(type);
    feed.routes[route.id] = route;
  }
}

void load_calendar(TransitFeed& feed, const csv::Table& t) {
  static const char* kDays[7] = {"monday",  "tuesday", "wednesday", "thursday",
                                 "friday",  "saturday", "sunday"};
  for (size_t r = 0; r < t.row_count(); ++r) {
    ServiceCalendar cal;
    cal.service_id = t.get(r, "service_id");
    bool ok = !cal.service_id.empty();
    for (int d = 0; d < 7 && ok; ++d) {
      const std::string& v = t.get(r, kDays[d]);
      if (v != "0" && v != "1") {
        ok = false;
      } else {
        cal.weekdays[static_cast<size_t>(d)] = (v == "1");
      }
    }
    ok = ok && parse_date(t.get(r, "start_date"), cal.start_date) &&
         parse_date(t.get(r, "end_date"), cal.end_date);
    if (!ok) {
      issue(feed, LoadIssue::Kind::malformed_row, "calendar.txt", r + 2,
            "missing service_id, day flag not 0/1, or bad date");
      continue;
    }
    feed.calendars[cal.service_id] = cal;
  }
}

void load_calendar_dates(TransitFeed& feed, const csv::Table& t, bool has_calendar) {
  // Feed date range comes from calendar.txt when present; with only
  // calendar_dates.txt the exception dates themselves define it.
  Date lo = feed.feed_start;
  Date hi = feed.feed_end;
  bool have_range = has_calendar;
  struct Exception {
    std::string service_id;
    Date date;
    int type;
    size_t line;
  };
  std::vector<Exception> exceptions;
  for (size_t r = 0; r < t.row_count(); ++r) {
    Exception e;
    e.service_id = t.get(r, "service_id");
    e.line = r + 2;
    if (e.service_id.empty() || !parse_date(t.get(r, "date"), e.date) ||
        !parse_int(t.get(r, "exception_type"), e.type) || (e.type != 1 && e.type != 2)) {
      issue(feed, LoadIssue::Kind::malformed_row, "calendar_dates.txt", r + 2,
            "missing service_id, bad date, or exception_type not 1/2");
      continue;
    }
    exceptions.push_back(e);
    if (!have_range) {
      lo = hi = e.date;
      have_range = true;
    } else if (!has_calendar) {
      lo = std::min(lo, e.date);
      hi = std::max(hi, e.date);
    }
  }
  if (!has_calendar && have_range) {
    feed.feed_start = lo;
    feed.feed_end = hi;
  }
  for (const Exception& e : exceptions) {
    if (e.date < feed.feed_start || e.date > feed.feed_end) {
      issue(feed, LoadIssue::Kind::ignored_exception_date, "calendar_dates.txt", e.line,
            "exception date " + e.date.to_iso() + " outside feed date range");
      continue;
    }
    auto it = feed.calendars.find(e.service_id);
    if (it == feed.calendars.end()) {
      // Service defined only by exceptions: inactive weekday mask, all
      // activity comes from added dates.
      ServiceCalendar cal;
      cal.service_id = e.service_id;
      cal.start_date = feed.feed_start;
      cal.end_date = feed.feed_end;
      it = feed.calendars.emplace(e.service_id, cal).first;
    }
    if (e.type == 1) {
      it->second.added.insert(e.date);
    } else {
      it->second.removed.insert(e.date);
    }
  }
}

void load_trips(TransitFeed& feed, const csv::Table& t) {
  for (size_t r = 0; r < t.row_count(); ++r) {
    Trip trip;
    trip.id = t.get(r, "trip_id");
    trip.route_id = t.get(r, "route_id");
    trip.service_id = t.get(r, "service_id");
    if (trip.id.empty() || trip.route_id.empty() || trip.service_id.empty()) {
      issue(feed, LoadIssue::Kind::malformed_row, "trips.txt", r + 2,
            "missing trip_id, route_id or service_id");
      continue;
    }
    if (!feed.routes.count(trip.route_id)) {
      issue(feed, LoadIssue::Kind::dangling_reference, "trips.txt", r + 2,
            "trip " + trip.id + " references unknown route " + trip.route_id);
      ++feed.report.dropped_trips;
      continue;
    }
    if (!feed.calendars.count(trip.service_id)) {
      issue(feed, LoadIssue::Kind::dangling_reference, "trips.txt", r + 2,
            "trip " + trip.id + " references unknown service " + trip.service_id);
      ++feed.report.dropped_trips;
      continue;
    }
    feed.trips[trip.id] = trip;
  }
}

void load_stop_times(TransitFeed& feed, const csv::Table& t) {
  struct Row {
    StopTime st;
    size_t line;
  };
  std::map<std::string, std::vector<Row>> by_trip;
  std::set<std::string> poisoned;  // trips with a stop_time at an unknown stop

  for (size_t r = 0; r < t.row_count(); ++r) {
    const std::string& trip_id = t.get(r, "trip_id");
    if (!feed.trips.count(trip_id)) {
      issue(feed, LoadIssue::Kind::dangling_reference, "stop_times.txt", r + 2,
            "stop_time references unknown trip " + trip_id);
      ++feed.report.dropped_stop_times;
      continue;
    }
    StopTime st;
    st.stop_id = t.get(r, "stop_id");
    st.arrival = parse_hms(t.get(r, "arrival_time"));
    st.departure = parse_hms(t.get(r, "departure_time"));
    if (st.stop_id.empty() || st.arrival < 0 || st.departure < 0 ||
        st.departure < st.arrival || !parse_int(t.get(r, "stop_sequence"), st.sequence)) {
      issue(feed, LoadIssue::Kind::malformed_row, "stop_times.txt", r + 2,
            "bad stop_id, times, or stop_sequence");
      ++feed.report.dropped_stop_times;
      continue;
    }
    if (!feed.stops.count(st.stop_id)) {
      issue(feed, LoadIssue::Kind::dangling_reference, "stop_times.txt", r + 2,
            "trip " + trip_id + " visits unknown stop " + st.stop_id);
      poisoned.insert(trip_id);
      continue;
    }
    by_trip[trip_id].push_back({st, r + 2});
  }

  std::vector<std::string> drop;
  for (auto& [trip_id, trip] : feed.trips) {
    if (poisoned.count(trip_id)) {
      drop.push_back(trip_id);
      continue;
    }
    auto it = by_trip.find(trip_id);
    if (it == by_trip.end() || it->second.size() < 2) {
      issue(feed, LoadIssue::Kind::malformed_row, "stop_times.txt", 0,
            "trip " + trip_id + " has fewer than 2 stop times");
      drop.push_back(trip_id);
      continue;
    }
    auto& rows = it->second;
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.st.sequence < b.st.sequence; });
    bool ok = true;
    for (size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].st.sequence == rows[i - 1].st.sequence) {
        issue(feed, LoadIssue::Kind::malformed_row, "stop_times.txt", rows[i].line,
              "trip " + trip_id + " repeats stop_sequence");
        ok = false;
        break;
      }
      if (rows[i].st.arrival < rows[i - 1].st.departure) {
        issue(feed, LoadIssue::Kind::malformed_row, "stop_times.txt", rows[i].line,
              "trip " + trip_id + " has non-monotonic times");
        ok = false;
        break;
      }
    }
    if (!ok) {
      drop.push_back(trip_id);
      continue;
    }
    trip.stop_times.reserve(rows.size());
    for (const Row& row : rows) trip.stop_times.push_back(row.st);
  }
  for (const std::string& trip_id : drop) {
    feed.trips.erase(trip_id);
    ++feed.report.dropped_trips;
  }
}

}  // namespace

TransitFeed load_feed_from_tables(const std::map<std::string, std::string>& tables) {
  for (const char* required : {"stops.txt", "routes.txt", "trips.txt", "stop_times.txt"}) {
    if (!tables.count(required)) {
      throw FeedError(FeedError::Code::missing_table, std::string("missing table ") + required);
    }
  }
  bool has_calendar = tables.count("calendar.txt") > 0;
  bool has_calendar_dates = tables.count("calendar_dates.txt") > 0;
  if (!has_calendar && !has_calendar_dates) {
    throw FeedError(FeedError::Code::missing_table,
                    "missing table: need calendar.txt and/or calendar_dates.txt");
  }

  TransitFeed feed;
  load_stops(feed, csv::parse(tables.at("stops.txt")));
  load_routes(feed, csv::parse(tables.at("routes.txt")));
  if (has_calendar) {
    load_calendar(feed, csv::parse(tables.at("calendar.txt")));
    bool first = true;
    for (const auto& [id, cal] : feed.calendars) {
      if (first || cal.start_date < feed.feed_start) feed.feed_start = cal.start_date;
      if (first || cal.end_date > feed.feed_end) feed.feed_end = cal.end_date;
      first = false;
    }
    has_calendar = !feed.calendars.empty();
  }
  if (has_calendar_dates) {
    load_calendar_dates(feed, csv::parse(tables.at("calendar_dates.txt")), has_calendar);
  }
  if (feed.calendars.empty()) {
    throw FeedError(FeedError::Code::missing_table, "no usable service calendars");
  }
  load_trips(feed, csv::parse(tables.at("trips.txt")));
  load_stop_times(feed, csv::parse(tables.at("stop_times.txt")));

  for (const auto& [trip_id, trip] : feed.trips) {
    for (size_t i = 0; i < trip.stop_times.size(); ++i) {
      feed.stop_visits[trip.stop_times[i].stop_id].emplace_back(trip_id, i);
    }
  }
  return feed;
}

TransitFeed load_feed(const std::string& source) {
  std::map<std::string, std::string> tables;
  if (fs::is_directory(source)) {
    for (const char* name : {"stops.txt", "routes.txt", "trips.txt", "stop_times.txt",
                             "calendar.txt", "calendar_dates.txt"}) {
      fs::path p = fs::path(source) / name;
      if (!fs::exists(p)) continue;
      std::ifstream in(p, std::ios::binary);
      std::ostringstream buf;
      buf << in.rdbuf();
      tables[name] = buf.str();
    }
  } else if (fs::is_regular_file(source) && looks_like_zip(source)) {
    tables = read_zip(source);
  } else {
    throw FeedError(FeedError::Code::bad_source,
                    "feed source is neither a directory nor a zip archive: " + source);
  }
  return load_feed_from_tables(tables);
}

std::set<std::string> active_services(const TransitFeed& feed, const Date& date) {
  if (date < feed.feed_start || date > feed.feed_end) {
    throw FeedError(FeedError::Code::date_out_of_range,
                    "date " + date.to_iso() + " outside feed range " + feed.feed_start.to_iso() +
                        ".." + feed.feed_end.to_iso());
  }
  std::set<std::string> out;
  for (const auto& [id, cal] : feed.calendars) {
    if (cal.active_on(date)) out.insert(id);
  }
  return out;
}

std::vector<Departure> departures_at(const TransitFeed& feed, const std::string& stop_id,
                                     const Date& date, Sec t0, Sec t1) {
  if (!feed.stops.count(stop_id)) {
    throw FeedError(FeedError::Code::unknown_stop, "unknown stop " + stop_id);
  }
  std::set<std::string> active = active_services(feed, date);
  std::vector<Departure> out;
  auto visits = feed.stop_visits.find(stop_id);
  if (visits == feed.stop_visits.end()) return out;
  for (const auto& [trip_id, idx] : visits->second) {
    const Trip& trip = feed.trips.at(trip_id);
    if (!active.count(trip.service_id)) continue;
    Sec dep = trip.stop_times[idx].departure;
    if (dep >= t0 && dep < t1) {
      out.push_back({trip_id, trip.route_id, dep});
    }
  }
  std::sort(out.begin(), out.end(), [](const Departure& a, const Departure& b) {
    if (a.departure != b.departure) return a.departure < b.departure;
    return a.trip_id < b.trip_id;
  });
  return out;
}

}  // namespace mobsim::gtfs
