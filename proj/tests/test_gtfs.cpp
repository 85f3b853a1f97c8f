#include <doctest.h>

#include <filesystem>

#include "mobsim/gtfs/feed.hpp"
#include "support/fixtures.hpp"

using namespace mobsim;
using namespace mobsim::gtfs;

TEST_CASE("route_type mapping never rejects a feed") {
  CHECK(mode_from_route_type(3) == Mode::bus);
  CHECK(mode_from_route_type(1) == Mode::metro);
  CHECK(mode_from_route_type(0) == Mode::tram);
  CHECK(mode_from_route_type(6) == Mode::cablecar);
  CHECK(mode_from_route_type(715) == Mode::bus);
  CHECK(mode_from_route_type(9999) == Mode::other);
  CHECK(mode_from_route_type(-1) == Mode::other);
  CHECK(std::string(mode_name(Mode::bus)) == "Bus");
  CHECK(std::string(mode_name(Mode::metro)) == "Metro");
  CHECK(std::string(mode_name(Mode::other)) == "Transit");
}

TEST_CASE("clean feed loads fully") {
  TransitFeed feed = load_feed_from_tables(test::clean_feed_tables());
  CHECK(feed.stops.size() == 4);
  CHECK(feed.routes.size() == 2);
  CHECK(feed.trips.size() == 3);
  CHECK(feed.calendars.size() == 2);
  CHECK(feed.report.issues.empty());
  CHECK(feed.report.dropped_trips == 0);
  CHECK(feed.feed_start == Date::from_iso("2025-03-01"));
  CHECK(feed.feed_end == Date::from_iso("2025-03-31"));
  CHECK(feed.routes.at("R1").mode == Mode::bus);
  CHECK(feed.routes.at("R2").short_name == "A");
  REQUIRE(feed.trips.at("T1").stop_times.size() == 3);
  CHECK(feed.trips.at("T1").first_departure() == 8 * 3600);
  CHECK(feed.trips.at("T1").last_arrival() == 8 * 3600 + 600);
}

TEST_CASE("dirty rows are dropped and reported, never fatal") {
  TransitFeed feed = load_feed_from_tables(test::small_feed_tables());
  // Good trips survive.
  CHECK(feed.trips.count("T1"));
  CHECK(feed.trips.count("T2"));
  CHECK(feed.trips.count("T3"));
  // Broken ones are gone.
  CHECK_FALSE(feed.trips.count("T_badroute"));
  CHECK_FALSE(feed.trips.count("T_badservice"));
  CHECK_FALSE(feed.trips.count("T_short"));
  CHECK_FALSE(feed.trips.count("T_badstop"));
  CHECK(feed.report.dropped_trips == 4);
  CHECK(feed.report.count(LoadIssue::Kind::dangling_reference) >= 4);
  CHECK(feed.report.count(LoadIssue::Kind::ignored_exception_date) == 1);
  CHECK(feed.report.count(LoadIssue::Kind::malformed_row) >= 2);
  // The malformed T1 stop_time row was dropped but T1 keeps its 3 good rows.
  CHECK(feed.trips.at("T1").stop_times.size() == 3);
}

TEST_CASE("missing tables are fatal") {
  auto tables = test::clean_feed_tables();
  tables.erase("stop_times.txt");
  CHECK_THROWS_AS(load_feed_from_tables(tables), FeedError);
  try {
    load_feed_from_tables(tables);
  } catch (const FeedError& e) {
    CHECK(e.code == FeedError::Code::missing_table);
  }

  auto no_cal = test::clean_feed_tables();
  no_cal.erase("calendar.txt");
  no_cal.erase("calendar_dates.txt");
  CHECK_THROWS_AS(load_feed_from_tables(no_cal), FeedError);
}

TEST_CASE("calendar_dates alone can define services") {
  auto tables = test::clean_feed_tables();
  tables.erase("calendar.txt");
  tables["calendar_dates.txt"] =
      "service_id,date,exception_type\n"
      "WK,20250303,1\n"
      "WK,20250304,1\n"
      "WE,20250308,1\n";
  TransitFeed feed = load_feed_from_tables(tables);
  CHECK(feed.feed_start == Date::from_iso("2025-03-03"));
  CHECK(feed.feed_end == Date::from_iso("2025-03-08"));
  auto mon = active_services(feed, Date::from_iso("2025-03-03"));
  CHECK(mon == std::set<std::string>{"WK"});
  auto sat = active_services(feed, Date::from_iso("2025-03-08"));
  CHECK(sat == std::set<std::string>{"WE"});
  auto wed = active_services(feed, Date::from_iso("2025-03-05"));
  CHECK(wed.empty());
}

TEST_CASE("active_services applies mask, range and exceptions") {
  TransitFeed feed = load_feed_from_tables(test::clean_feed_tables());
  // Plain Monday: weekday service only.
  CHECK(active_services(feed, Date::from_iso("2025-03-03")) == std::set<std::string>{"WK"});
  // Plain Saturday: weekend service only.
  CHECK(active_services(feed, Date::from_iso("2025-03-01")) == std::set<std::string>{"WE"});
  // Saturday with an added exception for the weekday service.
  CHECK(active_services(feed, Date::from_iso("2025-03-08")) ==
        std::set<std::string>{"WE", "WK"});
  // Monday with a removed exception: nothing runs.
  CHECK(active_services(feed, Date::from_iso("2025-03-10")).empty());
}

TEST_CASE("active_services rejects out-of-range dates") {
  TransitFeed feed = load_feed_from_tables(test::clean_feed_tables());
  CHECK_THROWS_AS(active_services(feed, Date::from_iso("2025-04-05")), FeedError);
  try {
    active_services(feed, Date::from_iso("2025-02-01"));
    FAIL("expected FeedError");
  } catch (const FeedError& e) {
    CHECK(e.code == FeedError::Code::date_out_of_range);
  }
}

TEST_CASE("departures_at returns the hand-scheduled departures in order") {
  TransitFeed feed = load_feed_from_tables(test::clean_feed_tables());
  Date monday = Date::from_iso("2025-03-03");
  auto deps = departures_at(feed, "S1", monday, 8 * 3600, 9 * 3600);
  REQUIRE(deps.size() == 2);
  CHECK(deps[0].trip_id == "T1");
  CHECK(deps[0].route_id == "R1");
  CHECK(deps[0].departure == 8 * 3600);
  CHECK(deps[1].trip_id == "T2");
  CHECK(deps[1].departure == 8 * 3600 + 1800);

  // Half-open window: the 08:00 departure is excluded from [08:00:10, ...).
  auto later = departures_at(feed, "S1", monday, 8 * 3600 + 10, 9 * 3600);
  REQUIRE(later.size() == 1);
  CHECK(later[0].trip_id == "T2");

  // Empty window.
  CHECK(departures_at(feed, "S1", monday, 8 * 3600, 8 * 3600).empty());

  // Weekend date on a stop served only by the weekday route.
  CHECK(departures_at(feed, "S1", Date::from_iso("2025-03-01"), 0, 24 * 3600).empty());

  // Metro runs weekends from S2.
  auto sat = departures_at(feed, "S2", Date::from_iso("2025-03-01"), 0, 24 * 3600);
  REQUIRE(sat.size() == 1);
  CHECK(sat[0].trip_id == "T3");

  CHECK_THROWS_AS(departures_at(feed, "NOPE", monday, 0, 100), FeedError);
}

TEST_CASE("every departure belongs to a service active that day") {
  TransitFeed feed = load_feed_from_tables(test::small_feed_tables());
  for (const char* iso : {"2025-03-03", "2025-03-08", "2025-03-10"}) {
    Date d = Date::from_iso(iso);
    auto active = active_services(feed, d);
    for (const auto& [stop_id, stop] : feed.stops) {
      auto deps = departures_at(feed, stop_id, d, 0, 30 * 3600);
      Sec prev = -1;
      for (const auto& dep : deps) {
        CHECK(active.count(feed.trips.at(dep.trip_id).service_id) == 1);
        CHECK(dep.departure >= prev);
        prev = dep.departure;
      }
    }
  }
}

TEST_CASE("loading is deterministic") {
  TransitFeed a = load_feed_from_tables(test::small_feed_tables());
  TransitFeed b = load_feed_from_tables(test::small_feed_tables());
  REQUIRE(a.trips.size() == b.trips.size());
  auto ita = a.trips.begin();
  auto itb = b.trips.begin();
  for (; ita != a.trips.end(); ++ita, ++itb) {
    CHECK(ita->first == itb->first);
    CHECK(ita->second.stop_times.size() == itb->second.stop_times.size());
  }
  CHECK(a.report.issues.size() == b.report.issues.size());
}

TEST_CASE("feed loads from a directory and from a zip archive") {
  auto tables = test::clean_feed_tables();

  std::string dir = test::make_temp_dir("gtfs-dir");
  test::write_tables(dir, tables);
  TransitFeed from_dir = load_feed(dir);
  CHECK(from_dir.trips.size() == 3);

  std::string zdir = test::make_temp_dir("gtfs-zip");
  std::string zip_path = zdir + "/feed.zip";
  test::write_zip(zip_path, tables);
  TransitFeed from_zip = load_feed(zip_path);
  CHECK(from_zip.trips.size() == 3);
  CHECK(from_zip.stops.size() == from_dir.stops.size());
  CHECK(from_zip.stops.at("S2").name == "Roseraie");

  CHECK_THROWS_AS(load_feed(dir + "/stops.txt"), FeedError);  // not a zip
  CHECK_THROWS_AS(load_feed("/nonexistent/path"), FeedError);

  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(zdir);
}
