#include <doctest.h>

#include "mobsim/core/csv.hpp"
#include "mobsim/core/geo.hpp"
#include "mobsim/core/time.hpp"

using namespace mobsim;

TEST_CASE("date parsing and formatting round-trip") {
  Date d = Date::from_iso("2025-03-03");
  CHECK(d.to_iso() == "2025-03-03");
  CHECK(d.to_compact() == "20250303");
  CHECK(Date::from_compact("20250303") == d);
  CHECK(Date::from_ymd(2025, 3, 3) == d);

  CHECK_THROWS_AS(Date::from_iso("2025/03/03"), DateParseError);
  CHECK_THROWS_AS(Date::from_iso("2025-13-03"), DateParseError);
  CHECK_THROWS_AS(Date::from_compact("2025030"), DateParseError);
  CHECK_THROWS_AS(Date::from_compact("20250230"), DateParseError);
}

TEST_CASE("weekday index runs Monday=0 to Sunday=6") {
  CHECK(Date::from_iso("2025-03-03").weekday_index() == 0);  // Monday
  CHECK(Date::from_iso("2025-03-07").weekday_index() == 4);  // Friday
  CHECK(Date::from_iso("2025-03-08").weekday_index() == 5);  // Saturday
  CHECK(Date::from_iso("2025-03-09").weekday_index() == 6);  // Sunday
  CHECK(Date::from_iso("2025-03-08").is_weekend());
  CHECK_FALSE(Date::from_iso("2025-03-07").is_weekend());
  CHECK(std::string(Date::from_iso("2025-03-03").weekday_name()) == "Monday");
  CHECK(std::string(Date::from_iso("2025-03-09").weekday_name()) == "Sunday");
}

TEST_CASE("date arithmetic") {
  Date d = Date::from_iso("2025-02-27");
  CHECK(d.plus_days(2).to_iso() == "2025-03-01");  // leap check: 2025 not leap
  CHECK(d.plus_days(2).days_since(d) == 2);
  CHECK(Date::from_iso("2024-02-28").plus_days(1).to_iso() == "2024-02-29");
  CHECK(Date::from_iso("2025-12-31").plus_days(1).to_iso() == "2026-01-01");
  CHECK(d < d.plus_days(1));
  CHECK(d.plus_days(-1).to_iso() == "2025-02-26");
}

TEST_CASE("time-of-day parsing accepts GTFS over-24h values") {
  CHECK(parse_hms("08:00:00") == 28800);
  CHECK(parse_hms("8:05:30") == 29130);
  CHECK(parse_hms("25:10:00") == 90600);
  CHECK(parse_hms("00:00:00") == 0);
  CHECK(parse_hms("") == -1);
  CHECK(parse_hms("8:00") == -1);
  CHECK(parse_hms("aa:bb:cc") == -1);
  CHECK(parse_hms("08:61:00") == -1);
  CHECK(parse_hms("08:00:61") == -1);
}

TEST_CASE("time-of-day formatting") {
  CHECK(format_hms(28800) == "08:00:00");
  CHECK(format_hms(90600) == "25:10:00");
  CHECK(format_hm(29130) == "08:05");
  CHECK(format_hm(27000) == "07:30");
  CHECK(format_iso_datetime(Date::from_iso("2025-03-03"), 28800) == "2025-03-03T08:00:00");
  CHECK(format_iso_datetime(Date::from_iso("2025-03-03"), 90600) == "2025-03-04T01:10:00");
}

TEST_CASE("period of day boundaries") {
  CHECK(std::string(period_of_day(4 * 3600)) == "night");
  CHECK(std::string(period_of_day(5 * 3600)) == "morning");
  CHECK(std::string(period_of_day(11 * 3600 + 3599)) == "morning");
  CHECK(std::string(period_of_day(12 * 3600)) == "afternoon");
  CHECK(std::string(period_of_day(17 * 3600)) == "evening");
  CHECK(std::string(period_of_day(22 * 3600)) == "night");
}

TEST_CASE("haversine distance") {
  GeoPoint a{0.0, 0.0};
  GeoPoint b{0.0, 1.0};
  CHECK(haversine_meters(a, b) == doctest::Approx(111194.93).epsilon(1e-4));
  GeoPoint pole{90.0, 0.0};
  CHECK(haversine_meters(a, pole) == doctest::Approx(6371000.0 * 3.14159265358979 / 2).epsilon(1e-9));
  CHECK(haversine_meters(a, a) == 0.0);
  // Symmetry
  GeoPoint t1{43.6045, 1.4440};
  GeoPoint t2{43.6111, 1.4544};
  CHECK(haversine_meters(t1, t2) == doctest::Approx(haversine_meters(t2, t1)));
}

TEST_CASE("geo lerp endpoints and midpoint") {
  GeoPoint a{43.0, 1.0};
  GeoPoint b{44.0, 2.0};
  CHECK(lerp(a, b, 0.0) == a);
  CHECK(lerp(a, b, 1.0) == b);
  GeoPoint mid = lerp(a, b, 0.5);
  CHECK(mid.lat == doctest::Approx(43.5));
  CHECK(mid.lon == doctest::Approx(1.5));
}

TEST_CASE("csv parses quoted fields, CRLF and BOM") {
  std::string content =
      "\xEF\xBB\xBFid,name,note\r\n"
      "1,\"Matabiau, gare\",plain\r\n"
      "2,\"he said \"\"hi\"\"\",\r\n"
      "\r\n"
      "3,short\n";
  csv::Table t = csv::parse(content);
  REQUIRE(t.row_count() == 3);
  CHECK(t.header() == std::vector<std::string>{"id", "name", "note"});
  CHECK(t.get(0, "id") == "1");
  CHECK(t.get(0, "name") == "Matabiau, gare");
  CHECK(t.get(1, "name") == "he said \"hi\"");
  CHECK(t.get(1, "note") == "");
  CHECK(t.get(2, "note") == "");  // short row
  CHECK(t.get(0, "absent") == "");
  CHECK_FALSE(t.has_column("absent"));
}

TEST_CASE("csv handles newline inside quoted field") {
  csv::Table t = csv::parse("a,b\n1,\"x\ny\"\n");
  REQUIRE(t.row_count() == 1);
  CHECK(t.get(0, "b") == "x\ny");
}

TEST_CASE("csv quote escapes only when needed") {
  CHECK(csv::quote("plain") == "plain");
  CHECK(csv::quote("a,b") == "\"a,b\"");
  CHECK(csv::quote("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv::quote("two\nlines") == "\"two\nlines\"");
}
