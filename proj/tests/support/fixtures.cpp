#include "fixtures.hpp"

#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace mobsim::test {

namespace fs = std::filesystem;

std::map<std::string, std::string> clean_feed_tables() {
  std::map<std::string, std::string> t;
  t["stops.txt"] =
      "stop_id,stop_name,stop_lat,stop_lon\n"
      "S1,Hauts de Bonnefoy,43.6200,1.4600\n"
      "S2,Roseraie,43.6300,1.4700\n"
      "S3,Bagatelle,43.5800,1.4200\n"
      "S4,Jean Jaures,43.6060,1.4490\n";
  t["routes.txt"] =
      "route_id,route_short_name,route_type\n"
      "R1,36,3\n"
      "R2,A,1\n";
  t["calendar.txt"] =
      "service_id,monday,tuesday,wednesday,thursday,friday,saturday,sunday,start_date,end_date\n"
      "WK,1,1,1,1,1,0,0,20250301,20250331\n"
      "WE,0,0,0,0,0,1,1,20250301,20250331\n";
  t["calendar_dates.txt"] =
      "service_id,date,exception_type\n"
      "WK,20250310,2\n"
      "WK,20250308,1\n";
  t["trips.txt"] =
      "route_id,service_id,trip_id\n"
      "R1,WK,T1\n"
      "R1,WK,T2\n"
      "R2,WE,T3\n";
  t["stop_times.txt"] =
      "trip_id,arrival_time,departure_time,stop_id,stop_sequence\n"
      "T1,08:00:00,08:00:00,S1,1\n"
      "T1,08:04:00,08:04:00,S2,2\n"
      "T1,08:10:00,08:10:00,S3,3\n"
      "T2,08:30:00,08:30:00,S1,1\n"
      "T2,08:34:00,08:34:00,S2,2\n"
      "T2,08:40:00,08:40:00,S3,3\n"
      "T3,09:00:00,09:00:00,S2,1\n"
      "T3,09:15:00,09:15:00,S4,2\n";
  return t;
}

std::map<std::string, std::string> small_feed_tables() {
  auto t = clean_feed_tables();
  // One exception date outside the feed range (ignored with a warning).
  t["calendar_dates.txt"] += "WK,20250412,1\n";
  // A trip on an unknown route, one on an unknown service, one with a single
  // stop time.
  t["trips.txt"] +=
      "RX,WK,T_badroute\n"
      "R1,SX,T_badservice\n"
      "R1,WK,T_short\n"
      "R1,WK,T_badstop\n";
  t["stop_times.txt"] +=
      "T_short,10:00:00,10:00:00,S1,1\n"
      "T_badstop,10:00:00,10:00:00,S1,1\n"
      "T_badstop,10:05:00,10:05:00,SX,2\n"
      "T_unknown,10:00:00,10:00:00,S1,1\n"
      "T1,eight,08:20:00,S4,4\n";
  return t;
}

std::map<std::string, std::string> line_feed_tables() {
  std::map<std::string, std::string> t;
  t["stops.txt"] =
      "stop_id,stop_name,stop_lat,stop_lon\n"
      "X,Gare Nord,0,0\n"
      "W,Gare Nord Parvis,0,0.001\n"
      "Y,Place Centrale,0,0.05\n"
      "Z,Place Centrale Est,0,0.0505\n"
      "Q,Quartier Sud,0,0.10\n"
      "P5,Terminus Ouest,0,0.15\n"
      "M1,Marche Un,0,0.20\n"
      "M2,Marche Deux,0,0.208\n";
  t["routes.txt"] =
      "route_id,route_short_name,route_type\n"
      "RA,A,1\n"
      "RB,B,3\n"
      "RC,C,3\n"
      "RD,D,3\n"
      "RE,E,3\n"
      "RF,F,0\n"
      "RH,H,3\n"
      "RI,I,3\n";
  t["calendar.txt"] =
      "service_id,monday,tuesday,wednesday,thursday,friday,saturday,sunday,start_date,end_date\n"
      "ALL,1,1,1,1,1,1,1,20250301,20250331\n";
  t["trips.txt"] =
      "route_id,service_id,trip_id\n"
      "RA,ALL,TA\n"
      "RA,ALL,TA2\n"
      "RB,ALL,TB\n"
      "RC,ALL,TC\n"
      "RD,ALL,TD\n"
      "RE,ALL,TE\n"
      "RF,ALL,TF\n"
      "RH,ALL,TH\n"
      "RI,ALL,TI\n";
  t["stop_times.txt"] =
      "trip_id,arrival_time,departure_time,stop_id,stop_sequence\n"
      "TA,08:05:00,08:05:00,X,1\n"
      "TA,08:20:00,08:20:00,Y,2\n"
      "TA2,09:05:00,09:05:00,X,1\n"
      "TA2,09:20:00,09:20:00,Y,2\n"
      "TB,08:10:00,08:10:00,X,1\n"
      "TB,08:35:00,08:35:00,Y,2\n"
      "TC,08:12:00,08:12:00,W,1\n"
      "TC,08:30:00,08:30:00,Z,2\n"
      "TD,08:25:00,08:25:00,Y,1\n"
      "TD,08:40:00,08:40:00,Q,2\n"
      "TE,08:06:00,08:06:00,X,1\n"
      "TE,08:50:00,08:50:00,Q,2\n"
      "TF,08:32:00,08:32:00,Z,1\n"
      "TF,08:55:00,08:55:00,P5,2\n"
      "TH,08:00:30,08:00:30,M1,1\n"
      "TH,08:01:30,08:01:30,M2,2\n"
      "TI,08:01:00,08:01:00,M1,1\n"
      "TI,08:02:00,08:02:00,M2,2\n";
  return t;
}

std::map<std::string, std::string> random_feed_tables(std::mt19937& rng) {
  std::uniform_int_distribution<int> n_stops_d(4, 9);
  std::uniform_int_distribution<int> n_trips_d(3, 20);
  std::uniform_real_distribution<double> coord(0.0, 0.02);
  int n_stops = n_stops_d(rng);
  int n_trips = n_trips_d(rng);

  std::map<std::string, std::string> t;
  std::string stops = "stop_id,stop_name,stop_lat,stop_lon\n";
  for (int i = 0; i < n_stops; ++i) {
    char row[128];
    std::snprintf(row, sizeof row, "S%d,Stop %d,%.6f,%.6f\n", i, i, coord(rng), coord(rng));
    stops += row;
  }
  t["stops.txt"] = stops;

  std::uniform_int_distribution<int> n_routes_d(1, 6);
  int n_routes = n_routes_d(rng);
  std::string routes = "route_id,route_short_name,route_type\n";
  for (int r = 0; r < n_routes; ++r) {
    routes += "R" + std::to_string(r) + "," + std::to_string(10 + r) + ",3\n";
  }
  t["routes.txt"] = routes;

  t["calendar.txt"] =
      "service_id,monday,tuesday,wednesday,thursday,friday,saturday,sunday,start_date,end_date\n"
      "ALL,1,1,1,1,1,1,1,20250301,20250331\n";

  std::string trips = "route_id,service_id,trip_id\n";
  std::string stop_times = "trip_id,arrival_time,departure_time,stop_id,stop_sequence\n";
  std::uniform_int_distribution<int> route_d(0, n_routes - 1);
  std::uniform_int_distribution<int> len_d(2, std::min(5, n_stops));
  std::uniform_int_distribution<int> start_d(7 * 3600, 9 * 3600);
  std::uniform_int_distribution<int> gap_d(60, 600);
  std::uniform_int_distribution<int> stop_d(0, n_stops - 1);
  for (int tr = 0; tr < n_trips; ++tr) {
    trips += "R" + std::to_string(route_d(rng)) + ",ALL,T" + std::to_string(tr) + "\n";
    int len = len_d(rng);
    std::vector<int> seq;
    while (static_cast<int>(seq.size()) < len) {
      int s = stop_d(rng);
      if (std::find(seq.begin(), seq.end(), s) == seq.end()) seq.push_back(s);
    }
    Sec tm = start_d(rng);
    for (int i = 0; i < len; ++i) {
      if (i > 0) tm += gap_d(rng);
      stop_times += "T" + std::to_string(tr) + "," + format_hms(tm) + "," + format_hms(tm) +
                    ",S" + std::to_string(seq[static_cast<size_t>(i)]) + "," +
                    std::to_string(i + 1) + "\n";
    }
  }
  t["trips.txt"] = trips;
  t["stop_times.txt"] = stop_times;
  return t;
}

planner::PlanQuery random_query(std::mt19937& rng) {
  std::uniform_real_distribution<double> coord(0.0, 0.02);
  std::uniform_int_distribution<int> depart_d(6 * 3600 + 1800, 9 * 3600 + 1800);
  planner::PlanQuery q;
  q.origin = {coord(rng), coord(rng)};
  q.destination = {coord(rng), coord(rng)};
  q.depart_after = depart_d(rng);
  q.date = Date::from_iso("2025-03-05");
  q.max_options = 4;
  return q;
}

planner::Itinerary rendered_text_fixture() {
  using planner::Leg;
  planner::Itinerary it;
  Leg bus;
  bus.kind = Leg::Kind::transit;
  bus.from_stop = "HB";
  bus.from_name = "Hauts de Bonnefoy";
  bus.to_stop = "RO";
  bus.to_name = "Roseraie";
  bus.start = 8 * 3600 + 6 * 60;
  bus.end = 8 * 3600 + 10 * 60;
  bus.route_short_name = "36";
  bus.mode = gtfs::Mode::bus;
  bus.trip_id = "bus36-1";
  Leg metro;
  metro.kind = Leg::Kind::transit;
  metro.from_stop = "RO";
  metro.from_name = "Roseraie";
  metro.to_stop = "BA";
  metro.to_name = "Bagatelle";
  metro.start = 8 * 3600 + 12 * 60;
  metro.end = 8 * 3600 + 27 * 60;
  metro.route_short_name = "A";
  metro.mode = gtfs::Mode::metro;
  metro.trip_id = "metroA-1";
  it.legs = {bus, metro};
  it.depart = 8 * 3600 + 3 * 60;  // three minutes after the 08:00 decision
  it.arrive = metro.end;
  it.total_walk_seconds = 15 * 60;
  it.total_walk_meters = 757.0;
  it.wait_before_start_seconds = 0;
  return it;
}

std::string make_temp_dir(const std::string& prefix) {
  static std::atomic<unsigned> counter{0};
  fs::path base = fs::temp_directory_path();
  fs::path dir;
  do {
    dir = base / (prefix + "-" + std::to_string(::getpid()) + "-" +
                  std::to_string(counter.fetch_add(1)));
  } while (fs::exists(dir));
  fs::create_directories(dir);
  return dir.string();
}

void write_tables(const std::string& dir, const std::map<std::string, std::string>& tables) {
  for (const auto& [name, content] : tables) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    out << content;
  }
}

namespace {

void put16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put32(std::string& b, std::uint32_t v) {
  put16(b, static_cast<std::uint16_t>(v & 0xffff));
  put16(b, static_cast<std::uint16_t>((v >> 16) & 0xffff));
}

}  // namespace

void write_zip(const std::string& zip_path, const std::map<std::string, std::string>& tables) {
  std::string out;
  std::string central;
  for (const auto& [name, content] : tables) {
    std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(content.data()), static_cast<uInt>(content.size())));
    std::uint32_t offset = static_cast<std::uint32_t>(out.size());
    put32(out, 0x04034b50);
    put16(out, 20);  // version needed
    put16(out, 0);   // flags
    put16(out, 0);   // method: stored
    put16(out, 0);   // mod time
    put16(out, 0);   // mod date
    put32(out, crc);
    put32(out, static_cast<std::uint32_t>(content.size()));
    put32(out, static_cast<std::uint32_t>(content.size()));
    put16(out, static_cast<std::uint16_t>(name.size()));
    put16(out, 0);  // extra len
    out += name;
    out += content;

    put32(central, 0x02014b50);
    put16(central, 20);  // version made by
    put16(central, 20);  // version needed
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put32(central, crc);
    put32(central, static_cast<std::uint32_t>(content.size()));
    put32(central, static_cast<std::uint32_t>(content.size()));
    put16(central, static_cast<std::uint16_t>(name.size()));
    put16(central, 0);  // extra
    put16(central, 0);  // comment
    put16(central, 0);  // disk
    put16(central, 0);  // internal attrs
    put32(central, 0);  // external attrs
    put32(central, offset);
    central += name;
  }
  std::uint32_t cd_offset = static_cast<std::uint32_t>(out.size());
  out += central;
  put32(out, 0x06054b50);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<std::uint16_t>(tables.size()));
  put16(out, static_cast<std::uint16_t>(tables.size()));
  put32(out, static_cast<std::uint32_t>(central.size()));
  put32(out, cd_offset);
  put16(out, 0);  // comment length

  std::ofstream f(zip_path, std::ios::binary);
  f << out;
}

}  // namespace mobsim::test
