#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include "mobsim/bridge/bridge.hpp"
#include "support/fixtures.hpp"

using namespace mobsim;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string golden_path(const std::string& name) {
  return std::string(MOBSIM_TESTS_DIR) + "/golden/" + name;
}

// Two stops on a straight line, a short walk from home (0,0) and work
// (0,0.0505). Route 1 leaves on the hour and half past and takes ten
// minutes; route 2 leaves at quarter past and quarter to and takes fourteen.
// Both run in both directions all day, every day of March 2025.
std::map<std::string, std::string> bridge_feed_tables() {
  std::map<std::string, std::string> t;
  t["stops.txt"] =
      "stop_id,stop_name,stop_lat,stop_lon\n"
      "HS,Quai Maison,0,0.0005\n"
      "WS,Quai Bureau,0,0.05\n";
  t["routes.txt"] =
      "route_id,route_short_name,route_type\n"
      "R1,1,3\n"
      "R2,2,3\n";
  t["calendar.txt"] =
      "service_id,monday,tuesday,wednesday,thursday,friday,saturday,sunday,start_date,end_date\n"
      "ALL,1,1,1,1,1,1,1,20250301,20250331\n";
  std::string trips = "route_id,service_id,trip_id\n";
  std::string times = "trip_id,arrival_time,departure_time,stop_id,stop_sequence\n";
  auto add = [&](const std::string& route, const std::string& trip, const std::string& from,
                 const std::string& to, Sec dep, Sec ride) {
    trips += route + ",ALL," + trip + "\n";
    times += trip + "," + format_hms(dep) + "," + format_hms(dep) + "," + from + ",1\n";
    times += trip + "," + format_hms(dep + ride) + "," + format_hms(dep + ride) + "," + to + ",2\n";
  };
  for (int h = 6; h <= 21; ++h) {
    Sec base = h * 3600;
    std::string tag = std::to_string(h);
    add("R1", "T1_out_" + tag, "HS", "WS", base, 600);
    add("R1", "T1_out30_" + tag, "HS", "WS", base + 1800, 600);
    add("R1", "T1_back_" + tag, "WS", "HS", base + 300, 600);
    add("R1", "T1_back35_" + tag, "WS", "HS", base + 2100, 600);
    add("R2", "T2_out_" + tag, "HS", "WS", base + 900, 840);
    add("R2", "T2_out45_" + tag, "HS", "WS", base + 2700, 840);
    add("R2", "T2_back_" + tag, "WS", "HS", base + 1200, 840);
    add("R2", "T2_back50_" + tag, "WS", "HS", base + 3000, 840);
  }
  t["trips.txt"] = trips;
  t["stop_times.txt"] = times;
  return t;
}

agent::Persona commuter() {
  agent::Persona p;
  p.id = "agent-001";
  p.age = 28;
  p.job = "Architect";
  p.description = "Prefers trains and buses for commuting, values reliability and time efficiency.";
  p.traits = {"High openness"};
  agent::Activity work;
  work.planned_time = 7 * 3600 + 30 * 60;
  work.purpose = agent::Purpose::work;
  work.location = {0.0, 0.0505};
  work.expected_arrival = 8 * 3600;
  agent::Activity home;
  home.planned_time = 17 * 3600 + 50 * 60;
  home.purpose = agent::Purpose::home;
  home.location = {0.0, 0.0};
  home.expected_arrival = 18 * 3600 + 20 * 60;
  p.activities = {work, home};
  return p;
}

bridge::ServerConfig server_config(const Date& start) {
  bridge::ServerConfig cfg;
  cfg.start_date = start;
  cfg.reflection_cadence = 1;
  return cfg;
}

bridge::SyncRequest golden_request() {
  bridge::SyncRequest req;
  req.tick = 42;
  req.date = Date::from_iso("2024-03-12");
  req.sim_time = 27000;
  req.idle_agents.push_back({"agent-001", {43.6, 1.44}, 0});
  req.idle_agents.push_back({"agent-002", {43.61, 1.45}, 2});
  return req;
}

kernel::PerceptionEvent make_event(kernel::EventKind kind, const Date& date, Sec sim_time) {
  kernel::PerceptionEvent ev;
  ev.agent_id = "agent-001";
  ev.kind = kind;
  ev.date = date;
  ev.sim_time = sim_time;
  return ev;
}

int make_silent_listener(int& port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(fd >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  REQUIRE(::listen(fd, 4) == 0);
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
  port = ntohs(bound.sin_port);
  return fd;
}

struct DayOutputs {
  std::string events_csv;
  std::string artifacts_json;
};

// One simulated day driven end to end through the given link.
DayOutputs run_one_day(const gtfs::TransitFeed& feed, bridge::AgentLink& link, const Date& date) {
  kernel::WorldConfig wc;
  wc.dt = 30;
  kernel::World world(feed, date, wc);
  world.add_agent("agent-001", {0.0, 0.0});
  bridge::KernelBridge provider(link);
  kernel::DayLog log = kernel::run_day(world, provider);
  link.end_day(date);
  std::ostringstream events;
  kernel::write_events_csv(events, log.events);
  return {events.str(), link.fetch_artifacts()};
}

}  // namespace

TEST_CASE("wire messages survive the codec unchanged") {
  bridge::SyncRequest req = golden_request();
  bridge::SyncRequest back = bridge::decode_sync_request(bridge::encode_sync_request(req));
  CHECK(back == req);

  bridge::ActionBatch batch;
  batch.tick = 7;
  planner::Leg walk;
  walk.kind = planner::Leg::Kind::transfer;
  walk.from_name = "home";
  walk.to_stop = "HS";
  walk.to_name = "Quai Maison";
  walk.from_pos = {0.0, 0.0};
  walk.to_pos = {0.0, 0.0005};
  walk.start = 27000;
  walk.end = 27040;
  walk.walk_meters = 55.66;
  planner::Leg ride;
  ride.kind = planner::Leg::Kind::transit;
  ride.from_stop = "HS";
  ride.to_stop = "WS";
  ride.from_name = "Quai Maison";
  ride.to_name = "Quai Bureau";
  ride.from_pos = {0.0, 0.0005};
  ride.to_pos = {0.0, 0.05};
  ride.start = 27900;
  ride.end = 28740;
  ride.route_short_name = "2";
  ride.mode = gtfs::Mode::bus;
  ride.trip_id = "T2_out_7";
  batch.assignments.push_back({"agent-001", {walk, ride}});
  std::string bytes = bridge::encode_action_batch(batch);
  bridge::ActionBatch decoded = bridge::decode_action_batch(bytes);
  CHECK(bridge::encode_action_batch(decoded) == bytes);
  REQUIRE(decoded.assignments.size() == 1);
  REQUIRE(decoded.assignments[0].legs.size() == 2);
  CHECK(decoded.assignments[0].legs[0].kind == planner::Leg::Kind::transfer);
  CHECK(decoded.assignments[0].legs[1].trip_id == "T2_out_7");
  CHECK(decoded.assignments[0].legs[1].mode == gtfs::Mode::bus);
  CHECK(decoded.assignments[0].legs[0].walk_meters == doctest::Approx(55.66));

  bridge::PerceptionMessage msg;
  msg.seq = 3;
  msg.event = make_event(kernel::EventKind::transit_duration, Date::from_iso("2025-03-03"), 28740);
  msg.event.ride_seconds = 840;
  msg.event.route_short_name = "2";
  bridge::PerceptionMessage msg2 = bridge::decode_perception(bridge::encode_perception(msg));
  CHECK(msg2.seq == 3);
  CHECK(msg2.event == msg.event);

  bridge::Frame frame{"perception", bridge::encode_perception(msg)};
  bridge::Frame frame2 = bridge::decode_frame(bridge::encode_frame(frame));
  CHECK(frame2.type == "perception");
  CHECK(bridge::decode_perception(frame2.payload).event == msg.event);
}

TEST_CASE("a fixture sync request encodes to pinned bytes") {
  CHECK(bridge::encode_sync_request(golden_request()) == read_file(golden_path("sync_request.json")));
}

TEST_CASE("malformed messages name the broken field") {
  auto field_of = [](auto fn) {
    try {
      fn();
    } catch (const bridge::SchemaViolation& v) {
      return v.field;
    }
    return std::string("no violation");
  };

  CHECK(field_of([] { bridge::decode_sync_request("not json"); }) == "sync_request");
  CHECK(field_of([] { bridge::decode_sync_request(R"({"date":"2024-03-12","idle_agents":[],"sim_time":0})"); }) == "tick");
  CHECK(field_of([] { bridge::decode_sync_request(R"({"date":"2024-13-40","idle_agents":[],"sim_time":0,"tick":1})"); }) == "date");
  CHECK(field_of([] { bridge::decode_sync_request(R"({"date":"2024-03-12","idle_agents":[{"position":{"lat":0,"lon":0},"current_activity_index":0}],"sim_time":0,"tick":1})"); }) == "agent_id");
  CHECK(field_of([] { bridge::decode_action_batch(R"({"tick":3,"assignments":[{"legs":[]}]})"); }) == "agent_id");
  CHECK(field_of([] {
          bridge::decode_action_batch(
              R"({"tick":3,"assignments":[{"agent_id":"a","legs":[]},{"agent_id":"a","legs":[]}]})");
        }) == "agent_id");
  CHECK(field_of([] { bridge::decode_perception(R"({"seq":0,"event":{}})"); }) == "seq");
  CHECK(field_of([] { bridge::decode_frame(R"({"payload":{}})"); }) == "type");
  CHECK(field_of([] { bridge::encode_frame(bridge::Frame{"ack", "not json"}); }) == "payload");

  std::string leg_batch =
      R"({"tick":1,"assignments":[{"agent_id":"a","legs":[{"kind":"sail","from_stop":"","to_stop":"","from_name":"","to_name":"","from_pos":{"lat":0,"lon":0},"to_pos":{"lat":0,"lon":0},"start":0,"end":0,"route_short_name":"","mode":"bus","trip_id":"","walk_meters":0}]}]})";
  CHECK(field_of([leg_batch] { bridge::decode_action_batch(leg_batch); }) == "kind");

  std::string duplicate_idle =
      R"({"date":"2024-03-12","idle_agents":[{"agent_id":"a","position":{"lat":0,"lon":0},"current_activity_index":0},{"agent_id":"a","position":{"lat":0,"lon":0},"current_activity_index":0}],"sim_time":0,"tick":1})";
  try {
    bridge::decode_sync_request(duplicate_idle);
    CHECK(false);
  } catch (const bridge::SchemaViolation& v) {
    CHECK(v.reason.find("duplicate") != std::string::npos);
  }
}

TEST_CASE("the inbox reorders, deduplicates, and asks for replays") {
  bridge::PerceptionInbox inbox;
  std::vector<Sec> seen;
  inbox.set_handler([&](const kernel::PerceptionEvent& ev) { seen.push_back(ev.sim_time); });
  std::vector<std::pair<std::string, long long>> replays;
  inbox.set_replay_hook([&](const std::string& id, long long from) { replays.push_back({id, from}); });

  Date d = Date::from_iso("2025-03-03");
  auto msg = [&](long long seq, Sec t) {
    bridge::PerceptionMessage m;
    m.seq = seq;
    m.event = make_event(kernel::EventKind::waited_for_vehicle, d, t);
    return m;
  };

  inbox.accept(msg(2, 200));  // early: parked, replay requested from seq 1
  CHECK(seen.empty());
  CHECK(inbox.pending() == 1);
  REQUIRE(replays.size() == 1);
  CHECK(replays[0].first == "agent-001");
  CHECK(replays[0].second == 1);

  inbox.accept(msg(1, 100));  // fills the gap; both drain in order
  CHECK(seen == std::vector<Sec>{100, 200});
  CHECK(inbox.pending() == 0);
  CHECK(inbox.applied("agent-001") == 2);

  inbox.accept(msg(1, 100));  // duplicate of an applied event: dropped
  inbox.accept(msg(2, 200));
  CHECK(seen.size() == 2);

  inbox.accept(msg(4, 400));  // parked again
  inbox.accept(msg(4, 400));  // duplicate of a parked event: no second replay
  CHECK(replays.size() == 2);
  inbox.accept(msg(3, 300));
  CHECK(seen == std::vector<Sec>{100, 200, 300, 400});
  CHECK(inbox.applied("agent-001") == 4);
}

TEST_CASE("the server assigns only at departure time and insists on closure") {
  auto feed = gtfs::load_feed_from_tables(bridge_feed_tables());
  Date d = Date::from_iso("2025-03-03");
  agent::HabitLlm llm;
  memory::HashNgramEmbedder embedder;
  bridge::AgentServer server(feed, {commuter()}, llm, embedder, server_config(d));

  bridge::SyncRequest req;
  req.tick = 0;
  req.date = d;
  req.sim_time = 0;
  req.idle_agents.push_back({"agent-001", {0.0, 0.0}, 0});

  // Midnight: the agent is idle but its first departure is hours away.
  CHECK(server.handle_sync(req).assignments.empty());
  CHECK(server.travel_records().empty());

  // 07:30: the work trip triggers and the legs match a planner option.
  req.tick = 900;
  req.sim_time = 27000;
  bridge::ActionBatch batch = server.handle_sync(req);
  REQUIRE(batch.assignments.size() == 1);
  CHECK(batch.assignments[0].agent_id == "agent-001");
  REQUIRE(!batch.assignments[0].legs.empty());
  planner::Itinerary assigned;
  assigned.legs = batch.assignments[0].legs;
  assigned.depart = assigned.legs.front().start;
  assigned.arrive = assigned.legs.back().end;
  for (const planner::Leg& leg : assigned.legs) {
    if (leg.kind != planner::Leg::Kind::transfer) continue;
    assigned.total_walk_seconds += leg.end - leg.start;
    assigned.total_walk_meters += leg.walk_meters;
  }
  CHECK(planner::validate_itinerary(feed, assigned, d).empty());
  REQUIRE(server.travel_records().size() == 1);
  const agent::TravelRecord& rec = server.travel_records()[0];
  CHECK(rec.route_signature == std::vector<std::string>{"2"});  // 07:45 bus lands first
  CHECK(rec.planned_arrival == 8 * 3600);
  CHECK(!rec.realized_arrival.has_value());
  REQUIRE(server.decisions().size() == 1);
  CHECK(server.decisions()[0].options_offered == 2);

  // Claiming the agent is idle again before its arrival arrived is a bug.
  req.tick = 901;
  req.sim_time = 27030;
  CHECK_THROWS_AS(server.handle_sync(req), bridge::BridgeError);

  // Perceptions: ride report overtakes the wait, inbox restores the order.
  const std::vector<planner::Leg>& legs = batch.assignments[0].legs;
  Sec board = legs[1].start, alight = legs[1].end, arrive = legs[2].end;
  kernel::PerceptionEvent waited = make_event(kernel::EventKind::waited_for_vehicle, d, board);
  waited.wait_seconds = board - legs[0].end;
  kernel::PerceptionEvent rode = make_event(kernel::EventKind::transit_duration, d, alight);
  rode.ride_seconds = alight - board;
  rode.route_short_name = "2";
  kernel::PerceptionEvent arrived = make_event(kernel::EventKind::arrived, d, arrive);
  arrived.arrival_time = arrive;

  server.handle_perception({2, rode});
  server.handle_perception({1, waited});
  server.handle_perception({1, waited});  // duplicate: dropped
  server.handle_perception({3, arrived});

  REQUIRE(server.travel_records()[0].realized_arrival.has_value());
  CHECK(*server.travel_records()[0].realized_arrival == arrive);
  CHECK(!server.travel_records()[0].stranded);
  std::vector<memory::ShortTermEvent> stream = server.stream().all("agent-001");
  REQUIRE(stream.size() == 3);  // wait, ride, arrival; an on-plan trip derives nothing
  CHECK(stream[0].text.find("waited") != std::string::npos);
  CHECK(stream[1].text.find("rode route 2") != std::string::npos);
  CHECK(stream[2].text.find("work") != std::string::npos);

  // Arrived and idle again: nothing due until the evening.
  req.tick = 1000;
  req.sim_time = 30000;
  req.idle_agents[0].position = {0.0, 0.0505};
  req.idle_agents[0].current_activity_index = 1;
  CHECK(server.handle_sync(req).assignments.empty());

  // 17:50: the trip home.
  req.tick = 2000;
  req.sim_time = 64200;
  bridge::ActionBatch evening = server.handle_sync(req);
  REQUIRE(evening.assignments.size() == 1);
  CHECK(server.travel_records().size() == 2);
  CHECK(server.travel_records()[1].purpose == agent::Purpose::home);

  kernel::PerceptionEvent home_arrived =
      make_event(kernel::EventKind::arrived, d, evening.assignments[0].legs.back().end);
  home_arrived.arrival_time = evening.assignments[0].legs.back().end;
  server.handle_perception({4, home_arrived});

  // Day boundary: the reflection turns the stream into stored memories.
  CHECK(server.memory().size() == 0);
  server.end_day(d);
  CHECK(server.memory().size() > 0);
  CHECK(server.stream().all("agent-001").empty());

  // Artifacts carry exactly what the direct writers produce.
  nlohmann::json arts = nlohmann::json::parse(server.artifacts_json());
  std::ostringstream travel;
  agent::write_travel_records_csv(travel, server.travel_records());
  CHECK(arts.at("travel_records_csv").get<std::string>() == travel.str());
  std::ostringstream decisions;
  agent::write_decisions_csv(decisions, server.decisions());
  CHECK(arts.at("decisions_csv").get<std::string>() == decisions.str());
  CHECK(arts.at("memory_jsonl").get<std::string>().find("agent-001") != std::string::npos);
}

TEST_CASE("an unreachable stop strands the trip but not the day") {
  auto feed = gtfs::load_feed_from_tables(bridge_feed_tables());
  Date d = Date::from_iso("2025-03-03");
  agent::Persona p = commuter();
  agent::Activity island;
  island.planned_time = 7 * 3600;
  island.purpose = agent::Purpose::leisure;
  island.location = {0.5, 0.5};  // tens of kilometers from any stop
  island.expected_arrival = 7 * 3600 + 30 * 60;
  p.activities.insert(p.activities.begin(), island);

  agent::HabitLlm llm;
  memory::HashNgramEmbedder embedder;
  bridge::AgentServer server(feed, {p}, llm, embedder, server_config(d));

  bridge::SyncRequest req;
  req.tick = 900;
  req.date = d;
  req.sim_time = 27000;  // both the island trip and the work trip are due
  req.idle_agents.push_back({"agent-001", {0.0, 0.0}, 0});
  bridge::ActionBatch batch = server.handle_sync(req);

  REQUIRE(batch.assignments.size() == 1);  // the reachable work trip
  REQUIRE(server.travel_records().size() == 2);
  CHECK(server.travel_records()[0].purpose == agent::Purpose::leisure);
  CHECK(server.travel_records()[0].stranded);
  CHECK(server.travel_records()[0].options_offered == 0);
  CHECK(!server.travel_records()[0].realized_arrival.has_value());
  CHECK(server.travel_records()[1].purpose == agent::Purpose::work);
}

TEST_CASE("a full kernel day runs through the in-process link") {
  auto feed = gtfs::load_feed_from_tables(bridge_feed_tables());
  Date d = Date::from_iso("2025-03-03");
  agent::HabitLlm llm;
  memory::HashNgramEmbedder embedder;
  bridge::AgentServer server(feed, {commuter()}, llm, embedder, server_config(d));
  bridge::InProcessLink link(server);

  kernel::WorldConfig wc;
  wc.dt = 30;
  kernel::World world(feed, d, wc);
  world.add_agent("agent-001", {0.0, 0.0});
  bridge::KernelBridge provider(link);
  kernel::DayLog log = kernel::run_day(world, provider);

  REQUIRE(log.journeys.size() == 2);
  REQUIRE(server.travel_records().size() == 2);
  for (size_t i = 0; i < 2; ++i) {
    const agent::TravelRecord& rec = server.travel_records()[i];
    REQUIRE(rec.realized_arrival.has_value());
    CHECK(!rec.stranded);
    CHECK(*rec.realized_arrival == log.journeys[i].arrival_time);
    // The kernel can only be as late as one tick past the promise.
    CHECK(*rec.realized_arrival >= rec.predicted_arrival);
    CHECK(*rec.realized_arrival <= rec.predicted_arrival + wc.dt);
  }
  CHECK(server.decisions().size() == 2);
  CHECK(provider.syncs_sent() > 0);

  // Next day: reflection has run and the schedule regenerates.
  link.end_day(d);
  CHECK(server.memory().size() > 0);
  kernel::DayLog log2 = kernel::run_day(world, provider);
  CHECK(log2.journeys.size() == 2);
  CHECK(server.travel_records().size() == 4);
  CHECK(server.travel_records()[2].date == Date::from_iso("2025-03-04"));
  // On-time arrivals keep the departure pinned at the planned time.
  CHECK(server.travel_records()[2].adjusted_departure == 27000);
}

TEST_CASE("both transports produce identical days") {
  auto tables = bridge_feed_tables();
  Date d = Date::from_iso("2025-03-03");

  auto feed1 = gtfs::load_feed_from_tables(tables);
  agent::HabitLlm llm1;
  memory::HashNgramEmbedder embedder1;
  bridge::AgentServer server1(feed1, {commuter()}, llm1, embedder1, server_config(d));
  bridge::InProcessLink link1(server1);
  DayOutputs local = run_one_day(feed1, link1, d);

  auto feed2 = gtfs::load_feed_from_tables(tables);
  agent::HabitLlm llm2;
  memory::HashNgramEmbedder embedder2;
  bridge::AgentServer server2(feed2, {commuter()}, llm2, embedder2, server_config(d));
  bridge::AgentServerHost host(server2);
  host.start("127.0.0.1", 0, 0);
  {
    bridge::RemoteLink link2("127.0.0.1", host.sync_port(), host.perception_port(), 30.0);
    DayOutputs remote = run_one_day(feed2, link2, d);
    CHECK(local.events_csv == remote.events_csv);
    CHECK(local.artifacts_json == remote.artifacts_json);
    CHECK(!local.events_csv.empty());
  }
  host.stop();
}

TEST_CASE("a stalled sync answer aborts instead of hanging") {
  httplib::Server slow;
  slow.Post("/sync", [](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    res.set_content(R"({"assignments":[],"tick":1})", "application/json");
  });
  int sync_port = slow.bind_to_any_port("127.0.0.1");
  REQUIRE(sync_port > 0);
  std::thread worker([&] { slow.listen_after_bind(); });
  slow.wait_until_ready();

  int perception_port = 0;
  int listener = make_silent_listener(perception_port);

  bridge::RemoteLink link("127.0.0.1", sync_port, perception_port, 0.3);
  bridge::SyncRequest req;
  req.tick = 1;
  req.date = Date::from_iso("2025-03-03");

  auto t0 = std::chrono::steady_clock::now();
  try {
    link.sync_exchange(req);
    CHECK(false);
  } catch (const bridge::BridgeError& e) {
    CHECK(e.code == bridge::BridgeError::Code::timeout);
    CHECK(std::string(e.what()).find("aborting") != std::string::npos);
  }
  double waited = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(waited < 1.2);  // gave up well before the slow handler finished

  slow.stop();
  worker.join();
  ::close(listener);
}

TEST_CASE("unacked perceptions trip the flush barrier") {
  int perception_port = 0;
  int listener = make_silent_listener(perception_port);

  bridge::RemoteLink link("127.0.0.1", 1, perception_port, 0.3);
  bridge::PerceptionMessage msg;
  msg.seq = 1;
  msg.event = make_event(kernel::EventKind::arrived, Date::from_iso("2025-03-03"), 100);
  link.push_perception(msg);
  try {
    link.flush();
    CHECK(false);
  } catch (const bridge::BridgeError& e) {
    CHECK(e.code == bridge::BridgeError::Code::timeout);
  }
  ::close(listener);
}
