// Canonical JSON codec for the kernel/agent wire, plus the perception
// resequencer. The encoder emits keys in sorted order with integer seconds,
// so equal messages are equal bytes.

#include <json.hpp>

#include "mobsim/bridge/bridge.hpp"

namespace mobsim::bridge {

namespace {

using nlohmann::json;

json parse_object(const std::string& text, const char* what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw SchemaViolation(what, "not a JSON object");
  return j;
}

const json& require(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) throw SchemaViolation(field, "missing");
  return *it;
}

std::string require_string(const json& j, const char* field) {
  const json& v = require(j, field);
  if (!v.is_string()) throw SchemaViolation(field, "expected a string");
  return v.get<std::string>();
}

long long require_int(const json& j, const char* field) {
  const json& v = require(j, field);
  if (!v.is_number_integer()) throw SchemaViolation(field, "expected an integer");
  return v.get<long long>();
}

double require_number(const json& j, const char* field) {
  const json& v = require(j, field);
  if (!v.is_number()) throw SchemaViolation(field, "expected a number");
  return v.get<double>();
}

bool require_bool(const json& j, const char* field) {
  const json& v = require(j, field);
  if (!v.is_boolean()) throw SchemaViolation(field, "expected a boolean");
  return v.get<bool>();
}

const json& require_array(const json& j, const char* field) {
  const json& v = require(j, field);
  if (!v.is_array()) throw SchemaViolation(field, "expected an array");
  return v;
}

const json& require_object(const json& j, const char* field) {
  const json& v = require(j, field);
  if (!v.is_object()) throw SchemaViolation(field, "expected an object");
  return v;
}

Date require_date(const json& j, const char* field) {
  std::string s = require_string(j, field);
  try {
    return Date::from_iso(s);
  } catch (const std::exception&) {
    throw SchemaViolation(field, "expected an ISO-8601 date, got '" + s + "'");
  }
}

json point_json(const GeoPoint& p) {
  json j;
  j["lat"] = p.lat;
  j["lon"] = p.lon;
  return j;
}

GeoPoint point_from(const json& j) {
  GeoPoint p;
  p.lat = require_number(j, "lat");
  p.lon = require_number(j, "lon");
  return p;
}

gtfs::Mode mode_from_name(const std::string& name) {
  for (gtfs::Mode m : {gtfs::Mode::bus, gtfs::Mode::metro, gtfs::Mode::tram,
                       gtfs::Mode::cablecar, gtfs::Mode::other})
    if (name == gtfs::mode_name(m)) return m;
  throw SchemaViolation("mode", "unknown mode '" + name + "'");
}

json leg_json(const planner::Leg& leg) {
  json j;
  j["kind"] = leg.kind == planner::Leg::Kind::transit ? "transit" : "transfer";
  j["from_stop"] = leg.from_stop;
  j["to_stop"] = leg.to_stop;
  j["from_name"] = leg.from_name;
  j["to_name"] = leg.to_name;
  j["from_pos"] = point_json(leg.from_pos);
  j["to_pos"] = point_json(leg.to_pos);
  j["start"] = leg.start;
  j["end"] = leg.end;
  j["route_short_name"] = leg.route_short_name;
  j["mode"] = gtfs::mode_name(leg.mode);
  j["trip_id"] = leg.trip_id;
  j["walk_meters"] = leg.walk_meters;
  return j;
}

planner::Leg leg_from(const json& j) {
  planner::Leg leg;
  std::string kind = require_string(j, "kind");
  if (kind == "transit")
    leg.kind = planner::Leg::Kind::transit;
  else if (kind == "transfer")
    leg.kind = planner::Leg::Kind::transfer;
  else
    throw SchemaViolation("kind", "unknown leg kind '" + kind + "'");
  leg.from_stop = require_string(j, "from_stop");
  leg.to_stop = require_string(j, "to_stop");
  leg.from_name = require_string(j, "from_name");
  leg.to_name = require_string(j, "to_name");
  leg.from_pos = point_from(require_object(j, "from_pos"));
  leg.to_pos = point_from(require_object(j, "to_pos"));
  leg.start = require_int(j, "start");
  leg.end = require_int(j, "end");
  leg.route_short_name = require_string(j, "route_short_name");
  leg.mode = mode_from_name(require_string(j, "mode"));
  leg.trip_id = require_string(j, "trip_id");
  leg.walk_meters = require_number(j, "walk_meters");
  return leg;
}

kernel::EventKind event_kind_from_name(const std::string& name) {
  for (kernel::EventKind k : {kernel::EventKind::waited_for_vehicle,
                              kernel::EventKind::transit_duration, kernel::EventKind::arrived})
    if (name == kernel::event_kind_name(k)) return k;
  throw SchemaViolation("kind", "unknown event kind '" + name + "'");
}

json event_json(const kernel::PerceptionEvent& ev) {
  json j;
  j["agent_id"] = ev.agent_id;
  j["kind"] = kernel::event_kind_name(ev.kind);
  j["date"] = ev.date.to_iso();
  j["sim_time"] = ev.sim_time;
  j["wait_seconds"] = ev.wait_seconds;
  j["ride_seconds"] = ev.ride_seconds;
  j["route_short_name"] = ev.route_short_name;
  j["arrival_time"] = ev.arrival_time;
  j["activity_id"] = ev.activity_id;
  j["stranded"] = ev.stranded;
  return j;
}

kernel::PerceptionEvent event_from(const json& j) {
  kernel::PerceptionEvent ev;
  ev.agent_id = require_string(j, "agent_id");
  if (ev.agent_id.empty()) throw SchemaViolation("agent_id", "must not be empty");
  ev.kind = event_kind_from_name(require_string(j, "kind"));
  ev.date = require_date(j, "date");
  ev.sim_time = require_int(j, "sim_time");
  ev.wait_seconds = require_int(j, "wait_seconds");
  ev.ride_seconds = require_int(j, "ride_seconds");
  ev.route_short_name = require_string(j, "route_short_name");
  ev.arrival_time = require_int(j, "arrival_time");
  ev.activity_id = require_string(j, "activity_id");
  ev.stranded = require_bool(j, "stranded");
  return ev;
}

}  // namespace

std::string encode_sync_request(const SyncRequest& req) {
  json j;
  j["tick"] = req.tick;
  j["date"] = req.date.to_iso();
  j["sim_time"] = req.sim_time;
  json agents = json::array();
  for (const IdleAgent& a : req.idle_agents) {
    json ja;
    ja["agent_id"] = a.agent_id;
    ja["position"] = point_json(a.position);
    ja["current_activity_index"] = a.current_activity_index;
    agents.push_back(std::move(ja));
  }
  j["idle_agents"] = std::move(agents);
  return j.dump();
}

SyncRequest decode_sync_request(const std::string& text) {
  json j = parse_object(text, "sync_request");
  SyncRequest req;
  req.tick = require_int(j, "tick");
  req.date = require_date(j, "date");
  req.sim_time = require_int(j, "sim_time");
  std::set<std::string> seen;
  for (const json& ja : require_array(j, "idle_agents")) {
    if (!ja.is_object()) throw SchemaViolation("idle_agents", "expected objects");
    IdleAgent a;
    a.agent_id = require_string(ja, "agent_id");
    if (a.agent_id.empty()) throw SchemaViolation("agent_id", "must not be empty");
    if (!seen.insert(a.agent_id).second)
      throw SchemaViolation("agent_id", "duplicate idle agent '" + a.agent_id + "'");
    a.position = point_from(require_object(ja, "position"));
    a.current_activity_index = static_cast<int>(require_int(ja, "current_activity_index"));
    req.idle_agents.push_back(std::move(a));
  }
  return req;
}

std::string encode_action_batch(const ActionBatch& batch) {
  json j;
  j["tick"] = batch.tick;
  json assignments = json::array();
  for (const Assignment& a : batch.assignments) {
    json ja;
    ja["agent_id"] = a.agent_id;
    json legs = json::array();
    for (const planner::Leg& leg : a.legs) legs.push_back(leg_json(leg));
    ja["legs"] = std::move(legs);
    assignments.push_back(std::move(ja));
  }
  j["assignments"] = std::move(assignments);
  return j.dump();
}

ActionBatch decode_action_batch(const std::string& text) {
  json j = parse_object(text, "action_batch");
  ActionBatch batch;
  batch.tick = require_int(j, "tick");
  std::set<std::string> seen;
  for (const json& ja : require_array(j, "assignments")) {
    if (!ja.is_object()) throw SchemaViolation("assignments", "expected objects");
    Assignment a;
    a.agent_id = require_string(ja, "agent_id");
    if (a.agent_id.empty()) throw SchemaViolation("agent_id", "must not be empty");
    if (!seen.insert(a.agent_id).second)
      throw SchemaViolation("agent_id", "duplicate assignment for '" + a.agent_id + "'");
    for (const json& jl : require_array(ja, "legs")) {
      if (!jl.is_object()) throw SchemaViolation("legs", "expected objects");
      a.legs.push_back(leg_from(jl));
    }
    batch.assignments.push_back(std::move(a));
  }
  return batch;
}

std::string encode_perception(const PerceptionMessage& msg) {
  json j;
  j["seq"] = msg.seq;
  j["event"] = event_json(msg.event);
  return j.dump();
}

PerceptionMessage decode_perception(const std::string& text) {
  json j = parse_object(text, "perception");
  PerceptionMessage msg;
  msg.seq = require_int(j, "seq");
  if (msg.seq < 1) throw SchemaViolation("seq", "sequence numbers start at 1");
  msg.event = event_from(require_object(j, "event"));
  return msg;
}

std::string encode_frame(const Frame& frame) {
  json payload = json::parse(frame.payload, nullptr, false);
  if (payload.is_discarded()) throw SchemaViolation("payload", "not valid JSON");
  json j;
  j["type"] = frame.type;
  j["payload"] = std::move(payload);
  return j.dump();
}

Frame decode_frame(const std::string& text) {
  json j = parse_object(text, "frame");
  Frame frame;
  frame.type = require_string(j, "type");
  if (frame.type.empty()) throw SchemaViolation("type", "must not be empty");
  frame.payload = require(j, "payload").dump();
  return frame;
}

void PerceptionInbox::accept(const PerceptionMessage& msg) {
  if (msg.seq < 1) throw SchemaViolation("seq", "sequence numbers start at 1");
  if (msg.event.agent_id.empty()) throw SchemaViolation("agent_id", "must not be empty");
  Lane& lane = lanes_[msg.event.agent_id];
  if (msg.seq < lane.next) return;  // already applied; drop the duplicate
  if (msg.seq > lane.next) {
    bool fresh = lane.held.emplace(msg.seq, msg.event).second;
    if (fresh && replay_) replay_(msg.event.agent_id, lane.next);
    return;
  }
  if (handler_) handler_(msg.event);
  ++lane.next;
  auto it = lane.held.begin();
  while (it != lane.held.end() && it->first == lane.next) {
    if (handler_) handler_(it->second);
    ++lane.next;
    it = lane.held.erase(it);
  }
}

long long PerceptionInbox::applied(const std::string& agent_id) const {
  auto it = lanes_.find(agent_id);
  return it == lanes_.end() ? 0 : it->second.next - 1;
}

size_t PerceptionInbox::pending() const {
  size_t n = 0;
  for (const auto& [id, lane] : lanes_) n += lane.held.size();
  return n;
}

}  // namespace mobsim::bridge
