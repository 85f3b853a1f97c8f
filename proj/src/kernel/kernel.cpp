#include "mobsim/kernel/kernel.hpp"

#include <algorithm>

#include <json.hpp>

#include "mobsim/core/csv.hpp"

namespace mobsim::kernel {

namespace {

constexpr Sec kDay = 24 * 3600;

GeoPoint position_on_trip(const gtfs::TransitFeed& feed, const gtfs::Trip& trip, Sec time,
                          Sec delay) {
  const auto& st = trip.stop_times;
  auto stop_pos = [&](size_t i) { return feed.stops.at(st[i].stop_id).position; };
  for (size_t i = 0; i < st.size(); ++i) {
    if (time <= st[i].departure + delay) {
      if (time >= st[i].arrival + delay) return stop_pos(i);
      // Between the previous stop's departure and this arrival.
      Sec t0 = st[i - 1].departure + delay;
      Sec t1 = st[i].arrival + delay;
      double f = t1 > t0 ? static_cast<double>(time - t0) / static_cast<double>(t1 - t0) : 1.0;
      return lerp(stop_pos(i - 1), stop_pos(i), f);
    }
  }
  return stop_pos(st.size() - 1);
}

}  // namespace

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::waited_for_vehicle:
      return "WAITED_FOR_VEHICLE";
    case EventKind::transit_duration:
      return "TRANSIT_DURATION";
    case EventKind::arrived:
      return "ARRIVED";
  }
  return "";
}

std::string PerceptionEvent::payload_json() const {
  nlohmann::json j;
  switch (kind) {
    case EventKind::waited_for_vehicle:
      j["wait_seconds"] = wait_seconds;
      break;
    case EventKind::transit_duration:
      j["ride_seconds"] = ride_seconds;
      j["route"] = route_short_name;
      break;
    case EventKind::arrived:
      j["arrival_time"] = arrival_time;
      j["activity_id"] = activity_id;
      j["stranded"] = stranded;
      break;
  }
  return j.dump();
}

GeoPoint vehicle_position(const gtfs::TransitFeed& feed, const std::string& trip_id, Sec time) {
  auto it = feed.trips.find(trip_id);
  if (it == feed.trips.end())
    throw KernelError(KernelError::Code::out_of_trip_span, "unknown trip: " + trip_id);
  const gtfs::Trip& trip = it->second;
  if (time < trip.first_departure() || time > trip.last_arrival())
    throw KernelError(KernelError::Code::out_of_trip_span,
                      "time outside trip span of " + trip_id);
  return position_on_trip(feed, trip, time, 0);
}

World::World(const gtfs::TransitFeed& feed, Date date, WorldConfig cfg)
    : feed_(&feed), cfg_(cfg) {
  if (cfg_.dt <= 0 || kDay % cfg_.dt != 0)
    throw KernelError(KernelError::Code::bad_state, "dt must divide 24 hours");
  if (cfg_.walk_speed_mps <= 0)
    throw KernelError(KernelError::Code::bad_state, "walk speed must be positive");
  clock_.date = date;
  clock_.dt = cfg_.dt;
  vehicles_date_ = date;
  spawn_vehicles();
}

void World::spawn_vehicles() {
  vehicles_.clear();
  vehicle_times_.clear();
  vehicle_index_.clear();
  std::set<std::string> active = gtfs::active_services(*feed_, clock_.date);
  for (const auto& [id, trip] : feed_->trips) {
    if (!active.count(trip.service_id)) continue;
    VehicleAgent v;
    v.trip_id = id;
    v.route_id = trip.route_id;
    v.mode = feed_->routes.at(trip.route_id).mode;
    v.position = feed_->stops.at(trip.stop_times.front().stop_id).position;
    VehicleTimes vt;
    vt.trip = &trip;
    vt.delay = cfg_.vehicle_delay;
    auto extra = cfg_.route_delay.find(trip.route_id);
    if (extra != cfg_.route_delay.end()) vt.delay += extra->second;
    vt.first_dep = trip.first_departure() + vt.delay;
    vt.last_arr = trip.last_arrival() + vt.delay;
    vehicle_index_[id] = vehicles_.size();
    vehicles_.push_back(std::move(v));
    vehicle_times_.push_back(vt);
  }
}

Sec World::eff_arrival(const VehicleTimes& vt, size_t stop) const {
  return vt.trip->stop_times[stop].arrival + vt.delay;
}

Sec World::eff_departure(const VehicleTimes& vt, size_t stop) const {
  return vt.trip->stop_times[stop].departure + vt.delay;
}

Sec World::window_end(const VehicleTimes& vt, size_t stop) const {
  return std::max(eff_departure(vt, stop), eff_arrival(vt, stop) + cfg_.dt);
}

void World::update_vehicle(size_t vi, Sec now) {
  VehicleAgent& v = vehicles_[vi];
  const VehicleTimes& vt = vehicle_times_[vi];
  size_t n = vt.trip->stop_times.size();
  while (v.next_stop_index < n && window_end(vt, v.next_stop_index) <= now) ++v.next_stop_index;

  if (now < vt.first_dep)
    v.state = VehicleState::pending;
  else if (now > vt.last_arr)
    v.state = VehicleState::finished;
  else
    v.state = VehicleState::running;

  if (v.next_stop_index >= n) {
    v.position = feed_->stops.at(vt.trip->stop_times.back().stop_id).position;
  } else if (now >= eff_arrival(vt, v.next_stop_index) || v.next_stop_index == 0) {
    v.position = feed_->stops.at(vt.trip->stop_times[v.next_stop_index].stop_id).position;
  } else {
    v.position = position_on_trip(*feed_, *vt.trip, now, vt.delay);
  }
}

std::optional<size_t> World::dwell_stop(size_t vi, Sec now) const {
  const VehicleAgent& v = vehicles_[vi];
  const VehicleTimes& vt = vehicle_times_[vi];
  if (v.next_stop_index >= vt.trip->stop_times.size()) return std::nullopt;
  if (now >= eff_arrival(vt, v.next_stop_index)) return v.next_stop_index;
  return std::nullopt;
}

void World::add_agent(const std::string& id, GeoPoint position) {
  if (agent_index_.count(id))
    throw KernelError(KernelError::Code::bad_state, "duplicate agent: " + id);
  InhabitantAgent a;
  a.id = id;
  a.position = position;
  agent_index_[id] = agents_.size();
  agents_.push_back(std::move(a));
}

void World::assign_actions(const std::string& agent_id, std::vector<planner::Leg> legs,
                           const std::string& activity_id) {
  auto it = agent_index_.find(agent_id);
  if (it == agent_index_.end())
    throw KernelError(KernelError::Code::unknown_agent, "unknown agent: " + agent_id);
  InhabitantAgent& a = agents_[it->second];
  if (a.has_actions)
    throw KernelError(KernelError::Code::agent_busy, "agent mid-journey: " + agent_id);
  a.actions = std::move(legs);
  a.has_actions = true;
  a.action_index = 0;
  a.activity_id = activity_id;
  a.segment_started = clock_.time_of_day;
  JourneySummary js;
  js.agent_id = agent_id;
  js.activity_id = activity_id;
  js.date = clock_.date;
  js.assigned_at = clock_.time_of_day;
  journeys_.push_back(std::move(js));
}

void World::finish_agent(InhabitantAgent& a, Sec now, bool stranded,
                         std::vector<PerceptionEvent>& out) {
  PerceptionEvent ev;
  ev.agent_id = a.id;
  ev.kind = EventKind::arrived;
  ev.date = clock_.date;
  ev.sim_time = now;
  ev.arrival_time = now;
  ev.activity_id = a.activity_id;
  ev.stranded = stranded;
  out.push_back(ev);
  for (auto it = journeys_.rbegin(); it != journeys_.rend(); ++it) {
    if (it->agent_id == a.id && it->arrival_time == 0 && !it->stranded) {
      it->arrival_time = now;
      it->stranded = stranded;
      break;
    }
  }
  a.actions.clear();
  a.has_actions = false;
  a.action_index = 0;
  a.phase = Phase::idle;
  a.boarded_vehicle.clear();
  a.activity_id.clear();
}

void World::run_agent(InhabitantAgent& a, Sec now, std::vector<PerceptionEvent>& out) {
  if (!a.has_actions) return;

  // A tick may complete several legs (zero-length walks, chained rides whose
  // times already passed); bound the cascade defensively.
  for (size_t guard = a.actions.size() * 2 + 4; guard > 0; --guard) {
    if (a.action_index >= a.actions.size()) {
      finish_agent(a, now, false, out);
      return;
    }
    const planner::Leg& leg = a.actions[a.action_index];

    if (leg.kind == planner::Leg::Kind::transfer) {
      // A walk dated in the future means the plan wants the agent to linger
      // here first (leave home just in time); hold until then, then set off
      // exactly on schedule so the walk ends when the plan says.
      if (a.segment_started < leg.start) {
        if (now < leg.start) {
          a.phase = Phase::waiting;
          a.position = leg.from_pos;
          return;
        }
        a.segment_started = leg.start;
      }
      Sec wsec = planner::walk_seconds(leg.walk_meters, cfg_.walk_speed_mps);
      Sec done = a.segment_started + wsec;
      if (now >= done) {
        a.position = leg.to_pos;
        ++a.action_index;
        a.segment_started = done;
        a.phase = Phase::walking;
        continue;
      }
      a.phase = Phase::walking;
      double f = static_cast<double>(now - a.segment_started) / static_cast<double>(wsec);
      a.position = lerp(leg.from_pos, leg.to_pos, f);
      return;
    }

    if (a.phase != Phase::riding) {
      // Waiting at the boarding stop for a vehicle of this leg's route that
      // is dwelling here and still has the alighting stop ahead.
      a.phase = Phase::waiting;
      a.position = leg.from_pos;
      std::string leg_route;
      if (auto it = feed_->trips.find(leg.trip_id); it != feed_->trips.end())
        leg_route = it->second.route_id;

      int best = -1;
      Sec best_arr = 0;
      for (size_t vi = 0; vi < vehicles_.size(); ++vi) {
        if (vehicles_[vi].route_id != leg_route) continue;
        auto ds = dwell_stop(vi, now);
        if (!ds) continue;
        const auto& st = vehicle_times_[vi].trip->stop_times;
        if (st[*ds].stop_id != leg.from_stop) continue;
        Sec arr = -1;
        for (size_t j = *ds + 1; j < st.size(); ++j) {
          if (st[j].stop_id == leg.to_stop) {
            arr = eff_arrival(vehicle_times_[vi], j);
            break;
          }
        }
        if (arr < 0) continue;
        // Prefer the planned trip, then the earliest alighting, then id.
        if (vehicles_[vi].trip_id == leg.trip_id) {
          best = static_cast<int>(vi);
          break;
        }
        if (best < 0 || arr < best_arr ||
            (arr == best_arr && vehicles_[vi].trip_id < vehicles_[best].trip_id)) {
          best = static_cast<int>(vi);
          best_arr = arr;
        }
      }

      if (best >= 0) {
        PerceptionEvent ev;
        ev.agent_id = a.id;
        ev.kind = EventKind::waited_for_vehicle;
        ev.date = clock_.date;
        ev.sim_time = now;
        ev.wait_seconds = now - a.segment_started;
        out.push_back(ev);
        VehicleAgent& v = vehicles_[static_cast<size_t>(best)];
        v.onboard.insert(a.id);
        a.boarded_vehicle = v.trip_id;
        a.phase = Phase::riding;
        a.segment_started = now;
        // Fall through to the riding check: the alighting stop may already
        // be this dwell (degenerate single-hop timing), handled next tick.
        return;
      }
      if (now - a.segment_started >= cfg_.stranding_timeout) {
        finish_agent(a, now, true, out);
        return;
      }
      return;
    }

    // Riding: alight when the vehicle dwells at the leg's stop.
    size_t vi = vehicle_index_.at(a.boarded_vehicle);
    VehicleAgent& v = vehicles_[vi];
    const VehicleTimes& vt = vehicle_times_[vi];
    auto ds = dwell_stop(vi, now);
    if (ds && vt.trip->stop_times[*ds].stop_id == leg.to_stop) {
      Sec scheduled = eff_arrival(vt, *ds);
      PerceptionEvent ev;
      ev.agent_id = a.id;
      ev.kind = EventKind::transit_duration;
      ev.date = clock_.date;
      ev.sim_time = now;
      ev.ride_seconds = now - a.segment_started;
      ev.route_short_name = leg.route_short_name;
      out.push_back(ev);
      v.onboard.erase(a.id);
      a.boarded_vehicle.clear();
      a.position = feed_->stops.at(leg.to_stop).position;
      ++a.action_index;
      // Later legs are timed from the scheduled arrival, not the tick that
      // observed it, so realized times track the timetable.
      a.segment_started = scheduled;
      a.phase = Phase::walking;
      continue;
    }
    if (v.state == VehicleState::finished) {
      // The trip ended without serving the alighting stop.
      v.onboard.erase(a.id);
      a.boarded_vehicle.clear();
      a.position = v.position;
      finish_agent(a, now, true, out);
      return;
    }
    a.position = v.position;
    return;
  }
  throw KernelError(KernelError::Code::bad_state, "agent cascade did not settle: " + a.id);
}

std::vector<PerceptionEvent> World::step() {
  if (vehicles_date_ != clock_.date) {
    vehicles_date_ = clock_.date;
    spawn_vehicles();
  }
  Sec now = clock_.time_of_day + cfg_.dt;
  for (size_t vi = 0; vi < vehicles_.size(); ++vi) update_vehicle(vi, now);
  std::vector<PerceptionEvent> out;
  for (InhabitantAgent& a : agents_) run_agent(a, now, out);
  clock_.advance();
  return out;
}

const InhabitantAgent* World::agent(const std::string& id) const {
  auto it = agent_index_.find(id);
  return it == agent_index_.end() ? nullptr : &agents_[it->second];
}

const VehicleAgent* World::vehicle(const std::string& trip_id) const {
  auto it = vehicle_index_.find(trip_id);
  return it == vehicle_index_.end() ? nullptr : &vehicles_[it->second];
}

bool World::any_idle() const {
  for (const InhabitantAgent& a : agents_)
    if (!a.has_actions) return true;
  return false;
}

std::vector<JourneySummary> World::drain_journeys() {
  std::vector<JourneySummary> out = std::move(journeys_);
  journeys_.clear();
  return out;
}

DayLog run_day(World& world, ActionProvider& provider) {
  if (world.clock().time_of_day != 0)
    throw KernelError(KernelError::Code::bad_state, "run_day requires a clock at midnight");
  DayLog log;
  long long ticks = kDay / world.config().dt;
  for (long long i = 0; i < ticks; ++i) {
    if (i == 0 || world.any_idle()) provider.sync(world);
    std::vector<PerceptionEvent> ev = world.step();
    if (!ev.empty()) provider.deliver(ev);
    log.events.insert(log.events.end(), ev.begin(), ev.end());
  }
  log.journeys = world.drain_journeys();
  return log;
}

void write_events_csv(std::ostream& out, const std::vector<PerceptionEvent>& events) {
  out << "agent_id,kind,sim_time,payload\n";
  for (const PerceptionEvent& ev : events) {
    out << csv::quote(ev.agent_id) << ',' << event_kind_name(ev.kind) << ','
        << format_iso_datetime(ev.date, ev.sim_time) << ',' << csv::quote(ev.payload_json())
        << '\n';
  }
}

}  // namespace mobsim::kernel
