#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mobsim/core/geo.hpp"
#include "mobsim/core/time.hpp"
#include "mobsim/gtfs/feed.hpp"
#include "mobsim/planner/planner.hpp"

namespace mobsim::kernel {

struct KernelError : std::runtime_error {
  enum class Code { out_of_trip_span, agent_busy, unknown_agent, bad_state };
  Code code;
  KernelError(Code c, const std::string& what) : std::runtime_error(what), code(c) {}
};

// Discrete clock: advances by dt per tick and rolls the date at midnight.
struct SimClock {
  Date date;
  Sec time_of_day = 0;
  long long tick = 0;
  Sec dt = 10;

  void advance() {
    ++tick;
    time_of_day += dt;
    if (time_of_day >= 24 * 3600) {
      time_of_day -= 24 * 3600;
      date = date.plus_days(1);
    }
  }
};

enum class VehicleState { pending, running, finished };

struct VehicleAgent {
  std::string trip_id;
  std::string route_id;
  gtfs::Mode mode = gtfs::Mode::other;
  GeoPoint position;
  // First stop whose dwell window has not yet closed.
  size_t next_stop_index = 0;
  std::set<std::string> onboard;
  VehicleState state = VehicleState::pending;
};

enum class Phase { idle, walking, waiting, riding };

struct InhabitantAgent {
  std::string id;
  GeoPoint position;
  std::vector<planner::Leg> actions;
  bool has_actions = false;
  size_t action_index = 0;
  Phase phase = Phase::idle;
  std::string boarded_vehicle;  // trip id while riding
  std::string activity_id;      // echoed in the final ARRIVED event

  // Exact start of the current leg segment: when the walk began, the wait
  // began, or the agent boarded. Kept in whole seconds so chained legs line
  // up with scheduled times rather than tick boundaries.
  Sec segment_started = 0;
};

enum class EventKind { waited_for_vehicle, transit_duration, arrived };

const char* event_kind_name(EventKind k);

struct PerceptionEvent {
  std::string agent_id;
  EventKind kind = EventKind::arrived;
  Date date;
  Sec sim_time = 0;

  Sec wait_seconds = 0;          // waited_for_vehicle
  Sec ride_seconds = 0;          // transit_duration
  std::string route_short_name;  // transit_duration
  Sec arrival_time = 0;          // arrived
  std::string activity_id;       // arrived
  bool stranded = false;         // arrived

  std::string payload_json() const;
  bool operator==(const PerceptionEvent&) const = default;
};

// Kernel-side outcome of one assigned action list.
struct JourneySummary {
  std::string agent_id;
  std::string activity_id;
  Date date;
  Sec assigned_at = 0;
  Sec arrival_time = 0;
  bool stranded = false;
};

struct DayLog {
  std::vector<PerceptionEvent> events;
  std::vector<JourneySummary> journeys;
};

struct WorldConfig {
  Sec dt = 10;
  double walk_speed_mps = 1.4;
  Sec stranding_timeout = 2700;  // give up waiting after 45 simulated minutes
  Sec vehicle_delay = 0;         // uniform schedule shift, off by default
  // Extra shift per route id, added on top of vehicle_delay. Lets a scenario
  // make selected lines run behind their published timetable.
  std::map<std::string, Sec> route_delay;
};

// Scheduled position of a trip at `time`: a stop's coordinate while dwelling
// there, linear interpolation in between. Throws out_of_trip_span outside
// [first departure, last arrival].
GeoPoint vehicle_position(const gtfs::TransitFeed& feed, const std::string& trip_id, Sec time);

class World {
 public:
  World(const gtfs::TransitFeed& feed, Date date, WorldConfig cfg = {});

  void add_agent(const std::string& id, GeoPoint position);

  // Hands a leg list to an idle agent; it starts moving on the next step.
  // An empty list completes immediately with an ARRIVED on the next step.
  void assign_actions(const std::string& agent_id, std::vector<planner::Leg> legs,
                      const std::string& activity_id = "");

  // One tick: advances time by dt, moves vehicles, then runs every agent's
  // behavior at the new time. Returns the events this tick produced.
  std::vector<PerceptionEvent> step();

  const SimClock& clock() const { return clock_; }
  const WorldConfig& config() const { return cfg_; }
  const gtfs::TransitFeed& feed() const { return *feed_; }
  const std::vector<InhabitantAgent>& agents() const { return agents_; }
  const std::vector<VehicleAgent>& vehicles() const { return vehicles_; }
  const InhabitantAgent* agent(const std::string& id) const;
  const VehicleAgent* vehicle(const std::string& trip_id) const;
  bool any_idle() const;

  std::vector<JourneySummary> drain_journeys();

 private:
  struct VehicleTimes {
    const gtfs::Trip* trip = nullptr;
    Sec first_dep = 0;
    Sec last_arr = 0;
    Sec delay = 0;
  };

  void spawn_vehicles();
  void update_vehicle(size_t vi, Sec now);
  // Index of the stop the vehicle dwells at, if `now` is inside a window.
  std::optional<size_t> dwell_stop(size_t vi, Sec now) const;
  void run_agent(InhabitantAgent& a, Sec now, std::vector<PerceptionEvent>& out);
  void finish_agent(InhabitantAgent& a, Sec now, bool stranded,
                    std::vector<PerceptionEvent>& out);
  Sec eff_arrival(const VehicleTimes& vt, size_t stop) const;
  Sec eff_departure(const VehicleTimes& vt, size_t stop) const;
  Sec window_end(const VehicleTimes& vt, size_t stop) const;

  const gtfs::TransitFeed* feed_;
  WorldConfig cfg_;
  SimClock clock_;
  Date vehicles_date_;
  std::vector<VehicleAgent> vehicles_;
  std::vector<VehicleTimes> vehicle_times_;
  std::unordered_map<std::string, size_t> vehicle_index_;
  std::vector<InhabitantAgent> agents_;
  std::unordered_map<std::string, size_t> agent_index_;
  std::vector<JourneySummary> journeys_;
};

// Invoked at tick boundaries before the step runs; may assign actions.
// deliver() receives each step's events right after they happen, so a
// provider can feed observations back to whoever plans the actions.
class ActionProvider {
 public:
  virtual ~ActionProvider() = default;
  virtual void sync(World& world) = 0;
  virtual void deliver(const std::vector<PerceptionEvent>& events) { (void)events; }
};

// Runs one full day (00:00 to 24:00) from a clock standing at midnight.
// The provider is consulted on the first tick and then whenever an agent is
// idle. Afterwards the clock stands at the next day's midnight.
DayLog run_day(World& world, ActionProvider& provider);

// One CSV row per event: agent_id, kind, ISO-8601 timestamp, payload JSON.
void write_events_csv(std::ostream& out, const std::vector<PerceptionEvent>& events);

}  // namespace mobsim::kernel
