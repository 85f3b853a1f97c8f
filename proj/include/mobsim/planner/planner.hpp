#pragma once

#include <string>
#include <vector>

#include "mobsim/core/geo.hpp"
#include "mobsim/core/time.hpp"
#include "mobsim/gtfs/feed.hpp"

namespace mobsim::planner {

// One journey segment: walking between places (transfer) or riding a
// scheduled vehicle (transit). Times are seconds since the query date's
// midnight, matching stop_times.
struct Leg {
  enum class Kind { transfer, transit };
  Kind kind = Kind::transfer;

  std::string from_stop;  // stop id; empty for a geographic endpoint
  std::string to_stop;
  std::string from_name;  // display name used in rendered text
  std::string to_name;
  GeoPoint from_pos;
  GeoPoint to_pos;
  Sec start = 0;
  Sec end = 0;

  // transit only
  std::string route_short_name;
  gtfs::Mode mode = gtfs::Mode::other;
  std::string trip_id;

  // transfer only
  double walk_meters = 0.0;
};

struct Itinerary {
  std::vector<Leg> legs;
  Sec depart = 0;
  Sec arrive = 0;
  Sec total_walk_seconds = 0;
  double total_walk_meters = 0.0;
  Sec wait_before_start_seconds = 0;

  // Ordered route short names of the transit legs; the identity used for
  // option distinctness and change-rate comparisons.
  std::vector<std::string> route_signature() const;
};

struct PlanQuery {
  GeoPoint origin;
  GeoPoint destination;
  Sec depart_after = 0;  // seconds since `date` midnight
  Date date;
  int max_options = 4;
  double walk_speed_mps = 1.4;
  double max_walk_meters = 1000.0;
};

// Empty `options` comes with a reason (unreachable endpoints, no service...).
struct PlanResult {
  std::vector<Itinerary> options;
  std::string failure_reason;
};

// Seconds to walk `meters` at `speed_mps`, rounded up to whole seconds.
Sec walk_seconds(double meters, double speed_mps);

// Compute up to max_options itineraries, sorted by arrival time then total
// walking time, pairwise distinct in route signature. A pure-walk option is
// included whenever the straight-line distance is walkable. origin ==
// destination yields a single zero-leg itinerary.
PlanResult plan(const gtfs::TransitFeed& feed, const PlanQuery& q);

// Render the exact text handed to the decision prompt. `now` is the current
// time in the itinerary's time frame; minutes are rounded half-up.
std::string render_itinerary(const Itinerary& it, Sec now);

struct Violation {
  enum class Kind { schedule_mismatch, service_inactive, transfer_infeasible, sequence_error };
  Kind kind;
  std::string detail;
};

// Check an itinerary against the feed: every transit leg must match a real
// trip's stop_times on an active service, transfers must be walkable at
// walk_speed, and legs must be consistently ordered. Violations are data,
// not exceptions.
std::vector<Violation> validate_itinerary(const gtfs::TransitFeed& feed, const Itinerary& it,
                                          const Date& date, double walk_speed_mps = 1.4);

}  // namespace mobsim::planner
