#include "mobsim/planner/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <set>

namespace mobsim::planner {

namespace {

constexpr Sec kInf = std::numeric_limits<Sec>::max() / 4;
constexpr int kMaxRounds = 6;     // transit legs per itinerary
constexpr int kMaxSearches = 40;  // route-ban combinations tried for diversity

Sec round_minutes(Sec seconds) {
  if (seconds < 0) seconds = 0;
  return (seconds + 30) / 60;
}

// Trips grouped by (route, exact stop sequence) so one scan serves them all.
struct Pattern {
  std::string route_id;
  std::vector<int> stops;
  std::vector<const gtfs::Trip*> trips;  // sorted by first departure, then id
};

struct Footpath {
  int stop;
  double meters;
};

// Search structures for one (feed, date): active patterns and walkable
// stop-to-stop links.
struct Context {
  const gtfs::TransitFeed* feed = nullptr;
  PlanQuery q;
  std::vector<const gtfs::Stop*> stops;
  std::map<std::string, int> stop_index;
  std::vector<Pattern> patterns;
  std::vector<std::vector<std::pair<int, int>>> patterns_at_stop;  // (pattern, position)
  std::vector<std::vector<Footpath>> foot;
};

// Bucket stops on a lat/lon grid so footpath building stays near-linear on
// big feeds.
std::vector<std::vector<Footpath>> build_footpaths(const std::vector<const gtfs::Stop*>& stops,
                                                   double max_walk_meters) {
  std::vector<std::vector<Footpath>> foot(stops.size());
  if (stops.empty()) return foot;
  double mean_lat = 0;
  for (const auto* s : stops) mean_lat += s->position.lat;
  mean_lat /= static_cast<double>(stops.size());
  double coslat = std::max(0.05, std::cos(mean_lat * 3.14159265358979323846 / 180.0));
  double cell_lat = max_walk_meters / 111194.9266;
  double cell_lon = cell_lat / coslat;

  std::map<std::pair<long, long>, std::vector<int>> grid;
  auto cell_of = [&](const GeoPoint& p) {
    return std::make_pair(static_cast<long>(std::floor(p.lat / cell_lat)),
                          static_cast<long>(std::floor(p.lon / cell_lon)));
  };
  for (size_t i = 0; i < stops.size(); ++i) grid[cell_of(stops[i]->position)].push_back(static_cast<int>(i));

  for (size_t i = 0; i < stops.size(); ++i) {
    auto [clat, clon] = cell_of(stops[i]->position);
    for (long dlat = -1; dlat <= 1; ++dlat) {
      for (long dlon = -1; dlon <= 1; ++dlon) {
        auto it = grid.find({clat + dlat, clon + dlon});
        if (it == grid.end()) continue;
        for (int j : it->second) {
          if (j == static_cast<int>(i)) continue;
          double d = haversine_meters(stops[i]->position, stops[j]->position);
          if (d <= max_walk_meters && d > 0) foot[i].push_back({j, d});
        }
      }
    }
  }
  return foot;
}

Context build_context(const gtfs::TransitFeed& feed, const PlanQuery& q,
                      const std::set<std::string>& active) {
  Context ctx;
  ctx.feed = &feed;
  ctx.q = q;
  for (const auto& [id, stop] : feed.stops) {
    ctx.stop_index[id] = static_cast<int>(ctx.stops.size());
    ctx.stops.push_back(&stop);
  }

  std::map<std::string, Pattern> patterns;
  for (const auto& [trip_id, trip] : feed.trips) {
    if (!active.count(trip.service_id)) continue;
    std::string key = trip.route_id;
    for (const auto& st : trip.stop_times) {
      key += '\n';
      key += st.stop_id;
    }
    Pattern& p = patterns[key];
    if (p.trips.empty()) {
      p.route_id = trip.route_id;
      for (const auto& st : trip.stop_times) p.stops.push_back(ctx.stop_index.at(st.stop_id));
    }
    p.trips.push_back(&trip);
  }
  for (auto& [key, p] : patterns) {
    std::sort(p.trips.begin(), p.trips.end(), [](const gtfs::Trip* a, const gtfs::Trip* b) {
      if (a->first_departure() != b->first_departure())
        return a->first_departure() < b->first_departure();
      return a->id < b->id;
    });
    ctx.patterns.push_back(std::move(p));
  }
  ctx.patterns_at_stop.resize(ctx.stops.size());
  for (size_t pi = 0; pi < ctx.patterns.size(); ++pi) {
    const Pattern& p = ctx.patterns[pi];
    for (size_t pos = 0; pos < p.stops.size(); ++pos) {
      ctx.patterns_at_stop[static_cast<size_t>(p.stops[pos])].emplace_back(static_cast<int>(pi),
                                                                           static_cast<int>(pos));
    }
  }
  ctx.foot = build_footpaths(ctx.stops, q.max_walk_meters);
  return ctx;
}

struct RideInfo {
  int pattern = -1;
  int trip = -1;
  int board_stop = -1;
  Sec board_dep = 0;
};

struct Label {
  Sec arrival = kInf;
  enum class Via { none, access, ride, foot } via = Via::none;
  double access_meters = 0;  // access
  RideInfo ride;             // ride, and the ride feeding a foot label
  Sec ride_arrival = 0;      // foot: when the feeding ride alighted
  int ride_stop = -1;        // foot: where it alighted
  double foot_meters = 0;    // foot
};

// One earliest-arrival search; `banned` routes are skipped. Returns legs in
// travel order, or nothing when no transit itinerary reaches the target.
std::optional<Itinerary> raptor_search(const Context& ctx, const std::set<std::string>& banned) {
  const PlanQuery& q = ctx.q;
  size_t n = ctx.stops.size();
  // Two label grids per round. A journey may only leave the network right
  // after a ride, so the earliest arrival that counts for egress and foot
  // transfers (`ride`) differs from the earliest arrival by any means, which
  // bounds boarding (`board`). A foot label may beat a ride label on time yet
  // must not hide it: the slower ride can still egress.
  std::vector<std::vector<Label>> board(kMaxRounds + 1, std::vector<Label>(n));
  std::vector<std::vector<Label>> ride(kMaxRounds + 1, std::vector<Label>(n));
  std::vector<Sec> tau_board(n, kInf);
  std::vector<Sec> tau_ride(n, kInf);

  std::vector<int> marked;
  for (size_t i = 0; i < n; ++i) {
    double d = haversine_meters(q.origin, ctx.stops[i]->position);
    if (d > q.max_walk_meters) continue;
    Label& l = board[0][i];
    l.arrival = q.depart_after + walk_seconds(d, q.walk_speed_mps);
    l.via = Label::Via::access;
    l.access_meters = d;
    tau_board[i] = l.arrival;
    marked.push_back(static_cast<int>(i));
  }

  Sec best_dest = kInf;
  int best_round = -1;
  int best_stop = -1;
  Label best_label;

  for (int k = 1; k <= kMaxRounds && !marked.empty(); ++k) {
    // Patterns touching a stop improved last round, with the earliest such
    // position on the pattern.
    std::map<int, int> queue;
    for (int s : marked) {
      for (auto [pi, pos] : ctx.patterns_at_stop[static_cast<size_t>(s)]) {
        auto it = queue.find(pi);
        if (it == queue.end() || pos < it->second) queue[pi] = pos;
      }
    }
    marked.clear();

    std::vector<int> alighted;
    for (auto [pi, start_pos] : queue) {
      const Pattern& p = ctx.patterns[static_cast<size_t>(pi)];
      if (banned.count(p.route_id)) continue;
      int ct = -1;  // index into p.trips currently ridden
      int board_pos = -1;
      for (size_t pos = static_cast<size_t>(start_pos); pos < p.stops.size(); ++pos) {
        int s = p.stops[pos];
        if (ct >= 0) {
          Sec arr = p.trips[static_cast<size_t>(ct)]->stop_times[pos].arrival;
          if (arr < tau_ride[static_cast<size_t>(s)]) {
            Label l;
            l.arrival = arr;
            l.via = Label::Via::ride;
            l.ride = {pi, ct, p.stops[static_cast<size_t>(board_pos)],
                      p.trips[static_cast<size_t>(ct)]
                          ->stop_times[static_cast<size_t>(board_pos)]
                          .departure};
            ride[static_cast<size_t>(k)][static_cast<size_t>(s)] = l;
            tau_ride[static_cast<size_t>(s)] = arr;
            alighted.push_back(s);
            if (arr < tau_board[static_cast<size_t>(s)]) {
              board[static_cast<size_t>(k)][static_cast<size_t>(s)] = l;
              tau_board[static_cast<size_t>(s)] = arr;
              marked.push_back(s);
            }
          }
        }
        const Label& prev = board[static_cast<size_t>(k - 1)][static_cast<size_t>(s)];
        if (prev.via == Label::Via::none) continue;
        Sec bound = prev.arrival;
        if (ct >= 0 &&
            bound > p.trips[static_cast<size_t>(ct)]->stop_times[pos].departure)
          continue;
        // Earliest trip of the pattern boardable here; linear scan keeps
        // overtaking trips correct.
        int best_trip = -1;
        Sec best_dep = kInf;
        for (size_t ti = 0; ti < p.trips.size(); ++ti) {
          Sec dep = p.trips[ti]->stop_times[pos].departure;
          if (dep >= bound && dep < best_dep) {
            best_dep = dep;
            best_trip = static_cast<int>(ti);
          }
        }
        if (best_trip >= 0 && (ct < 0 || best_dep < p.trips[static_cast<size_t>(ct)]
                                                        ->stop_times[pos]
                                                        .departure)) {
          ct = best_trip;
          board_pos = static_cast<int>(pos);
        }
      }
    }

    std::set<int> uniq_alighted(alighted.begin(), alighted.end());

    // Destination via egress walk from this round's ride labels.
    for (int s : uniq_alighted) {
      const Label& src = ride[static_cast<size_t>(k)][static_cast<size_t>(s)];
      double d = haversine_meters(ctx.stops[static_cast<size_t>(s)]->position, q.destination);
      if (d > q.max_walk_meters) continue;
      Sec arr = src.arrival + walk_seconds(d, q.walk_speed_mps);
      if (arr < best_dest) {
        best_dest = arr;
        best_round = k;
        best_stop = s;
        best_label = src;
      }
    }

    // Walk links from freshly alighted stops; a foot label only ever feeds
    // the next boarding, so it competes on the board grid alone.
    for (int s : uniq_alighted) {
      const Label& src = ride[static_cast<size_t>(k)][static_cast<size_t>(s)];
      for (const Footpath& fp : ctx.foot[static_cast<size_t>(s)]) {
        Sec arr = src.arrival + walk_seconds(fp.meters, q.walk_speed_mps);
        if (arr >= tau_board[static_cast<size_t>(fp.stop)]) continue;
        Label& l = board[static_cast<size_t>(k)][static_cast<size_t>(fp.stop)];
        l.arrival = arr;
        l.via = Label::Via::foot;
        l.ride = src.ride;
        l.ride_arrival = src.arrival;
        l.ride_stop = s;
        l.foot_meters = fp.meters;
        tau_board[static_cast<size_t>(fp.stop)] = arr;
        marked.push_back(fp.stop);
      }
    }

    std::set<int> uniq(marked.begin(), marked.end());
    marked.assign(uniq.begin(), uniq.end());
  }

  if (best_stop < 0) return std::nullopt;

  // Walk the parent chain backwards into legs.
  std::vector<Leg> rev;
  const gtfs::TransitFeed& feed = *ctx.feed;
  auto stop_name = [&](int s) { return ctx.stops[static_cast<size_t>(s)]->name; };
  auto stop_id = [&](int s) { return ctx.stops[static_cast<size_t>(s)]->id; };
  auto stop_pos = [&](int s) { return ctx.stops[static_cast<size_t>(s)]->position; };

  double egress_m = haversine_meters(stop_pos(best_stop), q.destination);
  if (egress_m > 0) {
    Leg walk;
    walk.kind = Leg::Kind::transfer;
    walk.from_stop = stop_id(best_stop);
    walk.from_name = stop_name(best_stop);
    walk.from_pos = stop_pos(best_stop);
    walk.to_name = "destination";
    walk.to_pos = q.destination;
    walk.start = best_label.arrival;
    walk.end = walk.start + walk_seconds(egress_m, q.walk_speed_mps);
    walk.walk_meters = egress_m;
    rev.push_back(walk);
  }

  // Trace parents: each ride boarded where the previous round's board label
  // stood, and those earlier rounds are final by now.
  int k = best_round;
  int s = best_stop;
  Label cur = best_label;
  while (true) {
    if (cur.via == Label::Via::access) {
      if (cur.access_meters > 0) {
        Leg walk;
        walk.kind = Leg::Kind::transfer;
        walk.from_name = "origin";
        walk.from_pos = q.origin;
        walk.to_stop = stop_id(s);
        walk.to_name = stop_name(s);
        walk.to_pos = stop_pos(s);
        // Timed so the walk ends right at the next boarding: the wait
        // happens at the origin, not at the stop.
        Sec wsec = walk_seconds(cur.access_meters, q.walk_speed_mps);
        Sec board = rev.empty() ? cur.arrival : rev.back().start;
        walk.end = board;
        walk.start = board - wsec;
        walk.walk_meters = cur.access_meters;
        rev.push_back(walk);
      }
      break;
    }
    int ride_alight_stop = s;
    Sec ride_arrival = cur.arrival;
    if (cur.via == Label::Via::foot) {
      Leg walk;
      walk.kind = Leg::Kind::transfer;
      walk.from_stop = stop_id(cur.ride_stop);
      walk.from_name = stop_name(cur.ride_stop);
      walk.from_pos = stop_pos(cur.ride_stop);
      walk.to_stop = stop_id(s);
      walk.to_name = stop_name(s);
      walk.to_pos = stop_pos(s);
      walk.start = cur.ride_arrival;
      walk.end = cur.arrival;
      walk.walk_meters = cur.foot_meters;
      rev.push_back(walk);
      ride_alight_stop = cur.ride_stop;
      ride_arrival = cur.ride_arrival;
    }
    const RideInfo& ri = cur.ride;
    const Pattern& p = ctx.patterns[static_cast<size_t>(ri.pattern)];
    const gtfs::Trip* trip = p.trips[static_cast<size_t>(ri.trip)];
    const gtfs::Route& route = feed.routes.at(p.route_id);
    Leg ride;
    ride.kind = Leg::Kind::transit;
    ride.from_stop = stop_id(ri.board_stop);
    ride.from_name = stop_name(ri.board_stop);
    ride.from_pos = stop_pos(ri.board_stop);
    ride.to_stop = stop_id(ride_alight_stop);
    ride.to_name = stop_name(ride_alight_stop);
    ride.to_pos = stop_pos(ride_alight_stop);
    ride.start = ri.board_dep;
    ride.end = ride_arrival;
    ride.route_short_name = route.short_name;
    ride.mode = route.mode;
    ride.trip_id = trip->id;
    rev.push_back(ride);

    s = ri.board_stop;
    --k;
    cur = board[static_cast<size_t>(k)][static_cast<size_t>(s)];
  }

  Itinerary it;
  it.legs.assign(rev.rbegin(), rev.rend());
  it.depart = it.legs.front().start;
  it.arrive = it.legs.back().end;
  for (const Leg& leg : it.legs) {
    if (leg.kind == Leg::Kind::transfer) {
      it.total_walk_seconds += leg.end - leg.start;
      it.total_walk_meters += leg.walk_meters;
    }
  }
  it.wait_before_start_seconds = it.depart - q.depart_after;
  return it;
}

Itinerary pure_walk_itinerary(const PlanQuery& q, double meters) {
  Itinerary it;
  Leg walk;
  walk.kind = Leg::Kind::transfer;
  walk.from_name = "origin";
  walk.from_pos = q.origin;
  walk.to_name = "destination";
  walk.to_pos = q.destination;
  walk.start = q.depart_after;
  walk.end = q.depart_after + walk_seconds(meters, q.walk_speed_mps);
  walk.walk_meters = meters;
  it.legs.push_back(walk);
  it.depart = walk.start;
  it.arrive = walk.end;
  it.total_walk_seconds = walk.end - walk.start;
  it.total_walk_meters = meters;
  it.wait_before_start_seconds = 0;
  return it;
}

}  // namespace

Sec walk_seconds(double meters, double speed_mps) {
  if (meters <= 0) return 0;
  return static_cast<Sec>(std::ceil(meters / speed_mps));
}

std::vector<std::string> Itinerary::route_signature() const {
  std::vector<std::string> sig;
  for (const Leg& leg : legs) {
    if (leg.kind == Leg::Kind::transit) sig.push_back(leg.route_short_name);
  }
  return sig;
}

PlanResult plan(const gtfs::TransitFeed& feed, const PlanQuery& query) {
  PlanQuery q = query;
  if (q.max_options < 1) q.max_options = 1;
  PlanResult result;

  if (q.origin == q.destination) {
    Itinerary it;
    it.depart = q.depart_after;
    it.arrive = q.depart_after;
    result.options.push_back(it);
    return result;
  }

  double direct_m = haversine_meters(q.origin, q.destination);
  bool walkable = direct_m <= q.max_walk_meters;

  std::set<std::string> active;
  try {
    active = gtfs::active_services(feed, q.date);
  } catch (const gtfs::FeedError& e) {
    if (walkable) {
      result.options.push_back(pure_walk_itinerary(q, direct_m));
      return result;
    }
    result.failure_reason = e.what();
    return result;
  }

  Context ctx = build_context(feed, q, active);

  bool origin_reachable = false;
  bool dest_reachable = false;
  for (const auto* stop : ctx.stops) {
    if (haversine_meters(q.origin, stop->position) <= q.max_walk_meters) origin_reachable = true;
    if (haversine_meters(q.destination, stop->position) <= q.max_walk_meters) dest_reachable = true;
  }

  std::vector<Itinerary> pool;
  std::set<std::vector<std::string>> seen;
  if (origin_reachable && dest_reachable) {
    std::deque<std::set<std::string>> bans_queue = {{}};
    std::set<std::set<std::string>> tried = {{}};
    int searches = 0;
    while (!bans_queue.empty() && searches < kMaxSearches &&
           static_cast<int>(pool.size()) < q.max_options * 4) {
      std::set<std::string> bans = bans_queue.front();
      bans_queue.pop_front();
      ++searches;
      auto found = raptor_search(ctx, bans);
      if (!found) continue;
      std::set<std::string> used_routes;
      for (const Leg& leg : found->legs) {
        if (leg.kind == Leg::Kind::transit)
          used_routes.insert(feed.trips.at(leg.trip_id).route_id);
      }
      if (seen.insert(found->route_signature()).second) pool.push_back(*found);
      for (const std::string& rid : used_routes) {
        std::set<std::string> next = bans;
        next.insert(rid);
        if (tried.insert(next).second) bans_queue.push_back(next);
      }
    }
  }

  if (walkable) pool.push_back(pure_walk_itinerary(q, direct_m));

  if (pool.empty()) {
    if (!origin_reachable) {
      result.failure_reason = "origin unreachable: no stop within walking distance and the "
                              "destination is too far to walk";
    } else if (!dest_reachable) {
      result.failure_reason = "destination unreachable: no stop within walking distance and too "
                              "far to walk";
    } else {
      result.failure_reason = "no route found: no transit itinerary and too far to walk";
    }
    return result;
  }

  std::sort(pool.begin(), pool.end(), [](const Itinerary& a, const Itinerary& b) {
    if (a.arrive != b.arrive) return a.arrive < b.arrive;
    if (a.total_walk_seconds != b.total_walk_seconds)
      return a.total_walk_seconds < b.total_walk_seconds;
    return a.route_signature() < b.route_signature();
  });

  std::vector<Itinerary> chosen(pool.begin(),
                                pool.begin() + std::min<size_t>(pool.size(),
                                                                static_cast<size_t>(q.max_options)));
  if (walkable) {
    bool has_walk = false;
    for (const Itinerary& it : chosen) {
      if (it.route_signature().empty()) has_walk = true;
    }
    if (!has_walk) {
      chosen.back() = pure_walk_itinerary(q, direct_m);
      std::sort(chosen.begin(), chosen.end(), [](const Itinerary& a, const Itinerary& b) {
        if (a.arrive != b.arrive) return a.arrive < b.arrive;
        return a.total_walk_seconds < b.total_walk_seconds;
      });
    }
  }
  result.options = std::move(chosen);
  return result;
}

std::string render_itinerary(const Itinerary& it, Sec now) {
  std::string out = "List of transits:";
  for (const Leg& leg : it.legs) {
    if (leg.kind != Leg::Kind::transit) continue;
    out += "\n- ";
    out += gtfs::mode_name(leg.mode);
    out += " " + leg.route_short_name + " from '" + leg.from_name + "' to '" + leg.to_name +
           "'; estimated time: " + std::to_string(round_minutes(leg.end - leg.start)) + " minutes";
  }
  out += "\nExpected starting in " + std::to_string(round_minutes(it.depart - now)) + " minutes.";
  out += "\nTotal walking time between transits: " +
         std::to_string(round_minutes(it.total_walk_seconds)) + " minutes; ";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", it.total_walk_meters);
  out += "\nTotal walking distance: ";
  out += buf;
  out += " meters";
  return out;
}

std::vector<Violation> validate_itinerary(const gtfs::TransitFeed& feed, const Itinerary& it,
                                          const Date& date, double walk_speed_mps) {
  std::vector<Violation> v;
  auto add = [&](Violation::Kind kind, const std::string& detail) { v.push_back({kind, detail}); };

  std::set<std::string> active;
  bool have_active = true;
  try {
    active = gtfs::active_services(feed, date);
  } catch (const gtfs::FeedError& e) {
    have_active = false;
    if (!it.legs.empty()) add(Violation::Kind::service_inactive, e.what());
  }

  for (size_t i = 0; i < it.legs.size(); ++i) {
    const Leg& leg = it.legs[i];
    std::string tag = "leg " + std::to_string(i + 1);
    if (leg.end < leg.start) add(Violation::Kind::sequence_error, tag + ": ends before it starts");
    if (i + 1 < it.legs.size() && it.legs[i + 1].start < leg.end)
      add(Violation::Kind::sequence_error, tag + ": overlaps the next leg");

    if (leg.kind == Leg::Kind::transfer) {
      Sec needed = walk_seconds(leg.walk_meters, walk_speed_mps);
      if (leg.end - leg.start < needed) {
        add(Violation::Kind::transfer_infeasible,
            tag + ": " + std::to_string(static_cast<long long>(leg.walk_meters)) + " m needs " +
                std::to_string(needed) + " s, leg has " + std::to_string(leg.end - leg.start));
      }
      continue;
    }

    auto trip_it = feed.trips.find(leg.trip_id);
    if (trip_it == feed.trips.end()) {
      add(Violation::Kind::schedule_mismatch, tag + ": unknown trip " + leg.trip_id);
      continue;
    }
    const gtfs::Trip& trip = trip_it->second;
    if (have_active && !active.count(trip.service_id)) {
      add(Violation::Kind::service_inactive,
          tag + ": trip " + trip.id + " does not run on " + date.to_iso());
    }
    int from_idx = -1;
    int to_idx = -1;
    for (size_t s = 0; s < trip.stop_times.size(); ++s) {
      const auto& st = trip.stop_times[s];
      if (from_idx < 0 && st.stop_id == leg.from_stop && st.departure == leg.start)
        from_idx = static_cast<int>(s);
      else if (from_idx >= 0 && to_idx < 0 && st.stop_id == leg.to_stop && st.arrival == leg.end)
        to_idx = static_cast<int>(s);
    }
    if (from_idx < 0 || to_idx < 0) {
      add(Violation::Kind::schedule_mismatch,
          tag + ": trip " + trip.id + " has no matching " + leg.from_stop + "->" + leg.to_stop +
              " segment at the stated times");
    }
    if (i + 1 < it.legs.size()) {
      const Leg& next = it.legs[i + 1];
      if (next.kind == Leg::Kind::transit && next.from_stop != leg.to_stop) {
        add(Violation::Kind::sequence_error,
            tag + ": consecutive transit legs without a transfer do not share a stop");
      }
    }
  }

  if (!it.legs.empty()) {
    if (it.depart != it.legs.front().start)
      add(Violation::Kind::sequence_error, "depart does not match the first leg");
    if (it.arrive != it.legs.back().end)
      add(Violation::Kind::sequence_error, "arrive does not match the last leg");
    Sec walk_s = 0;
    double walk_m = 0;
    for (const Leg& leg : it.legs) {
      if (leg.kind == Leg::Kind::transfer) {
        walk_s += leg.end - leg.start;
        walk_m += leg.walk_meters;
      }
    }
    if (walk_s != it.total_walk_seconds || std::abs(walk_m - it.total_walk_meters) > 1e-6)
      add(Violation::Kind::sequence_error, "walking totals do not match the legs");
  }
  return v;
}

}  // namespace mobsim::planner
