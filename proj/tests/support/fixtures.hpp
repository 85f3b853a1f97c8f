#pragma once

#include <map>
#include <random>
#include <string>

#include "mobsim/gtfs/feed.hpp"
#include "mobsim/planner/planner.hpp"

namespace mobsim::test {

// Small synthetic feed used across the suites: two bus trips and one metro
// trip over four stops, weekday + weekend services, a few exception dates,
// plus deliberately broken rows to exercise the load report.
std::map<std::string, std::string> small_feed_tables();

// Same network without the broken rows.
std::map<std::string, std::string> clean_feed_tables();

// Create a fresh directory under the system temp dir and return its path.
std::string make_temp_dir(const std::string& prefix);

// Write each table as a file into `dir`.
void write_tables(const std::string& dir, const std::map<std::string, std::string>& tables);

// Write tables as a zip archive (stored entries) at `zip_path`.
void write_zip(const std::string& zip_path, const std::map<std::string, std::string>& tables);

// Feed laid out on the equator with hand-computed walking distances: metro A
// and buses B/C/E between a station cluster and a center cluster, connecting
// services D/F, plus an isolated two-stop cluster (H/I) where transit beats
// walking. All services run every day of March 2025.
std::map<std::string, std::string> line_feed_tables();

// Random small feed (≤ 20 trips) plus a matching random query, for checking
// the planner against the exhaustive-search oracle.
std::map<std::string, std::string> random_feed_tables(std::mt19937& rng);
planner::PlanQuery random_query(std::mt19937& rng);

// The worked two-leg itinerary used to pin the rendered text format (Bus 36
// then Metro A, 3 minutes to departure, 15 minutes / 757.0 m of walking).
planner::Itinerary rendered_text_fixture();

}  // namespace mobsim::test
