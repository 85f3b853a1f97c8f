#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mobsim/agent/agent.hpp"
#include "mobsim/core/time.hpp"

namespace mobsim::metrics {

// One agent's day in numbers. change_rate is undefined on the agent's first
// active day (there is nothing to compare against); arrival_late_seconds is
// undefined when no activity of the day completed.
struct DailyAgentMetrics {
  std::string agent_id;
  Date date;
  std::optional<double> change_rate;           // in [0,1]
  std::optional<double> arrival_late_seconds;  // mean |realized - expected|
  int activities_count = 0;
  long long prompt_tokens = 0;
  int llm_calls = 0;
  double mean_llm_latency = 0.0;  // ms per call
};

// One day across the population. Means cover only agents whose value is
// defined; active_agents counts the agents with a defined change rate.
struct PopulationDailyMetrics {
  Date date;
  std::optional<double> mean_change_rate;
  std::optional<double> mean_arrival_late;
  int active_agents = 0;
  bool weekday = true;
};

struct ChangeRate {
  std::optional<double> value;
  bool count_mismatch = false;  // days had different activity counts
};

// Share of activities whose chosen route differs from the previous active
// day, matched by activity index. Empty `prev` means no previous day, so the
// rate is undefined. Mismatched counts compare over the common prefix.
ChangeRate change_rate(const std::vector<agent::TravelRecord>& day,
                       const std::vector<agent::TravelRecord>& prev);

// Mean absolute gap between realized and expected arrival, in seconds.
// Stranded trips count with their stranding time; trips that never finished
// are skipped, and a day with no finished trip is undefined.
std::optional<double> arrival_late_time(const std::vector<agent::TravelRecord>& day);

// Per-(agent, day) metrics over whole logs, sorted by (date, agent_id).
// Change rates compare each active day against the agent's previous active
// day. Count mismatches are reported through `warnings` when given.
std::vector<DailyAgentMetrics> compute_daily(const std::vector<agent::TravelRecord>& records,
                                             const std::vector<agent::DecisionRecord>& decisions,
                                             std::vector<std::string>* warnings = nullptr);

// Per-day population rows, sorted by date. Weekend rows carry weekday=false
// and are dropped entirely when weekdays_only is set.
std::vector<PopulationDailyMetrics> aggregate(const std::vector<DailyAgentMetrics>& daily,
                                              bool weekdays_only);

void write_daily_csv(std::ostream& out, const std::vector<DailyAgentMetrics>& rows);
void write_population_csv(std::ostream& out, const std::vector<PopulationDailyMetrics>& rows);

}  // namespace mobsim::metrics
