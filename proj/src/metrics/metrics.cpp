#include "mobsim/metrics/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "mobsim/core/csv.hpp"

namespace mobsim::metrics {

namespace {

std::string fixed(double v, int places) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", places, v);
  return buf;
}

bool is_weekday(const Date& d) {
  std::string name = d.weekday_name();
  return name != "Saturday" && name != "Sunday";
}

std::vector<agent::TravelRecord> by_activity(std::vector<agent::TravelRecord> records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const agent::TravelRecord& a, const agent::TravelRecord& b) {
                     return a.activity_index < b.activity_index;
                   });
  return records;
}

}  // namespace

ChangeRate change_rate(const std::vector<agent::TravelRecord>& day,
                       const std::vector<agent::TravelRecord>& prev) {
  ChangeRate out;
  if (prev.empty() || day.empty()) return out;  // nothing to compare against
  std::vector<agent::TravelRecord> cur = by_activity(day);
  std::vector<agent::TravelRecord> old = by_activity(prev);
  size_t n = std::min(cur.size(), old.size());
  out.count_mismatch = cur.size() != old.size();
  int changed = 0;
  for (size_t a = 0; a < n; ++a)
    if (cur[a].route_signature != old[a].route_signature) ++changed;
  out.value = static_cast<double>(changed) / static_cast<double>(n);
  return out;
}

std::optional<double> arrival_late_time(const std::vector<agent::TravelRecord>& day) {
  long long sum = 0;
  int finished = 0;
  for (const agent::TravelRecord& r : day) {
    if (!r.realized_arrival.has_value()) continue;  // never finished at all
    Sec gap = *r.realized_arrival - r.planned_arrival;
    sum += gap < 0 ? -gap : gap;
    ++finished;
  }
  if (finished == 0) return std::nullopt;
  return static_cast<double>(sum) / static_cast<double>(finished);
}

std::vector<DailyAgentMetrics> compute_daily(const std::vector<agent::TravelRecord>& records,
                                             const std::vector<agent::DecisionRecord>& decisions,
                                             std::vector<std::string>* warnings) {
  std::map<std::string, std::map<Date, std::vector<agent::TravelRecord>>> days;
  for (const agent::TravelRecord& r : records) days[r.agent_id][r.date].push_back(r);

  struct Tokens {
    long long prompt = 0;
    int calls = 0;
    double latency = 0;
  };
  std::map<std::string, std::map<Date, Tokens>> costs;
  for (const agent::DecisionRecord& d : decisions) {
    Tokens& t = costs[d.agent_id][d.date];
    t.prompt += d.prompt_tokens;
    t.calls += d.llm_calls;
    t.latency += d.latency_ms;
  }

  std::vector<DailyAgentMetrics> out;
  for (const auto& [agent_id, per_day] : days) {
    const std::vector<agent::TravelRecord>* prev = nullptr;
    for (const auto& [date, day_records] : per_day) {
      DailyAgentMetrics m;
      m.agent_id = agent_id;
      m.date = date;
      m.activities_count = static_cast<int>(day_records.size());
      ChangeRate cr = change_rate(day_records, prev ? *prev : std::vector<agent::TravelRecord>{});
      m.change_rate = cr.value;
      if (cr.count_mismatch && warnings)
        warnings->push_back("activity counts differ for " + agent_id + " on " + date.to_iso() +
                            "; compared the common prefix");
      m.arrival_late_seconds = arrival_late_time(day_records);
      if (auto ait = costs.find(agent_id); ait != costs.end()) {
        if (auto dit = ait->second.find(date); dit != ait->second.end()) {
          m.prompt_tokens = dit->second.prompt;
          m.llm_calls = dit->second.calls;
          if (dit->second.calls > 0)
            m.mean_llm_latency = dit->second.latency / dit->second.calls;
        }
      }
      out.push_back(std::move(m));
      prev = &day_records;
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const DailyAgentMetrics& a, const DailyAgentMetrics& b) {
                     if (!(a.date == b.date)) return a.date < b.date;
                     return a.agent_id < b.agent_id;
                   });
  return out;
}

std::vector<PopulationDailyMetrics> aggregate(const std::vector<DailyAgentMetrics>& daily,
                                              bool weekdays_only) {
  std::map<Date, std::vector<const DailyAgentMetrics*>> by_date;
  for (const DailyAgentMetrics& m : daily) by_date[m.date].push_back(&m);

  std::vector<PopulationDailyMetrics> out;
  for (const auto& [date, rows] : by_date) {
    PopulationDailyMetrics p;
    p.date = date;
    p.weekday = is_weekday(date);
    if (weekdays_only && !p.weekday) continue;
    double change_sum = 0, late_sum = 0;
    int change_n = 0, late_n = 0;
    for (const DailyAgentMetrics* m : rows) {
      if (m->change_rate) {
        change_sum += *m->change_rate;
        ++change_n;
      }
      if (m->arrival_late_seconds) {
        late_sum += *m->arrival_late_seconds;
        ++late_n;
      }
    }
    p.active_agents = change_n;
    if (change_n > 0) p.mean_change_rate = change_sum / change_n;
    if (late_n > 0) p.mean_arrival_late = late_sum / late_n;
    out.push_back(p);
  }
  return out;
}

void write_daily_csv(std::ostream& out, const std::vector<DailyAgentMetrics>& rows) {
  out << "agent_id,date,change_rate,arrival_late_seconds,activities_count,prompt_tokens,"
         "llm_calls,mean_llm_latency\n";
  for (const DailyAgentMetrics& m : rows) {
    out << csv::quote(m.agent_id) << ',' << m.date.to_iso() << ',';
    if (m.change_rate) out << fixed(*m.change_rate, 6);
    out << ',';
    if (m.arrival_late_seconds) out << fixed(*m.arrival_late_seconds, 6);
    out << ',' << m.activities_count << ',' << m.prompt_tokens << ',' << m.llm_calls << ','
        << fixed(m.mean_llm_latency, 3) << '\n';
  }
}

void write_population_csv(std::ostream& out, const std::vector<PopulationDailyMetrics>& rows) {
  out << "date,mean_change_rate,mean_arrival_late,active_agents,weekday\n";
  for (const PopulationDailyMetrics& p : rows) {
    out << p.date.to_iso() << ',';
    if (p.mean_change_rate) out << fixed(*p.mean_change_rate, 6);
    out << ',';
    if (p.mean_arrival_late) out << fixed(*p.mean_arrival_late, 6);
    out << ',' << p.active_agents << ',' << (p.weekday ? "true" : "false") << '\n';
  }
}

}  // namespace mobsim::metrics
