#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mobsim/core/geo.hpp"
#include "mobsim/core/time.hpp"
#include "mobsim/kernel/kernel.hpp"
#include "mobsim/memory/memory.hpp"
#include "mobsim/planner/planner.hpp"

namespace mobsim::agent {

struct AgentError : std::runtime_error {
  enum class Code {
    empty_options,
    no_json_found,
    index_out_of_range,
    missing_field,
    llm_unavailable,
    bad_persona,
    bad_record,
  };
  Code code;
  AgentError(Code c, const std::string& what) : std::runtime_error(what), code(c) {}
};

enum class Purpose { work, home, leisure, school, shopping, other };
const char* purpose_name(Purpose p);
Purpose purpose_from_name(const std::string& name);  // throws bad_persona

struct Activity {
  Sec planned_time = 0;  // seconds of day the activity should start
  Purpose purpose = Purpose::other;
  GeoPoint location;
  Sec expected_arrival = 0;  // defaults to planned_time
};

struct Persona {
  std::string id;
  int age = 0;
  std::string job;
  std::string description;
  std::vector<std::string> traits;
  std::vector<Activity> activities;  // ordered by planned_time
};

// JSON document: top-level array of persona objects, each with id, age, job,
// description, traits[] and activities[] of {time: "H:MM", purpose, lat, lon}.
std::vector<Persona> load_personas(const std::string& path);
Persona parse_persona(const std::string& json_text);

// Where the agent's day begins: the last home activity's location, or the
// last activity when no home entry exists.
GeoPoint start_position(const Persona& p);

struct DayScheduleEntry {
  Activity activity;
  Sec adjusted_departure = 0;
};

struct DaySchedule {
  std::string agent_id;
  Date date;
  std::vector<DayScheduleEntry> entries;  // ordered by adjusted_departure
};

// One activity's journey outcome; the raw material for scheduling and
// metrics. planned_arrival is the activity's expected start, predicted
// arrival is what the chosen itinerary promised.
struct TravelRecord {
  std::string agent_id;
  Date date;
  int activity_index = 0;  // position within that day's schedule
  Purpose purpose = Purpose::other;
  std::vector<std::string> route_signature;
  Sec adjusted_departure = 0;
  Sec planned_arrival = 0;
  Sec predicted_arrival = 0;
  std::optional<Sec> realized_arrival;  // set when the journey finished
  bool stranded = false;
  int options_offered = 0;
  int chosen_index = 1;  // 1-based
};

struct ScheduleParams {
  int window_days = 3;    // how far back the lateness average looks
  Sec max_shift = 3600;   // never depart more than this before the plan
};

// Departure planning: day one leaves at the planned times; every later day
// shifts each activity's departure by the mean signed lateness (realized
// minus expected arrival) of that activity over the trailing window, clamped
// to [planned - max_shift, planned].
DaySchedule schedule_day(const Persona& p, const std::vector<TravelRecord>& history,
                         const Date& date, const ScheduleParams& params = {});

struct Prompt {
  std::string system;
  std::string user;
};

// The persona-framed system text shared by every prompt the agent sends.
std::string system_prompt_for(const Persona& persona);

// Decision prompt: persona-framed system text plus a user text holding the
// travel requirements, the retrieved experiences (newest first), the numbered
// options and the fixed analysis framework. Deterministic for fixed inputs.
Prompt build_prompt(const Activity& activity, const Persona& persona, int trip_index,
                    int trips_today, const Date& date, Sec desired_departure,
                    const std::vector<memory::ScoredEntry>& memories,
                    const std::vector<std::string>& rendered_options);

struct Decision {
  int chosen_plan = 1;
  std::string reason;
  std::string raw_response;
  long long prompt_tokens = 0;
  long long response_tokens = 0;
  bool fallback = false;
  int llm_calls = 1;
  double latency_ms = 0;
};

// Pull the final decision out of a model response: the last fenced JSON
// block wins; without fences, the last brace-balanced object. Requires an
// integer chosen_plan in [1, n_options] and a string reason.
Decision parse_decision(const std::string& text, int n_options);

struct LlmRequest {
  std::string system;
  std::string user;
  double temperature = 0.0;
  std::optional<std::uint64_t> seed;
};

struct LlmResponse {
  std::string text;
  long long prompt_tokens = 0;
  long long response_tokens = 0;
  double latency_ms = 0;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual LlmResponse complete(const LlmRequest& req) = 0;
};

// Whitespace-separated token count; the accounting unit used by the offline
// clients.
long long approx_tokens(const std::string& text);

// Replays a fixed list of responses in order; asking past the end fails.
class ScriptedLlm : public LlmClient {
 public:
  explicit ScriptedLlm(std::vector<std::string> responses)
      : responses_(std::move(responses)) {}
  LlmResponse complete(const LlmRequest& req) override;
  size_t served() const { return next_; }

 private:
  std::vector<std::string> responses_;
  size_t next_ = 0;
};

// Client for a completion service: POST {"system", "user", "temperature",
// "seed"?} to `path`, expect {"text", "prompt_tokens"?, "response_tokens"?}.
// An api_key travels as a bearer token.
class HttpLlm : public LlmClient {
 public:
  HttpLlm(std::string host, int port, std::string path = "/complete",
          std::string api_key = "");
  LlmResponse complete(const LlmRequest& req) override;

 private:
  std::string host_;
  int port_;
  std::string path_;
  std::string api_key_;
};

// Asks the client once, retries once with a format reminder when the answer
// does not parse, then falls back to option 1 with a flagged record.
Decision decide(LlmClient& client, const Prompt& prompt, int n_options);

// End-of-day consolidation: turns the window's events into objective facts
// (concepts) and persona-conditioned preferences (reflections), embeds and
// tags each entry, and stores them dated `date`. Concept texts that slip in
// first-person or trait language are reclassified as reflections. The caller
// clears the short-term window after a successful return.
std::vector<const memory::MemoryEntry*> reflect_daily(
    const Persona& persona, const Date& date,
    const std::vector<memory::ShortTermEvent>& window_events, LlmClient& client,
    memory::Embedder& embedder, memory::MemoryStore& store);

// Periodic generalization: summarizes the window's reflections into at most
// three abstraction entries dated `window_end`; the originals stay.
std::vector<const memory::MemoryEntry*> abstract_reflections(
    const Persona& persona, const Date& window_end, int window_days, LlmClient& client,
    memory::Embedder& embedder, memory::MemoryStore& store);

// Compare a finished journey against its plan: waits that ran over produce
// `delay` events naming the route, and the final arrival produces an
// `arrival-late` event when it misses the expected time by a minute or more.
std::vector<memory::ShortTermEvent> derive_events(
    const std::string& agent_id, const Date& date, const planner::Itinerary& plan,
    Purpose purpose, Sec expected_arrival,
    const std::vector<kernel::PerceptionEvent>& journey_events);

// One row per (agent, date, activity) decision, the audit trail of choices.
struct DecisionRecord {
  std::string agent_id;
  Date date;
  int activity_index = 0;
  Purpose purpose = Purpose::other;
  std::vector<std::string> route_signature;
  int chosen_index = 1;
  int options_offered = 0;
  bool fallback = false;
  std::string reason;
  long long prompt_tokens = 0;
  long long response_tokens = 0;
  int llm_calls = 0;
  double latency_ms = 0;
};

void write_decisions_csv(std::ostream& out, const std::vector<DecisionRecord>& rows);
void write_travel_records_csv(std::ostream& out, const std::vector<TravelRecord>& rows);
std::vector<TravelRecord> read_travel_records_csv(const std::string& content);

// Offline decision policies, packaged as completion clients: they read the
// same prompts an external model would and answer in the same output format,
// so the downstream parsing path is identical in mock and http modes.

// Cycles through the distinct route signatures for an activity during the
// exploration days, then keeps re-choosing the last signature; when that
// signature disappears, falls back to the option with the shortest wait.
class HabitLlm : public LlmClient {
 public:
  explicit HabitLlm(std::uint64_t seed = 0, int explore_days = 3)
      : seed_(seed), explore_days_(explore_days) {}
  LlmResponse complete(const LlmRequest& req) override;

 private:
  struct ActivityHabit {
    std::set<Date> days_seen;
    std::vector<std::string> last_signature;
    bool has_last = false;
  };
  std::uint64_t seed_;
  int explore_days_;
  std::map<std::string, ActivityHabit> habits_;
};

// Scores each option by the delay minutes its routes accumulated in the
// retrieved experiences and picks the least-penalized one (ties: first).
// With no relevant memories it simply takes option 1.
class RetrievalLlm : public LlmClient {
 public:
  LlmResponse complete(const LlmRequest& req) override;
};

}  // namespace mobsim::agent
