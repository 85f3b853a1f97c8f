#include "mobsim/agent/agent.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "mobsim/core/csv.hpp"

namespace mobsim::agent {

namespace {

// Listing text reproduced byte-for-byte, including the hard wraps and the
// trailing spaces they carry; golden files pin it.
const char* kAgentSpec =
    "# Agent specification\n"
    "\n"
    "You are a simulation of a person such that:\n"
    "  - You don't know you are a simulation, you think you are an actual person.\n"
    "  - You follow the directives given below.\n"
    "  - You interpret the persona described below (Section \"Persona\"). You indeed \n"
    "  think you ARE that person.\n"
    "  - Your knowledge is limited to what can be reasonably expected from the \n"
    "  specified persona and the current cognitive state. \n"
    "    If the persona is not likely to know something, you must pretend you \n"
    "    don't know it either.\n"
    "  - You behave as realistically as possible, in accordance with the specified \n"
    "  persona, including making mistakes, forgetting things, being nasty, and \n"
    "  being influenced by your emotions. Remember, you are meant to be a \n"
    "  simulation of a real person, not a perfect machine.\n";

const char* kAnalysisFramework =
    "## Decision Criteria Factors\n"
    "Focus on the following factors when selecting the best travel plan:\n"
    "- Reliability & Timing: For work/education trips, prioritize punctuality and \n"
    "predictable travel times. Also consider the number of transfers and \n"
    "connection complexity, walking distances, and waiting times.\n"
    "- Past Experience Patterns: Leverage positive experiences, avoid repeating \n"
    "negative ones.\n"
    "- Personal Preferences: Align with preferred transport modes and comfort \n"
    "levels.\n"
    "\n"
    "## Think step by step\n"
    "Think carefully step by step, first evaluating each option based on past \n"
    "experiences and suitability for the trip purpose, rate them with a score \n"
    "from 1 to 5, then select the best plan from the options provided.\n"
    "\n"
    "Step 1: Evaluate Each Option\n"
    "Analyze each option following these criteria, each in under 100 words.\n"
    "\n"
    "Step 2: Final Decision\n"
    "Choose the option based on the previous evaluations (Step 1). If multiple\n"
    "options are equally good, consider your habits and preferences.\n"
    "\n"
    "# OUTPUT format:\n"
    "*******\n"
    "Step 1: Brief Analysis of each option\n"
    "- Option 1: CONTENT\n"
    "- Option 2: CONTENT\n"
    "*******\n"
    "Step 2: Final Decision, this is in JSON format\n"
    "```json\n"
    "    {\n"
    "        \"chosen_plan\": INDEX start from 1,\n"
    "        \"reason\": \"REASON\"\n"
    "    }\n"
    "```";

long long whole_minutes(Sec seconds) {
  if (seconds < 0) seconds = -seconds;
  return (seconds + 30) / 60;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> lower_words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// "H:MM" or "H:MM:SS", hours may exceed 23.
Sec parse_clock(const std::string& s) {
  std::vector<std::string> parts = split(s, ':');
  if (parts.size() != 2 && parts.size() != 3)
    throw AgentError(AgentError::Code::bad_persona, "bad time of day: " + s);
  long long vals[3] = {0, 0, 0};
  for (size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].empty() || parts[i].size() > 2 ||
        parts[i].find_first_not_of("0123456789") != std::string::npos)
      throw AgentError(AgentError::Code::bad_persona, "bad time of day: " + s);
    vals[i] = std::stoll(parts[i]);
  }
  if (vals[1] > 59 || vals[2] > 59)
    throw AgentError(AgentError::Code::bad_persona, "bad time of day: " + s);
  return vals[0] * 3600 + vals[1] * 60 + vals[2];
}

Persona persona_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw AgentError(AgentError::Code::bad_persona, "persona must be an object");
  Persona p;
  try {
    p.id = j.at("id").is_string() ? j.at("id").get<std::string>()
                                  : std::to_string(j.at("id").get<long long>());
    p.age = j.at("age").get<int>();
    p.job = j.at("job").get<std::string>();
    p.description = j.at("description").get<std::string>();
    for (const auto& t : j.at("traits")) p.traits.push_back(t.get<std::string>());
    for (const auto& a : j.at("activities")) {
      Activity act;
      act.planned_time = parse_clock(a.at("time").get<std::string>());
      act.purpose = purpose_from_name(a.at("purpose").get<std::string>());
      act.location = {a.at("lat").get<double>(), a.at("lon").get<double>()};
      act.expected_arrival =
          a.contains("expected_arrival") ? parse_clock(a.at("expected_arrival").get<std::string>())
                                         : act.planned_time;
      p.activities.push_back(act);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw AgentError(AgentError::Code::bad_persona, std::string("bad persona: ") + ex.what());
  }
  if (p.activities.empty())
    throw AgentError(AgentError::Code::bad_persona, "persona " + p.id + " has no activities");
  for (size_t i = 1; i < p.activities.size(); ++i)
    if (p.activities[i].planned_time < p.activities[i - 1].planned_time)
      throw AgentError(AgentError::Code::bad_persona,
                       "persona " + p.id + " activities out of order");
  return p;
}

// Raw newlines inside JSON string literals (models wrap long reasons) become
// single spaces so a strict parser accepts the block.
std::string sanitize_multiline_strings(const std::string& block) {
  std::string out;
  bool in_string = false;
  bool escape = false;
  for (size_t i = 0; i < block.size(); ++i) {
    char c = block[i];
    if (in_string && !escape && (c == '\n' || c == '\r')) {
      out += ' ';
      while (i + 1 < block.size() &&
             (block[i + 1] == ' ' || block[i + 1] == '\t' || block[i + 1] == '\n' ||
              block[i + 1] == '\r'))
        ++i;
      continue;
    }
    out += c;
    if (escape) {
      escape = false;
    } else if (c == '\\') {
      escape = in_string;
    } else if (c == '"') {
      in_string = !in_string;
    }
  }
  return out;
}

std::optional<nlohmann::json> try_parse_object(const std::string& block) {
  nlohmann::json j = nlohmann::json::parse(sanitize_multiline_strings(block), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

std::optional<nlohmann::json> extract_last_json(const std::string& text) {
  std::optional<nlohmann::json> found;

  // Fenced blocks first: content between ``` pairs, optional "json" tag.
  size_t pos = 0;
  while (true) {
    size_t open = text.find("```", pos);
    if (open == std::string::npos) break;
    size_t body = open + 3;
    size_t close = text.find("```", body);
    if (close == std::string::npos) break;
    std::string block = text.substr(body, close - body);
    size_t eol = block.find('\n');
    if (eol != std::string::npos) {
      std::string tag = block.substr(0, eol);
      while (!tag.empty() && (tag.back() == ' ' || tag.back() == '\r')) tag.pop_back();
      if (tag == "json" || tag == "JSON") block = block.substr(eol + 1);
    }
    if (auto j = try_parse_object(block)) found = std::move(j);
    pos = close + 3;
  }
  if (found) return found;

  // No usable fence: take the last brace-balanced object that parses.
  int depth = 0;
  bool in_string = false;
  bool escape = false;
  size_t start = std::string::npos;
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (escape) {
      escape = false;
      continue;
    }
    if (in_string) {
      if (c == '\\')
        escape = true;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      if (depth == 0) start = i;
      ++depth;
    } else if (c == '}') {
      if (depth > 0 && --depth == 0 && start != std::string::npos) {
        if (auto j = try_parse_object(text.substr(start, i - start + 1))) found = std::move(j);
        start = std::string::npos;
      }
    }
  }
  return found;
}

std::vector<std::string> string_array(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array())
    throw AgentError(AgentError::Code::missing_field,
                     std::string(key) + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& v : j[key]) {
    if (!v.is_string())
      throw AgentError(AgentError::Code::missing_field,
                       std::string(key) + " must be an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::set<std::string> seasonal_tags(const Date& date) {
  std::string weekday = date.weekday_name();
  for (char& c : weekday) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return {weekday, date.is_weekend() ? "weekend" : "weekday"};
}

bool looks_first_person(const std::string& text, const Persona& persona) {
  static const std::set<std::string> kPronouns = {"i", "me", "my", "mine", "myself", "im"};
  std::set<std::string> trait_words;
  for (const std::string& t : persona.traits)
    for (const std::string& w : lower_words(t))
      if (w != "high" && w != "low" && w != "and") trait_words.insert(w);
  for (const std::string& w : lower_words(text))
    if (kPronouns.count(w) || trait_words.count(w)) return true;
  return false;
}

Prompt reflection_prompt(const Persona& persona, const Date& date,
                         const std::vector<memory::ShortTermEvent>& events) {
  Prompt pr;
  pr.system = system_prompt_for(persona);
  std::string u = "# Reflection\n\n- Date: ";
  u += date.weekday_name();
  u += " " + date.to_iso() + " (" + (date.is_weekend() ? "weekend" : "weekday") + ")\n\n";
  u += "Review today's travel events and turn them into lasting memories.\n\n";
  u += "# Today's Events\n\n";
  for (const auto& ev : events) u += "- " + format_hm(ev.sim_time) + " " + ev.text + "\n";
  u +=
      "\n# Instructions\n\n"
      "Write two lists:\n"
      "- concepts: objective facts about routes, stops, waits and delays. No\n"
      "personal pronouns, no personality language; facts anyone could state.\n"
      "- reflections: your own conclusions and preferences as this persona.\n"
      "Mention the day of week, whether it was a weekday or weekend, and the\n"
      "time of day, whenever they matter.\n"
      "\n"
      "# OUTPUT format:\n"
      "```json\n"
      "    {\n"
      "        \"concepts\": [\"CONTENT\"],\n"
      "        \"reflections\": [\"CONTENT\"]\n"
      "    }\n"
      "```";
  pr.user = u;
  return pr;
}

Prompt abstraction_prompt(const Persona& persona, const Date& start, const Date& end,
                          const std::vector<std::string>& reflections) {
  Prompt pr;
  pr.system = system_prompt_for(persona);
  std::string u = "# Abstraction\n\n- Window: " + start.to_iso() + ".." + end.to_iso() + "\n\n";
  u += "Generalize your recent reflections into at most three broader insights.\n\n";
  u += "# Recent Reflections\n\n";
  for (const std::string& r : reflections) u += "- " + r + "\n";
  u +=
      "\n# OUTPUT format:\n"
      "```json\n"
      "    {\n"
      "        \"abstractions\": [\"CONTENT\"]\n"
      "    }\n"
      "```";
  pr.user = u;
  return pr;
}

// Ask, and on a malformed answer ask once more with a pointed reminder.
nlohmann::json complete_json(LlmClient& client, const Prompt& prompt, const char* reminder) {
  LlmRequest req{prompt.system, prompt.user, 0.0, std::nullopt};
  LlmResponse first = client.complete(req);
  if (auto j = extract_last_json(first.text)) return *j;
  LlmRequest retry{prompt.system, prompt.user + "\n\n" + reminder, 0.0, std::nullopt};
  LlmResponse second = client.complete(retry);
  if (auto j = extract_last_json(second.text)) return *j;
  throw AgentError(AgentError::Code::no_json_found, "no JSON found after retry");
}

}  // namespace

const char* purpose_name(Purpose p) {
  switch (p) {
    case Purpose::work:
      return "work";
    case Purpose::home:
      return "home";
    case Purpose::leisure:
      return "leisure";
    case Purpose::school:
      return "school";
    case Purpose::shopping:
      return "shopping";
    case Purpose::other:
      return "other";
  }
  return "other";
}

Purpose purpose_from_name(const std::string& name) {
  if (name == "work") return Purpose::work;
  if (name == "home") return Purpose::home;
  if (name == "leisure") return Purpose::leisure;
  if (name == "school") return Purpose::school;
  if (name == "shopping") return Purpose::shopping;
  if (name == "other") return Purpose::other;
  throw AgentError(AgentError::Code::bad_persona, "unknown purpose: " + name);
}

Persona parse_persona(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
  if (j.is_discarded())
    throw AgentError(AgentError::Code::bad_persona, "persona is not valid JSON");
  return persona_from_json(j);
}

std::vector<Persona> load_personas(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AgentError(AgentError::Code::bad_persona, "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j = nlohmann::json::parse(buf.str(), nullptr, false);
  if (j.is_discarded())
    throw AgentError(AgentError::Code::bad_persona, path + " is not valid JSON");
  if (j.is_object() && j.contains("personas")) j = j["personas"];
  if (!j.is_array())
    throw AgentError(AgentError::Code::bad_persona, path + " must hold an array of personas");
  std::vector<Persona> out;
  std::set<std::string> ids;
  for (const auto& item : j) {
    Persona p = persona_from_json(item);
    if (!ids.insert(p.id).second)
      throw AgentError(AgentError::Code::bad_persona, "duplicate persona id " + p.id);
    out.push_back(std::move(p));
  }
  if (out.empty()) throw AgentError(AgentError::Code::bad_persona, path + " holds no personas");
  return out;
}

GeoPoint start_position(const Persona& p) {
  for (auto it = p.activities.rbegin(); it != p.activities.rend(); ++it)
    if (it->purpose == Purpose::home) return it->location;
  return p.activities.back().location;
}

DaySchedule schedule_day(const Persona& p, const std::vector<TravelRecord>& history,
                         const Date& date, const ScheduleParams& params) {
  std::vector<Sec> dep(p.activities.size());
  for (size_t a = 0; a < dep.size(); ++a) dep[a] = p.activities[a].planned_time;

  std::set<Date> past_days;
  for (const TravelRecord& r : history)
    if (r.agent_id == p.id && r.date < date) past_days.insert(r.date);

  for (const Date& d : past_days) {
    for (size_t a = 0; a < p.activities.size(); ++a) {
      double sum = 0;
      int n = 0;
      for (const TravelRecord& r : history) {
        if (r.agent_id != p.id || r.activity_index != static_cast<int>(a)) continue;
        if (!r.realized_arrival) continue;
        int gap = d.days_since(r.date);
        if (gap < 0 || gap >= params.window_days) continue;
        sum += static_cast<double>(*r.realized_arrival - r.planned_arrival);
        ++n;
      }
      if (n == 0) continue;
      Sec shift = static_cast<Sec>(std::llround(sum / n));
      Sec planned = p.activities[a].planned_time;
      dep[a] = std::clamp(dep[a] - shift, planned - params.max_shift, planned);
    }
  }

  DaySchedule sched;
  sched.agent_id = p.id;
  sched.date = date;
  for (size_t a = 0; a < p.activities.size(); ++a)
    sched.entries.push_back({p.activities[a], dep[a]});
  std::stable_sort(sched.entries.begin(), sched.entries.end(),
                   [](const DayScheduleEntry& x, const DayScheduleEntry& y) {
                     return x.adjusted_departure < y.adjusted_departure;
                   });
  return sched;
}

std::string system_prompt_for(const Persona& persona) {
  std::string s = kAgentSpec;
  s += "\n# Persona\n\n";
  s += "- Id: " + persona.id + "\n";
  s += "- Age: " + std::to_string(persona.age) + "\n";
  s += "- Job: " + persona.job + "\n";
  s += "- Description: " + persona.description + "\n";
  s += "- Traits: " + join(persona.traits, ", ") + "\n";
  return s;
}

Prompt build_prompt(const Activity& activity, const Persona& persona, int trip_index,
                    int trips_today, const Date& date, Sec desired_departure,
                    const std::vector<memory::ScoredEntry>& memories,
                    const std::vector<std::string>& rendered_options) {
  if (rendered_options.empty())
    throw AgentError(AgentError::Code::empty_options, "no travel options to offer");

  Prompt pr;
  pr.system = system_prompt_for(persona);

  std::vector<const memory::MemoryEntry*> newest_first;
  for (const memory::ScoredEntry& s : memories) newest_first.push_back(s.entry);
  std::stable_sort(newest_first.begin(), newest_first.end(),
                   [](const memory::MemoryEntry* a, const memory::MemoryEntry* b) {
                     if (!(a->created_day == b->created_day)) return b->created_day < a->created_day;
                     return a->id > b->id;
                   });

  std::string u = "# Travel Requirements\n\n";
  u += std::string("- Date: ") + date.weekday_name() + " " + date.to_iso() + "\n";
  u += "- Trip: " + std::to_string(trip_index + 1) + " of " + std::to_string(trips_today) +
       " today\n";
  u += std::string("- Purpose: ") + purpose_name(activity.purpose) + "\n";
  u += "- Desired departure time: " + format_hm(desired_departure) + "\n\n";

  u += "# Travel Experiences\n\n";
  if (newest_first.empty()) {
    u += "None yet.\n";
  } else {
    for (const memory::MemoryEntry* e : newest_first) u += "- " + e->text + "\n";
  }
  u += "\n# Travel Options\n\n";
  for (size_t i = 0; i < rendered_options.size(); ++i)
    u += "Option " + std::to_string(i + 1) + ":\n" + rendered_options[i] + "\n\n";
  u += kAnalysisFramework;
  pr.user = u;
  return pr;
}

Decision parse_decision(const std::string& text, int n_options) {
  auto obj = extract_last_json(text);
  if (!obj)
    throw AgentError(AgentError::Code::no_json_found, "no JSON decision found in response");
  const nlohmann::json& j = *obj;
  if (!j.contains("chosen_plan") || !j["chosen_plan"].is_number_integer())
    throw AgentError(AgentError::Code::missing_field, "chosen_plan must be an integer");
  if (!j.contains("reason") || !j["reason"].is_string())
    throw AgentError(AgentError::Code::missing_field, "reason must be a string");
  int idx = j["chosen_plan"].get<int>();
  if (idx < 1 || idx > n_options)
    throw AgentError(AgentError::Code::index_out_of_range,
                     "chosen_plan " + std::to_string(idx) + " outside 1.." +
                         std::to_string(n_options));
  Decision d;
  d.chosen_plan = idx;
  d.reason = j["reason"].get<std::string>();
  d.raw_response = text;
  return d;
}

long long approx_tokens(const std::string& text) {
  long long count = 0;
  bool in_word = false;
  for (char c : text) {
    bool space = std::isspace(static_cast<unsigned char>(c));
    if (!space && !in_word) ++count;
    in_word = !space;
  }
  return count;
}

LlmResponse ScriptedLlm::complete(const LlmRequest& req) {
  if (next_ >= responses_.size())
    throw AgentError(AgentError::Code::llm_unavailable, "scripted responses exhausted");
  LlmResponse r;
  r.text = responses_[next_++];
  r.prompt_tokens = approx_tokens(req.system) + approx_tokens(req.user);
  r.response_tokens = approx_tokens(r.text);
  return r;
}

HttpLlm::HttpLlm(std::string host, int port, std::string path, std::string api_key)
    : host_(std::move(host)), port_(port), path_(std::move(path)), api_key_(std::move(api_key)) {}

LlmResponse HttpLlm::complete(const LlmRequest& req) {
  httplib::Client client(host_, port_);
  client.set_connection_timeout(10);
  client.set_read_timeout(120);
  nlohmann::json body;
  body["system"] = req.system;
  body["user"] = req.user;
  body["temperature"] = req.temperature;
  if (req.seed) body["seed"] = *req.seed;
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto t0 = std::chrono::steady_clock::now();
  auto res = client.Post(path_.c_str(), headers, body.dump(), "application/json");
  auto t1 = std::chrono::steady_clock::now();
  if (!res || res->status != 200)
    throw AgentError(AgentError::Code::llm_unavailable,
                     "completion service " + host_ + ":" + std::to_string(port_) +
                         (res ? " returned status " + std::to_string(res->status)
                              : " is unreachable"));
  nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("text") || !j["text"].is_string())
    throw AgentError(AgentError::Code::llm_unavailable,
                     "completion service returned malformed JSON");
  LlmResponse out;
  out.text = j["text"].get<std::string>();
  out.prompt_tokens = j.value("prompt_tokens", approx_tokens(req.system) + approx_tokens(req.user));
  out.response_tokens = j.value("response_tokens", approx_tokens(out.text));
  out.latency_ms =
      std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(t1 - t0).count();
  return out;
}

Decision decide(LlmClient& client, const Prompt& prompt, int n_options) {
  if (n_options < 1)
    throw AgentError(AgentError::Code::empty_options, "cannot decide without options");

  LlmRequest req{prompt.system, prompt.user, 0.0, std::nullopt};
  LlmResponse first = client.complete(req);
  long long pt = first.prompt_tokens;
  long long rt = first.response_tokens;
  double lat = first.latency_ms;
  try {
    Decision d = parse_decision(first.text, n_options);
    d.prompt_tokens = pt;
    d.response_tokens = rt;
    d.latency_ms = lat;
    d.llm_calls = 1;
    return d;
  } catch (const AgentError&) {
  }

  LlmRequest retry{prompt.system,
                   prompt.user +
                       "\n\nYour previous answer could not be parsed. Answer again and end with "
                       "Step 2 exactly as specified: a fenced JSON object holding an integer "
                       "\"chosen_plan\" between 1 and " +
                       std::to_string(n_options) + " and a string \"reason\".",
                   0.0, std::nullopt};
  LlmResponse second = client.complete(retry);
  pt += second.prompt_tokens;
  rt += second.response_tokens;
  lat += second.latency_ms;
  try {
    Decision d = parse_decision(second.text, n_options);
    d.prompt_tokens = pt;
    d.response_tokens = rt;
    d.latency_ms = lat;
    d.llm_calls = 2;
    return d;
  } catch (const AgentError&) {
  }

  Decision d;
  d.chosen_plan = 1;
  d.reason = "fallback: unparsable response";
  d.raw_response = second.text;
  d.fallback = true;
  d.prompt_tokens = pt;
  d.response_tokens = rt;
  d.latency_ms = lat;
  d.llm_calls = 2;
  return d;
}

std::vector<const memory::MemoryEntry*> reflect_daily(
    const Persona& persona, const Date& date,
    const std::vector<memory::ShortTermEvent>& window_events, LlmClient& client,
    memory::Embedder& embedder, memory::MemoryStore& store) {
  if (window_events.empty()) return {};

  Prompt prompt = reflection_prompt(persona, date, window_events);
  nlohmann::json j = complete_json(
      client, prompt,
      "Your previous answer could not be parsed. Answer again with only the fenced JSON object "
      "holding the \"concepts\" and \"reflections\" string arrays.");
  std::vector<std::string> concepts = string_array(j, "concepts");
  std::vector<std::string> reflections = string_array(j, "reflections");

  std::set<std::string> tags = seasonal_tags(date);
  std::vector<const memory::MemoryEntry*> added;
  for (const std::string& text : concepts) {
    if (text.empty()) continue;
    auto kind = looks_first_person(text, persona) ? memory::MemoryEntry::Kind::Reflection
                                                  : memory::MemoryEntry::Kind::Concept;
    added.push_back(&store.add(persona.id, kind, text, embedder.embed(text), date, tags));
  }
  for (const std::string& text : reflections) {
    if (text.empty()) continue;
    added.push_back(&store.add(persona.id, memory::MemoryEntry::Kind::Reflection, text,
                               embedder.embed(text), date, tags));
  }
  return added;
}

std::vector<const memory::MemoryEntry*> abstract_reflections(
    const Persona& persona, const Date& window_end, int window_days, LlmClient& client,
    memory::Embedder& embedder, memory::MemoryStore& store) {
  Date window_start = window_end.plus_days(-(window_days - 1));
  std::vector<std::string> sources;
  for (const memory::MemoryEntry* e : store.entries(persona.id)) {
    if (e->kind != memory::MemoryEntry::Kind::Reflection) continue;
    int gap = window_end.days_since(e->created_day);
    if (gap < 0 || gap >= window_days) continue;
    sources.push_back(e->text);
  }
  if (sources.empty()) return {};

  Prompt prompt = abstraction_prompt(persona, window_start, window_end, sources);
  nlohmann::json j = complete_json(
      client, prompt,
      "Your previous answer could not be parsed. Answer again with only the fenced JSON object "
      "holding the \"abstractions\" string array.");
  std::vector<std::string> texts = string_array(j, "abstractions");
  if (texts.size() > 3) texts.resize(3);

  std::set<std::string> tags = seasonal_tags(window_end);
  tags.insert("window:" + window_start.to_iso() + ".." + window_end.to_iso());
  std::vector<const memory::MemoryEntry*> added;
  for (const std::string& text : texts) {
    if (text.empty()) continue;
    added.push_back(&store.add(persona.id, memory::MemoryEntry::Kind::Abstraction, text,
                               embedder.embed(text), window_end, tags));
  }
  return added;
}

std::vector<memory::ShortTermEvent> derive_events(
    const std::string& agent_id, const Date& date, const planner::Itinerary& plan,
    Purpose purpose, Sec expected_arrival,
    const std::vector<kernel::PerceptionEvent>& journey_events) {
  // Planned wait before each transit leg: boarding time minus when the agent
  // finishes the previous movement.
  std::vector<std::pair<const planner::Leg*, Sec>> rides;
  Sec ready_at = plan.depart;
  for (const planner::Leg& leg : plan.legs) {
    if (leg.kind == planner::Leg::Kind::transit) rides.push_back({&leg, leg.start - ready_at});
    ready_at = leg.end;
  }

  std::vector<memory::ShortTermEvent> out;
  // Conclusions are drawn once the journey is over, so they are stamped at
  // its final moment; the texts still name the period they happened in.
  Sec stamp = journey_events.empty() ? 0 : journey_events.back().sim_time;
  size_t ride_idx = 0;
  for (const kernel::PerceptionEvent& ev : journey_events) {
    if (ev.kind == kernel::EventKind::waited_for_vehicle && ride_idx < rides.size()) {
      const auto& [leg, planned_wait] = rides[ride_idx++];
      Sec over = ev.wait_seconds - planned_wait;
      if (over >= 60) {
        memory::ShortTermEvent d;
        d.agent_id = agent_id;
        d.date = date;
        d.sim_time = stamp;
        d.kind = "delay";
        d.text = "route " + leg->route_short_name + " was " +
                 std::to_string(whole_minutes(over)) + " minutes late in the " +
                 period_of_day(ev.sim_time);
        nlohmann::json payload;
        payload["route"] = leg->route_short_name;
        payload["late_seconds"] = over;
        d.payload_json = payload.dump();
        out.push_back(std::move(d));
      }
    } else if (ev.kind == kernel::EventKind::arrived) {
      memory::ShortTermEvent d;
      d.agent_id = agent_id;
      d.date = date;
      d.sim_time = stamp;
      d.kind = "arrival-late";
      nlohmann::json payload;
      if (ev.stranded) {
        d.text = std::string("gave up and never arrived for ") + purpose_name(purpose) +
                 " in the " + period_of_day(ev.sim_time);
        payload["stranded"] = true;
        d.payload_json = payload.dump();
        out.push_back(std::move(d));
      } else {
        Sec diff = ev.arrival_time - expected_arrival;
        if (diff >= 60 || diff <= -60) {
          d.text = "arrived " + std::to_string(whole_minutes(diff)) + " minutes " +
                   (diff > 0 ? "late" : "early") + " for " + purpose_name(purpose) + " in the " +
                   period_of_day(ev.sim_time);
          payload["late_seconds"] = diff;
          d.payload_json = payload.dump();
          out.push_back(std::move(d));
        }
      }
    }
  }
  return out;
}

void write_decisions_csv(std::ostream& out, const std::vector<DecisionRecord>& rows) {
  out << "agent_id,date,activity_index,purpose,route_signature,chosen_index,options_offered,"
         "fallback,reason,prompt_tokens,response_tokens,llm_calls,latency_ms\n";
  char lat[32];
  for (const DecisionRecord& r : rows) {
    std::snprintf(lat, sizeof lat, "%.3f", r.latency_ms);
    out << csv::quote(r.agent_id) << ',' << r.date.to_iso() << ',' << r.activity_index << ','
        << purpose_name(r.purpose) << ',' << csv::quote(join(r.route_signature, "|")) << ','
        << r.chosen_index << ',' << r.options_offered << ',' << (r.fallback ? "true" : "false")
        << ',' << csv::quote(r.reason) << ',' << r.prompt_tokens << ',' << r.response_tokens
        << ',' << r.llm_calls << ',' << lat << '\n';
  }
}

void write_travel_records_csv(std::ostream& out, const std::vector<TravelRecord>& rows) {
  out << "agent_id,date,activity_index,purpose,route_signature,adjusted_departure,"
         "planned_arrival,predicted_arrival,realized_arrival,stranded,options_offered,"
         "chosen_index\n";
  for (const TravelRecord& r : rows) {
    out << csv::quote(r.agent_id) << ',' << r.date.to_iso() << ',' << r.activity_index << ','
        << purpose_name(r.purpose) << ',' << csv::quote(join(r.route_signature, "|")) << ','
        << r.adjusted_departure << ',' << r.planned_arrival << ',' << r.predicted_arrival << ',';
    if (r.realized_arrival) out << *r.realized_arrival;
    out << ',' << (r.stranded ? "true" : "false") << ',' << r.options_offered << ','
        << r.chosen_index << '\n';
  }
}

std::vector<TravelRecord> read_travel_records_csv(const std::string& content) {
  csv::Table table = csv::parse(content);
  const char* required[] = {"agent_id",        "date",           "activity_index",
                            "purpose",         "route_signature", "adjusted_departure",
                            "planned_arrival", "predicted_arrival", "realized_arrival",
                            "stranded",        "options_offered", "chosen_index"};
  for (const char* col : required)
    if (!table.has_column(col))
      throw AgentError(AgentError::Code::bad_record,
                       std::string("travel records missing column ") + col);
  auto to_int = [](const std::string& s, const char* what) -> long long {
    try {
      size_t used = 0;
      long long v = std::stoll(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw AgentError(AgentError::Code::bad_record,
                       std::string("bad ") + what + " value: " + s);
    }
  };
  std::vector<TravelRecord> out;
  for (size_t i = 0; i < table.row_count(); ++i) {
    TravelRecord r;
    r.agent_id = table.get(i, "agent_id");
    try {
      r.date = Date::from_iso(table.get(i, "date"));
    } catch (const std::exception&) {
      throw AgentError(AgentError::Code::bad_record, "bad date: " + table.get(i, "date"));
    }
    r.activity_index = static_cast<int>(to_int(table.get(i, "activity_index"), "activity_index"));
    r.purpose = purpose_from_name(table.get(i, "purpose"));
    const std::string& sig = table.get(i, "route_signature");
    if (!sig.empty()) r.route_signature = split(sig, '|');
    r.adjusted_departure = to_int(table.get(i, "adjusted_departure"), "adjusted_departure");
    r.planned_arrival = to_int(table.get(i, "planned_arrival"), "planned_arrival");
    r.predicted_arrival = to_int(table.get(i, "predicted_arrival"), "predicted_arrival");
    const std::string& realized = table.get(i, "realized_arrival");
    if (!realized.empty()) r.realized_arrival = to_int(realized, "realized_arrival");
    const std::string& stranded = table.get(i, "stranded");
    if (stranded != "true" && stranded != "false")
      throw AgentError(AgentError::Code::bad_record, "bad stranded value: " + stranded);
    r.stranded = stranded == "true";
    r.options_offered = static_cast<int>(to_int(table.get(i, "options_offered"), "options_offered"));
    r.chosen_index = static_cast<int>(to_int(table.get(i, "chosen_index"), "chosen_index"));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace mobsim::agent
