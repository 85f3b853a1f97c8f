#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mobsim/agent/agent.hpp"

// Offline policy clients. Each one reads the prompt text the way an external
// model would (no side channel into simulator state) and answers in the same
// shape, so everything downstream of LlmClient::complete is exercised
// identically whether the decisions come from here or from a real service.

namespace mobsim::agent {

namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

std::string line_value(const std::vector<std::string>& lines, const std::string& prefix) {
  for (const std::string& line : lines)
    if (starts_with(line, prefix)) return line.substr(prefix.size());
  return "";
}

std::vector<std::string> lower_tokens(const std::string& s) {
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

bool all_digits(const std::string& s) {
  return !s.empty() && s.find_first_not_of("0123456789") == std::string::npos;
}

struct ParsedOption {
  std::vector<std::string> signature;  // transit names in ride order
  long long wait_minutes = 0;
};

struct ParsedPrompt {
  std::string agent_id;
  Date date;
  int trip_index = 1;  // 1-based, from "Trip: k of n"
  std::string purpose;
  std::vector<std::string> experiences;
  std::vector<ParsedOption> options;
};

// Pulls the fields the policies care about back out of a decision prompt.
ParsedPrompt parse_prompt(const LlmRequest& req) {
  ParsedPrompt p;
  std::vector<std::string> sys_lines = split_lines(req.system);
  p.agent_id = line_value(sys_lines, "- Id: ");

  std::vector<std::string> lines = split_lines(req.user);
  std::string date_line = line_value(lines, "- Date: ");
  size_t sp = date_line.rfind(' ');
  if (sp != std::string::npos) p.date = Date::from_iso(date_line.substr(sp + 1));
  std::string trip_line = line_value(lines, "- Trip: ");
  if (!trip_line.empty()) p.trip_index = std::atoi(trip_line.c_str());
  p.purpose = line_value(lines, "- Purpose: ");

  enum class Section { none, experiences, options } section = Section::none;
  for (const std::string& line : lines) {
    if (line == "# Travel Experiences") {
      section = Section::experiences;
      continue;
    }
    if (line == "# Travel Options") {
      section = Section::options;
      continue;
    }
    if (starts_with(line, "## Decision Criteria")) break;

    if (section == Section::experiences) {
      if (starts_with(line, "- ")) p.experiences.push_back(line.substr(2));
    } else if (section == Section::options) {
      if (starts_with(line, "Option ") && line.back() == ':') {
        p.options.emplace_back();
      } else if (!p.options.empty()) {
        ParsedOption& opt = p.options.back();
        if (starts_with(line, "- ")) {
          size_t from = line.find(" from '");
          if (from != std::string::npos) {
            std::string head = line.substr(2, from - 2);  // e.g. "Bus 36"
            size_t mode_end = head.find(' ');
            if (mode_end != std::string::npos) opt.signature.push_back(head.substr(mode_end + 1));
          }
        } else if (starts_with(line, "Expected starting in ")) {
          opt.wait_minutes = std::atoll(line.c_str() + std::string("Expected starting in ").size());
        }
      }
    }
  }
  return p;
}

LlmResponse shaped_response(const LlmRequest& req, const ParsedPrompt& p, int chosen,
                            const std::string& reason) {
  std::string text = "Step 1: Brief Analysis of each option\n";
  for (size_t i = 0; i < p.options.size(); ++i) {
    text += "- Option " + std::to_string(i + 1) + ": ";
    if (static_cast<int>(i) + 1 == chosen) {
      text += "Preferred; " + reason + ".\n";
    } else {
      text += "Considered and set aside.\n";
    }
  }
  nlohmann::json decision;
  decision["chosen_plan"] = chosen;
  decision["reason"] = reason;
  text += "*******\nStep 2: Final Decision, this is in JSON format\n```json\n" +
          decision.dump(4) + "\n```";

  LlmResponse r;
  r.text = std::move(text);
  r.prompt_tokens = approx_tokens(req.system) + approx_tokens(req.user);
  r.response_tokens = approx_tokens(r.text);
  return r;
}

LlmResponse json_response(const LlmRequest& req, const nlohmann::json& body,
                          const std::string& lead) {
  LlmResponse r;
  r.text = lead + "\n```json\n" + body.dump(4) + "\n```";
  r.prompt_tokens = approx_tokens(req.system) + approx_tokens(req.user);
  r.response_tokens = approx_tokens(r.text);
  return r;
}

// Rule-based consolidation: read the day's event bullets and write concept
// and reflection sentences whose wording the retrieval policy later parses.
LlmResponse rule_based_reflection(const LlmRequest& req) {
  std::vector<std::string> lines = split_lines(req.user);
  std::string date_line = line_value(lines, "- Date: ");
  std::string weekday = date_line.substr(0, date_line.find(' '));
  if (weekday.empty()) weekday = "day";

  // Event bullets look like "- 08:07 route 36 was 7 minutes late in the morning".
  struct DelayFact {
    long long minutes = 0;
    std::string period;
  };
  std::map<std::string, DelayFact> delays;
  std::vector<std::pair<std::string, std::string>> late_purposes;  // purpose, period
  bool in_events = false;
  for (const std::string& line : lines) {
    if (line == "# Today's Events") {
      in_events = true;
      continue;
    }
    if (in_events && starts_with(line, "# ")) break;
    if (!in_events || !starts_with(line, "- ")) continue;
    std::vector<std::string> toks = lower_tokens(line);
    for (size_t i = 0; i + 1 < toks.size(); ++i) {
      if (toks[i] == "route") {
        std::string name = toks[i + 1];
        for (size_t j = i + 2; j + 2 < toks.size() && j < i + 10; ++j) {
          if (all_digits(toks[j]) && toks[j + 1] == "minutes" && toks[j + 2] == "late") {
            DelayFact& f = delays[name];
            long long m = std::atoll(toks[j].c_str());
            if (m > f.minutes) {
              f.minutes = m;
              f.period = toks.back();  // events end "...in the {period}"
            }
            break;
          }
        }
      }
      if (toks[i] == "for" && i >= 2 && toks[i - 1] == "late") {
        late_purposes.emplace_back(toks[i + 1], toks.back());
      }
      if (toks[i] == "never" && i + 4 < toks.size() && toks[i + 1] == "arrived") {
        late_purposes.emplace_back(toks[i + 3], toks.back());
      }
    }
  }

  std::vector<std::string> concepts;
  std::vector<std::string> reflections;
  for (const auto& [name, fact] : delays)
    concepts.push_back("route " + name + " ran about " + std::to_string(fact.minutes) +
                       " minutes late in the " + fact.period + " on a " + weekday);
  for (const auto& [purpose, period] : late_purposes) {
    if (delays.empty()) {
      reflections.push_back("I should leave earlier for " + purpose + " trips in the " + period);
    } else {
      for (const auto& [name, fact] : delays)
        reflections.push_back("I should avoid route " + name + " for " + purpose +
                              " trips in the " + period);
    }
  }
  if (delays.empty() && late_purposes.empty()) {
    concepts.push_back("trips ran on schedule on " + weekday);
    reflections.push_back("my usual routes are working; I will keep my current habits");
  }
  std::sort(reflections.begin(), reflections.end());
  reflections.erase(std::unique(reflections.begin(), reflections.end()), reflections.end());

  nlohmann::json body;
  body["concepts"] = concepts;
  body["reflections"] = reflections;
  return json_response(req, body, "Here is what I will remember from today.");
}

LlmResponse rule_based_abstraction(const LlmRequest& req) {
  std::vector<std::string> lines = split_lines(req.user);
  std::map<std::string, int> avoid_counts;
  bool in_sources = false;
  for (const std::string& line : lines) {
    if (line == "# Recent Reflections") {
      in_sources = true;
      continue;
    }
    if (in_sources && starts_with(line, "# ")) break;
    if (!in_sources || !starts_with(line, "- ")) continue;
    std::vector<std::string> toks = lower_tokens(line);
    for (size_t i = 0; i + 2 < toks.size(); ++i)
      if (toks[i] == "avoid" && toks[i + 1] == "route") ++avoid_counts[toks[i + 2]];
  }

  std::vector<std::pair<std::string, int>> ranked(avoid_counts.begin(), avoid_counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > 3) ranked.resize(3);

  std::vector<std::string> abstractions;
  for (const auto& [name, count] : ranked)
    abstractions.push_back("as a rule, avoid route " + name + " whenever schedules allow");
  if (abstractions.empty())
    abstractions.push_back("overall, the usual routes work; keep current habits");

  nlohmann::json body;
  body["abstractions"] = abstractions;
  return json_response(req, body, "Looking back over the window.");
}

bool is_reflection_prompt(const LlmRequest& req) {
  return starts_with(req.user, "# Reflection");
}

bool is_abstraction_prompt(const LlmRequest& req) {
  return starts_with(req.user, "# Abstraction");
}

}  // namespace

LlmResponse HabitLlm::complete(const LlmRequest& req) {
  if (is_reflection_prompt(req)) return rule_based_reflection(req);
  if (is_abstraction_prompt(req)) return rule_based_abstraction(req);

  ParsedPrompt p = parse_prompt(req);
  if (p.options.empty())
    throw AgentError(AgentError::Code::empty_options, "prompt offers no options");

  std::string key = p.agent_id + "|" + std::to_string(p.trip_index) + "|" + p.purpose;
  ActivityHabit& habit = habits_[key];
  habit.days_seen.insert(p.date);
  int day_number = static_cast<int>(habit.days_seen.size());

  int chosen = 0;
  std::string reason;
  if (day_number <= explore_days_) {
    // Try the distinct routes in turn before settling on one.
    std::vector<std::vector<std::string>> distinct;
    for (const ParsedOption& opt : p.options)
      if (std::find(distinct.begin(), distinct.end(), opt.signature) == distinct.end())
        distinct.push_back(opt.signature);
    const std::vector<std::string>& want =
        distinct[(static_cast<size_t>(day_number - 1) + seed_) % distinct.size()];
    for (size_t i = 0; i < p.options.size(); ++i)
      if (p.options[i].signature == want) {
        chosen = static_cast<int>(i) + 1;
        break;
      }
    reason = "still comparing the routes, trying this one today";
  } else {
    for (size_t i = 0; i < p.options.size(); ++i)
      if (habit.has_last && p.options[i].signature == habit.last_signature) {
        chosen = static_cast<int>(i) + 1;
        break;
      }
    reason = "this is my usual route, keeping the habit";
    if (chosen == 0) {
      long long best_wait = 0;
      for (size_t i = 0; i < p.options.size(); ++i)
        if (chosen == 0 || p.options[i].wait_minutes < best_wait) {
          chosen = static_cast<int>(i) + 1;
          best_wait = p.options[i].wait_minutes;
        }
      reason = "my usual route is gone, taking the shortest wait";
    }
  }

  habit.last_signature = p.options[chosen - 1].signature;
  habit.has_last = true;
  return shaped_response(req, p, chosen, reason);
}

LlmResponse RetrievalLlm::complete(const LlmRequest& req) {
  if (is_reflection_prompt(req)) return rule_based_reflection(req);
  if (is_abstraction_prompt(req)) return rule_based_abstraction(req);

  ParsedPrompt p = parse_prompt(req);
  if (p.options.empty())
    throw AgentError(AgentError::Code::empty_options, "prompt offers no options");

  // Worst delay minutes each route earned in the remembered experiences;
  // "avoid route X" advice counts as a minute when nothing is quantified.
  std::map<std::string, long long> penalty;
  for (const std::string& text : p.experiences) {
    std::vector<std::string> toks = lower_tokens(text);
    for (size_t i = 0; i + 1 < toks.size(); ++i) {
      if (toks[i] == "route") {
        const std::string& name = toks[i + 1];
        for (size_t j = i + 2; j + 2 < toks.size() && j < i + 10; ++j) {
          if (all_digits(toks[j]) && toks[j + 1] == "minutes" && toks[j + 2] == "late") {
            penalty[name] = std::max(penalty[name], std::atoll(toks[j].c_str()));
            break;
          }
        }
      }
      if (toks[i] == "avoid" && i + 2 < toks.size() && toks[i + 1] == "route") {
        const std::string& name = toks[i + 2];
        penalty[name] = std::max(penalty[name], 1LL);
      }
    }
  }

  if (penalty.empty())
    return shaped_response(req, p, 1, "memory: no recorded delays, taking the first option");

  int chosen = 1;
  long long best = -1;
  for (size_t i = 0; i < p.options.size(); ++i) {
    long long cost = 0;
    for (const std::string& name : p.options[i].signature) {
      std::string folded;
      for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c)))
          folded += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
      auto it = penalty.find(folded);
      if (it != penalty.end()) cost += it->second;
    }
    if (best < 0 || cost < best) {
      best = cost;
      chosen = static_cast<int>(i) + 1;
    }
  }
  return shaped_response(req, p, chosen, "memory: picking the least delayed route");
}

}  // namespace mobsim::agent
