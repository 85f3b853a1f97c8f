#include "mobsim/memory/memory.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <httplib.h>
#include <json.hpp>

namespace mobsim::memory {

namespace {

long long whole_minutes(Sec seconds) {
  if (seconds < 0) return 0;
  return (seconds + 30) / 60;
}

std::vector<std::string> tokenize(const std::string& s) {
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

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Clipped n-gram precision with candidate n-gram total as the denominator.
double ngram_precision(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                       size_t n) {
  if (cand.size() < n) return 0.0;
  std::unordered_map<std::string, int> ref_counts;
  for (size_t i = 0; i + n <= ref.size(); ++i) {
    std::string key = ref[i];
    for (size_t j = 1; j < n; ++j) key += '\x1f' + ref[i + j];
    ++ref_counts[key];
  }
  int total = 0;
  int matched = 0;
  std::unordered_map<std::string, int> used;
  for (size_t i = 0; i + n <= cand.size(); ++i) {
    std::string key = cand[i];
    for (size_t j = 1; j < n; ++j) key += '\x1f' + cand[i + j];
    ++total;
    auto it = ref_counts.find(key);
    if (it != ref_counts.end() && used[key] < it->second) {
      ++used[key];
      ++matched;
    }
  }
  return total > 0 ? static_cast<double>(matched) / static_cast<double>(total) : 0.0;
}

}  // namespace

void ShortTermStream::append(ShortTermEvent ev) {
  auto& stream = events_[ev.agent_id];
  if (!stream.empty()) {
    const ShortTermEvent& last = stream.back();
    bool earlier_day = ev.date < last.date;
    bool earlier_time = ev.date == last.date && ev.sim_time < last.sim_time;
    if (earlier_day || earlier_time)
      throw MemoryError(MemoryError::Code::out_of_order_event,
                        "event for " + ev.agent_id + " precedes the stream tail");
  }
  stream.push_back(std::move(ev));
}

std::vector<ShortTermEvent> ShortTermStream::day(const std::string& agent_id,
                                                 const Date& date) const {
  std::vector<ShortTermEvent> out;
  auto it = events_.find(agent_id);
  if (it == events_.end()) return out;
  for (const ShortTermEvent& ev : it->second)
    if (ev.date == date) out.push_back(ev);
  return out;
}

std::vector<ShortTermEvent> ShortTermStream::all(const std::string& agent_id) const {
  auto it = events_.find(agent_id);
  return it == events_.end() ? std::vector<ShortTermEvent>{} : it->second;
}

void ShortTermStream::clear_agent(const std::string& agent_id) { events_.erase(agent_id); }

ShortTermEvent render_perception(const kernel::PerceptionEvent& ev, Sec expected_arrival) {
  ShortTermEvent out;
  out.agent_id = ev.agent_id;
  out.date = ev.date;
  out.sim_time = ev.sim_time;
  out.kind = kernel::event_kind_name(ev.kind);
  out.payload_json = ev.payload_json();
  const char* period = period_of_day(ev.sim_time);
  switch (ev.kind) {
    case kernel::EventKind::waited_for_vehicle:
      out.text = "waited " + std::to_string(whole_minutes(ev.wait_seconds)) +
                 " minutes for the vehicle in the " + period;
      break;
    case kernel::EventKind::transit_duration:
      out.text = "rode route " + ev.route_short_name + " for " +
                 std::to_string(whole_minutes(ev.ride_seconds)) + " minutes in the " + period;
      break;
    case kernel::EventKind::arrived: {
      std::string what = ev.activity_id.empty() ? "the activity" : ev.activity_id;
      if (ev.stranded) {
        out.text = "gave up after waiting too long and never made it to " + what;
      } else {
        Sec diff = ev.arrival_time - expected_arrival;
        long long m = whole_minutes(diff < 0 ? -diff : diff);
        if (m == 0)
          out.text = "arrived on time for " + what;
        else if (diff > 0)
          out.text = "arrived " + std::to_string(m) + " minutes late for " + what;
        else
          out.text = "arrived " + std::to_string(m) + " minutes early for " + what;
      }
      break;
    }
  }
  return out;
}

const char* memory_kind_name(MemoryEntry::Kind kind) {
  switch (kind) {
    case MemoryEntry::Kind::Concept:
      return "concept";
    case MemoryEntry::Kind::Reflection:
      return "reflection";
    case MemoryEntry::Kind::Abstraction:
      return "abstraction";
  }
  return "";
}

MemoryEntry::Kind memory_kind_from_name(const std::string& name) {
  if (name == "concept") return MemoryEntry::Kind::Concept;
  if (name == "reflection") return MemoryEntry::Kind::Reflection;
  if (name == "abstraction") return MemoryEntry::Kind::Abstraction;
  throw MemoryError(MemoryError::Code::bad_record, "unknown memory kind: " + name);
}

std::vector<double> HashNgramEmbedder::embed(const std::string& text) {
  std::vector<std::string> toks = tokenize(text);
  std::vector<double> v(dim_, 0.0);
  auto bump = [&](const std::string& gram, double weight) {
    uint64_t h = fnv1a(gram);
    size_t slot = static_cast<size_t>(h % dim_);
    double sign = ((h / dim_) & 1) ? 1.0 : -1.0;
    v[slot] += sign * weight;
  };
  for (const std::string& t : toks) bump(t, 1.0);
  for (size_t i = 0; i + 1 < toks.size(); ++i) bump(toks[i] + '\x1f' + toks[i + 1], 0.5);
  double norm = 0;
  for (double x : v) norm += x * x;
  if (norm == 0) {
    // Degenerate text (no tokens): a fixed unit vector keeps the contract.
    v[0] = 1.0;
    return v;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

HttpEmbedder::HttpEmbedder(std::string host, int port, size_t dimension, std::string path)
    : host_(std::move(host)), port_(port), dim_(dimension), path_(std::move(path)) {}

std::vector<double> HttpEmbedder::embed(const std::string& text) {
  httplib::Client client(host_, port_);
  client.set_connection_timeout(5);
  client.set_read_timeout(30);
  nlohmann::json body{{"text", text}};
  auto res = client.Post(path_.c_str(), body.dump(), "application/json");
  if (!res || res->status != 200)
    throw MemoryError(MemoryError::Code::embedder_unavailable,
                      "embedding service " + host_ + ":" + std::to_string(port_) +
                          (res ? " returned status " + std::to_string(res->status)
                               : " is unreachable"));
  nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("embedding") ||
      !j["embedding"].is_array())
    throw MemoryError(MemoryError::Code::embedder_unavailable,
                      "embedding service returned malformed JSON");
  std::vector<double> v = j["embedding"].get<std::vector<double>>();
  if (v.size() != dim_)
    throw MemoryError(MemoryError::Code::dimension_mismatch,
                      "embedding service returned dimension " + std::to_string(v.size()));
  double norm = 0;
  for (double x : v) norm += x * x;
  if (norm == 0)
    throw MemoryError(MemoryError::Code::zero_vector, "embedding service returned a zero vector");
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

double semantic_score(const std::vector<double>& c, const std::vector<double>& r) {
  if (c.size() != r.size())
    throw MemoryError(MemoryError::Code::dimension_mismatch, "embedding dimensions differ");
  double dot = 0;
  double nc = 0;
  double nr = 0;
  for (size_t i = 0; i < c.size(); ++i) {
    dot += c[i] * r[i];
    nc += c[i] * c[i];
    nr += r[i] * r[i];
  }
  if (nc == 0 || nr == 0)
    throw MemoryError(MemoryError::Code::zero_vector, "zero-norm embedding");
  return dot / (std::sqrt(nc) * std::sqrt(nr));
}

double similarity_score(const std::string& candidate, const std::string& reference) {
  std::vector<std::string> cand = tokenize(candidate);
  std::vector<std::string> ref = tokenize(reference);
  if (cand.empty() || ref.empty()) return 0.0;
  double p1 = ngram_precision(cand, ref, 1);
  double p2 = ngram_precision(cand, ref, 2);
  if (p1 <= 0.0 || p2 <= 0.0) return 0.0;
  double brevity = 1.0;
  if (cand.size() < ref.size())
    brevity = std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(cand.size()));
  return brevity * std::sqrt(p1 * p2);
}

double recency_score(const Date& created_day, const Date& now, double lambda) {
  int days = now.days_since(created_day);
  if (days < 0)
    throw MemoryError(MemoryError::Code::future_memory, "memory created after the query date");
  return std::pow(lambda, static_cast<double>(days));
}

std::vector<double> min_max_normalize(const std::vector<double>& values) {
  std::vector<double> out = values;
  if (out.empty()) return out;
  double lo = *std::min_element(out.begin(), out.end());
  double hi = *std::max_element(out.begin(), out.end());
  for (double& x : out) x = hi > lo ? (x - lo) / (hi - lo) : 0.5;
  return out;
}

namespace {

std::vector<double> z_score_normalize(const std::vector<double>& values) {
  std::vector<double> out = values;
  if (out.empty()) return out;
  double mean = 0;
  for (double x : out) mean += x;
  mean /= static_cast<double>(out.size());
  double var = 0;
  for (double x : out) var += (x - mean) * (x - mean);
  var /= static_cast<double>(out.size());
  double sd = std::sqrt(var);
  for (double& x : out) x = sd > 0 ? (x - mean) / sd : 0.5;
  return out;
}

}  // namespace

const MemoryEntry& MemoryStore::add(const std::string& agent_id, MemoryEntry::Kind kind,
                                    const std::string& text, std::vector<double> embedding,
                                    const Date& created_day, std::set<std::string> tags) {
  if (text.empty())
    throw MemoryError(MemoryError::Code::bad_record, "memory text must be non-empty");
  double norm = 0;
  for (double x : embedding) norm += x * x;
  if (std::abs(std::sqrt(norm) - 1.0) > 1e-6)
    throw MemoryError(MemoryError::Code::bad_record, "embedding must be unit norm");
  MemoryEntry e;
  e.id = next_id_++;
  e.agent_id = agent_id;
  e.kind = kind;
  e.text = text;
  e.embedding = std::move(embedding);
  e.created_day = created_day;
  e.tags = std::move(tags);
  entries_.push_back(std::move(e));
  return entries_.back();
}

std::vector<const MemoryEntry*> MemoryStore::entries(const std::string& agent_id) const {
  std::vector<const MemoryEntry*> out;
  for (const MemoryEntry& e : entries_)
    if (e.agent_id == agent_id) out.push_back(&e);
  return out;
}

std::vector<ScoredEntry> MemoryStore::retrieve(const std::string& agent_id, const Query& q,
                                               const RetrievalWeights& w) const {
  std::vector<const MemoryEntry*> candidates = entries(agent_id);
  if (candidates.empty()) return {};

  std::vector<double> sem(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i)
    sem[i] = semantic_score(candidates[i]->embedding, q.embedding);

  // Nearest-neighbor prefilter before the full weighted scoring.
  if (w.prefilter > 0 && candidates.size() > static_cast<size_t>(w.prefilter)) {
    std::vector<size_t> order(candidates.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      if (sem[a] != sem[b]) return sem[a] > sem[b];
      return candidates[a]->id < candidates[b]->id;
    });
    order.resize(static_cast<size_t>(w.prefilter));
    std::sort(order.begin(), order.end());
    std::vector<const MemoryEntry*> kept;
    std::vector<double> kept_sem;
    for (size_t i : order) {
      kept.push_back(candidates[i]);
      kept_sem.push_back(sem[i]);
    }
    candidates = std::move(kept);
    sem = std::move(kept_sem);
  }

  std::vector<double> sim(candidates.size());
  std::vector<double> rec(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    sim[i] = similarity_score(candidates[i]->text, q.text);
    rec[i] = recency_score(candidates[i]->created_day, q.now, w.lambda);
  }

  auto normalize = w.normalization == RetrievalWeights::Normalization::min_max
                       ? min_max_normalize
                       : z_score_normalize;
  std::vector<double> nsem = normalize(sem);
  std::vector<double> nsim = normalize(sim);
  std::vector<double> nrec = normalize(rec);

  std::vector<ScoredEntry> scored(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    scored[i].entry = candidates[i];
    scored[i].semantic = sem[i];
    scored[i].similarity = sim[i];
    scored[i].recency = rec[i];
    scored[i].overall = w.alpha * nsem[i] + w.beta * nsim[i] + w.gamma * nrec[i];
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredEntry& a, const ScoredEntry& b) {
    if (a.overall != b.overall) return a.overall > b.overall;
    if (!(a.entry->created_day == b.entry->created_day))
      return b.entry->created_day < a.entry->created_day;
    return a.entry->id < b.entry->id;
  });
  if (scored.size() > static_cast<size_t>(w.k)) scored.resize(static_cast<size_t>(w.k));
  return scored;
}

void MemoryStore::save_jsonl(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MemoryError(MemoryError::Code::bad_record, "cannot write " + path);
  save_jsonl(out);
}

void MemoryStore::save_jsonl(std::ostream& out) const {
  for (const MemoryEntry& e : entries_) {
    nlohmann::json j;
    j["id"] = e.id;
    j["agent_id"] = e.agent_id;
    j["kind"] = memory_kind_name(e.kind);
    j["text"] = e.text;
    j["created_day"] = e.created_day.to_iso();
    j["tags"] = e.tags;
    j["embedding"] = e.embedding;
    out << j.dump() << '\n';
  }
}

MemoryStore MemoryStore::load_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MemoryError(MemoryError::Code::bad_record, "cannot read " + path);
  MemoryStore store;
  std::string line;
  long long max_id = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw MemoryError(MemoryError::Code::bad_record, "bad memory line: " + line);
    MemoryEntry e;
    try {
      e.id = j.at("id").get<long long>();
      e.agent_id = j.at("agent_id").get<std::string>();
      e.kind = memory_kind_from_name(j.at("kind").get<std::string>());
      e.text = j.at("text").get<std::string>();
      e.created_day = Date::from_iso(j.at("created_day").get<std::string>());
      for (const auto& t : j.at("tags")) e.tags.insert(t.get<std::string>());
      e.embedding = j.at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& ex) {
      throw MemoryError(MemoryError::Code::bad_record,
                        std::string("bad memory record: ") + ex.what());
    }
    max_id = std::max(max_id, e.id);
    store.entries_.push_back(std::move(e));
  }
  store.next_id_ = max_id + 1;
  return store;
}

}  // namespace mobsim::memory
