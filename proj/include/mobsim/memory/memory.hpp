#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mobsim/core/time.hpp"
#include "mobsim/kernel/kernel.hpp"

namespace mobsim::memory {

struct MemoryError : std::runtime_error {
  enum class Code {
    dimension_mismatch,
    zero_vector,
    future_memory,
    out_of_order_event,
    embedder_unavailable,
    bad_record,
  };
  Code code;
  MemoryError(Code c, const std::string& what) : std::runtime_error(what), code(c) {}
};

// One perceived or derived happening, kept verbatim for the day it occurred.
struct ShortTermEvent {
  std::string agent_id;
  Date date;
  Sec sim_time = 0;
  std::string kind;  // WAITED_FOR_VEHICLE, TRANSIT_DURATION, ARRIVED, delay, arrival-late
  std::string text;
  std::string payload_json;
  bool operator==(const ShortTermEvent&) const = default;
};

// Chronological per-agent stream; append-only, cleared wholesale when an
// agent consolidates its day.
class ShortTermStream {
 public:
  void append(ShortTermEvent ev);
  std::vector<ShortTermEvent> day(const std::string& agent_id, const Date& date) const;
  std::vector<ShortTermEvent> all(const std::string& agent_id) const;
  void clear_agent(const std::string& agent_id);

 private:
  std::map<std::string, std::vector<ShortTermEvent>> events_;
};

// Turn a kernel observation into a dated event with readable text. The
// expected arrival (same clock as the event) supplies the late/early minutes
// in arrival texts; it is ignored for waits and rides.
ShortTermEvent render_perception(const kernel::PerceptionEvent& ev, Sec expected_arrival);

struct MemoryEntry {
  long long id = 0;
  std::string agent_id;
  enum class Kind { Concept, Reflection, Abstraction } kind = Kind::Concept;
  std::string text;
  std::vector<double> embedding;  // unit norm
  Date created_day;
  std::set<std::string> tags;
};

const char* memory_kind_name(MemoryEntry::Kind kind);
MemoryEntry::Kind memory_kind_from_name(const std::string& name);

struct RetrievalWeights {
  double alpha = 0.3;   // semantic component
  double beta = 0.3;    // text-overlap component
  double gamma = 0.4;   // recency component
  double lambda = 0.95; // daily decay
  int k = 6;
  int prefilter = 50;   // nearest neighbors scored in full; <=0 disables
  enum class Normalization { min_max, z_score } normalization = Normalization::min_max;
};

struct Query {
  std::string text;
  std::vector<double> embedding;
  Date now;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(const std::string& text) = 0;
  virtual size_t dimension() const = 0;
};

// Deterministic offline embedder: hashed unigrams (weight 1) and bigrams
// (weight 0.5) signed into a fixed-size vector, then L2-normalized.
class HashNgramEmbedder : public Embedder {
 public:
  explicit HashNgramEmbedder(size_t dimension = 64) : dim_(dimension) {}
  std::vector<double> embed(const std::string& text) override;
  size_t dimension() const override { return dim_; }

 private:
  size_t dim_;
};

// Client for an embedding service: POST {"text": ...} to `path`, expect
// {"embedding": [...]} of the configured dimension. Responses are
// re-normalized so the unit-norm contract holds regardless of the server.
class HttpEmbedder : public Embedder {
 public:
  HttpEmbedder(std::string host, int port, size_t dimension, std::string path = "/embed");
  std::vector<double> embed(const std::string& text) override;
  size_t dimension() const override { return dim_; }

 private:
  std::string host_;
  int port_;
  size_t dim_;
  std::string path_;
};

double semantic_score(const std::vector<double>& c, const std::vector<double>& r);
double similarity_score(const std::string& candidate, const std::string& reference);
double recency_score(const Date& created_day, const Date& now, double lambda);

// Min-max rescale to [0,1]; a constant column maps to 0.5 everywhere.
std::vector<double> min_max_normalize(const std::vector<double>& values);

struct ScoredEntry {
  const MemoryEntry* entry = nullptr;
  double overall = 0;
  double semantic = 0;  // raw component values before normalization
  double similarity = 0;
  double recency = 0;
};

class MemoryStore {
 public:
  const MemoryEntry& add(const std::string& agent_id, MemoryEntry::Kind kind,
                         const std::string& text, std::vector<double> embedding,
                         const Date& created_day, std::set<std::string> tags = {});

  // Weighted-sum ranking over the agent's entries: components are min-max
  // normalized over the candidate set, combined with the alpha/beta/gamma
  // weights, sorted descending with newer-then-lower-id tiebreaks, top k.
  std::vector<ScoredEntry> retrieve(const std::string& agent_id, const Query& q,
                                    const RetrievalWeights& w) const;

  std::vector<const MemoryEntry*> entries(const std::string& agent_id) const;
  size_t size() const { return entries_.size(); }

  void save_jsonl(const std::string& path) const;
  void save_jsonl(std::ostream& out) const;
  static MemoryStore load_jsonl(const std::string& path);

 private:
  std::deque<MemoryEntry> entries_;  // deque: entry references stay valid as the store grows
  long long next_id_ = 1;
};

}  // namespace mobsim::memory
