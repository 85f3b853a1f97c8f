#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mobsim/agent/agent.hpp"
#include "mobsim/core/geo.hpp"
#include "mobsim/core/time.hpp"
#include "mobsim/kernel/kernel.hpp"
#include "mobsim/memory/memory.hpp"
#include "mobsim/planner/planner.hpp"

namespace mobsim::bridge {

// A message that does not match the wire schema; names the offending field.
struct SchemaViolation : std::runtime_error {
  std::string field;
  std::string reason;
  SchemaViolation(std::string f, std::string r)
      : std::runtime_error("schema violation at '" + f + "': " + r),
        field(std::move(f)),
        reason(std::move(r)) {}
};

struct BridgeError : std::runtime_error {
  enum class Code { timeout, transport, bad_state };
  Code code;
  BridgeError(Code c, const std::string& what) : std::runtime_error(what), code(c) {}
};

// --- Wire messages ---------------------------------------------------------
// Everything crossing the kernel/agent boundary is canonical JSON: snake_case
// keys in alphabetical order (the encoder emits them sorted), ISO dates, and
// whole seconds for every time field. Identical structs encode to identical
// bytes, so logs and golden files stay stable.

struct IdleAgent {
  std::string agent_id;
  GeoPoint position;
  int current_activity_index = 0;  // journeys completed so far today
  bool operator==(const IdleAgent&) const = default;
};

// Kernel to server, at most once per tick: who needs instructions right now.
struct SyncRequest {
  long long tick = 0;
  Date date;
  Sec sim_time = 0;  // seconds since the date's midnight
  std::vector<IdleAgent> idle_agents;
  bool operator==(const SyncRequest&) const = default;
};

struct Assignment {
  std::string agent_id;
  std::vector<planner::Leg> legs;
};

// Server to kernel, answering one SyncRequest; each agent appears at most
// once, and an absent agent simply stays idle.
struct ActionBatch {
  long long tick = 0;  // the request tick this batch acknowledges
  std::vector<Assignment> assignments;
};

// One observation with a per-agent sequence number; numbering starts at 1
// and increases by one per event, which lets the receiver detect gaps,
// reorder, and drop duplicates.
struct PerceptionMessage {
  long long seq = 0;
  kernel::PerceptionEvent event;
};

// A typed envelope for the perception channel.
struct Frame {
  std::string type;     // "perception", "actions", "ack"
  std::string payload;  // canonical JSON text
};

std::string encode_sync_request(const SyncRequest& req);
SyncRequest decode_sync_request(const std::string& text);
std::string encode_action_batch(const ActionBatch& batch);
ActionBatch decode_action_batch(const std::string& text);
std::string encode_perception(const PerceptionMessage& msg);
PerceptionMessage decode_perception(const std::string& text);
std::string encode_frame(const Frame& frame);
Frame decode_frame(const std::string& text);

// --- Perception intake ------------------------------------------------------
// Per-agent resequencer: events reach the handler exactly once and in seq
// order no matter how the channel delivered them. A duplicate (seq already
// applied) is dropped; a gap parks later events and, when a replay hook is
// installed, asks the sender to resend from the first missing seq.
class PerceptionInbox {
 public:
  using Handler = std::function<void(const kernel::PerceptionEvent&)>;
  using ReplayHook = std::function<void(const std::string& agent_id, long long from_seq)>;

  void set_handler(Handler h) { handler_ = std::move(h); }
  void set_replay_hook(ReplayHook h) { replay_ = std::move(h); }

  void accept(const PerceptionMessage& msg);
  long long applied(const std::string& agent_id) const;  // highest contiguous seq
  size_t pending() const;                                // parked out-of-order events

 private:
  struct Lane {
    long long next = 1;
    std::map<long long, kernel::PerceptionEvent> held;
  };
  std::map<std::string, Lane> lanes_;
  Handler handler_;
  ReplayHook replay_;
};

// --- Agent server -----------------------------------------------------------

struct ServerConfig {
  Date start_date;
  memory::RetrievalWeights weights;
  int reflection_cadence = 1;  // 0 disables reflection; otherwise every N days
  int max_options = 4;
  double walk_speed_mps = 1.4;
  double max_walk_meters = 1000.0;
  agent::ScheduleParams schedule;
};

// The decision side of the simulation: owns the personas, their schedules,
// memories, and the LLM. Consumes SyncRequests and perception events, emits
// ActionBatches, and consolidates memories at day boundaries. Deterministic
// given the same message sequence and a deterministic LLM client.
class AgentServer {
 public:
  AgentServer(const gtfs::TransitFeed& feed, std::vector<agent::Persona> personas,
              agent::LlmClient& llm, memory::Embedder& embedder, ServerConfig cfg);

  ActionBatch handle_sync(const SyncRequest& req);
  std::string handle_sync_text(const std::string& body);
  void handle_perception(const PerceptionMessage& msg);

  // Runs the day's reflection per cadence (failures keep the window for the
  // next boundary) and leaves schedules to be rebuilt on the next sync.
  void end_day(const Date& date);

  const std::vector<agent::TravelRecord>& travel_records() const { return records_; }
  const std::vector<agent::DecisionRecord>& decisions() const { return decision_rows_; }
  const memory::MemoryStore& memory() const { return store_; }
  const memory::ShortTermStream& stream() const { return stream_; }
  const std::vector<agent::Persona>& personas() const { return personas_; }

  // Everything the runner writes to disk, as one JSON object; lets a remote
  // kernel fetch the artifacts so a single process writes all output files.
  std::string artifacts_json() const;

 private:
  struct InFlight {
    int record_index = -1;
    agent::Activity activity;
    planner::Itinerary plan;
    std::vector<kernel::PerceptionEvent> events;
  };
  struct Runtime {
    agent::Persona persona;
    agent::DaySchedule schedule;
    size_t next_entry = 0;
    bool traveling = false;
    InFlight inflight;
  };

  void begin_day(const Date& date);
  void on_event(const kernel::PerceptionEvent& ev);
  std::optional<Assignment> trigger(Runtime& rt, const IdleAgent& idle, const SyncRequest& req);

  const gtfs::TransitFeed* feed_;
  agent::LlmClient* llm_;
  memory::Embedder* embedder_;
  ServerConfig cfg_;
  std::vector<agent::Persona> personas_;
  std::map<std::string, Runtime> agents_;
  memory::MemoryStore store_;
  memory::ShortTermStream stream_;
  PerceptionInbox inbox_;
  std::vector<agent::TravelRecord> records_;
  std::vector<agent::DecisionRecord> decision_rows_;
  Date current_date_;
  bool day_open_ = false;
};

// --- Transports --------------------------------------------------------------
// The kernel talks to the server through this seam. push_perception is
// fire-and-forget; flush() is the barrier that guarantees every pushed event
// has been applied before the next sync_exchange.
class AgentLink {
 public:
  virtual ~AgentLink() = default;
  virtual ActionBatch sync_exchange(const SyncRequest& req) = 0;
  virtual void push_perception(const PerceptionMessage& msg) = 0;
  virtual void flush() = 0;
  virtual void end_day(const Date& date) = 0;
  virtual std::string fetch_artifacts() = 0;
};

// Same-process transport. Still round-trips every message through the codec,
// so both transports exercise identical bytes end to end.
class InProcessLink : public AgentLink {
 public:
  explicit InProcessLink(AgentServer& server) : server_(&server) {}
  ActionBatch sync_exchange(const SyncRequest& req) override;
  void push_perception(const PerceptionMessage& msg) override;
  void flush() override {}
  void end_day(const Date& date) override;
  std::string fetch_artifacts() override;

 private:
  AgentServer* server_;
};

// HTTP + socket transport: sync_exchange is POST /sync, perceptions stream
// over a persistent TCP connection as newline-delimited frames, each answered
// by an ack frame; flush() waits for the outstanding acks.
class RemoteLink : public AgentLink {
 public:
  RemoteLink(const std::string& host, int sync_port, int perception_port,
             double timeout_seconds = 120.0);
  ~RemoteLink() override;
  RemoteLink(const RemoteLink&) = delete;
  RemoteLink& operator=(const RemoteLink&) = delete;

  ActionBatch sync_exchange(const SyncRequest& req) override;
  void push_perception(const PerceptionMessage& msg) override;
  void flush() override;
  void end_day(const Date& date) override;
  std::string fetch_artifacts() override;

 private:
  std::string read_frame_line();

  std::string host_;
  int sync_port_;
  double timeout_seconds_;
  int sock_ = -1;
  std::string inbuf_;
  long long unacked_ = 0;
};

// Serves one AgentServer over the two-process protocol: POST /sync,
// POST /day_end, GET /artifacts on the HTTP port, plus a single-client
// perception socket. Handlers share one lock, so message handling is
// serialized exactly as in-process.
class AgentServerHost {
 public:
  explicit AgentServerHost(AgentServer& server);
  ~AgentServerHost();
  AgentServerHost(const AgentServerHost&) = delete;
  AgentServerHost& operator=(const AgentServerHost&) = delete;

  // Binds both ports (0 picks free ones), then serves on background threads.
  void start(const std::string& host, int sync_port, int perception_port);
  void stop();
  int sync_port() const { return bound_sync_port_; }
  int perception_port() const { return bound_perception_port_; }

 private:
  void perception_loop();

  AgentServer* server_;
  std::mutex mu_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread http_thread_;
  std::thread perception_thread_;
  int bound_sync_port_ = 0;
  int bound_perception_port_ = 0;
  int listen_fd_ = -1;
  std::atomic<bool> stopping_{false};
};

// --- Kernel side --------------------------------------------------------------

// Feeds a World from an AgentLink: numbers and pushes each perception event,
// and on sync ticks flushes the channel, sends the idle roster, and applies
// the returned batch. Every assignment is validated against the feed before
// it reaches an agent.
class KernelBridge : public kernel::ActionProvider {
 public:
  explicit KernelBridge(AgentLink& link) : link_(&link) {}

  void sync(kernel::World& world) override;
  void deliver(const std::vector<kernel::PerceptionEvent>& events) override;

  long long syncs_sent() const { return syncs_sent_; }

 private:
  AgentLink* link_;
  std::map<std::string, long long> next_seq_;
  std::map<std::string, int> completed_;
  long long syncs_sent_ = 0;
};

}  // namespace mobsim::bridge
