// Agent server and the transports that connect it to the kernel. Both
// transports move the same canonical bytes; the remote one adds HTTP for the
// sync round-trip and a persistent acked socket for perceptions.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "mobsim/bridge/bridge.hpp"

namespace mobsim::bridge {

namespace {

void set_socket_timeout(int fd, double seconds) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(seconds);
  tv.tv_usec = static_cast<suseconds_t>((seconds - static_cast<double>(tv.tv_sec)) * 1e6);
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
}

void send_all(int fd, const std::string& data) {
  size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n <= 0)
      throw BridgeError(BridgeError::Code::transport,
                        std::string("perception channel write failed: ") + std::strerror(errno));
    off += static_cast<size_t>(n);
  }
}

sockaddr_in make_addr(const std::string& host, int port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(port));
  std::string ip = host == "localhost" ? "127.0.0.1" : host;
  if (::inet_pton(AF_INET, ip.c_str(), &addr.sin_addr) != 1)
    throw BridgeError(BridgeError::Code::transport, "not an IPv4 address: '" + host + "'");
  return addr;
}

}  // namespace

// --- AgentServer -------------------------------------------------------------

AgentServer::AgentServer(const gtfs::TransitFeed& feed, std::vector<agent::Persona> personas,
                         agent::LlmClient& llm, memory::Embedder& embedder, ServerConfig cfg)
    : feed_(&feed),
      llm_(&llm),
      embedder_(&embedder),
      cfg_(std::move(cfg)),
      personas_(std::move(personas)) {
  if (personas_.empty())
    throw BridgeError(BridgeError::Code::bad_state, "agent server needs at least one persona");
  for (const agent::Persona& p : personas_) {
    Runtime rt;
    rt.persona = p;
    agents_.emplace(p.id, std::move(rt));
  }
  inbox_.set_handler([this](const kernel::PerceptionEvent& ev) { on_event(ev); });
}

void AgentServer::begin_day(const Date& date) {
  for (auto& [id, rt] : agents_) {
    if (rt.traveling)
      throw BridgeError(BridgeError::Code::bad_state,
                        "agent '" + id + "' crossed a day boundary mid-journey");
    rt.schedule = agent::schedule_day(rt.persona, records_, date, cfg_.schedule);
    rt.next_entry = 0;
    rt.inflight = InFlight{};
  }
  current_date_ = date;
  day_open_ = true;
}

ActionBatch AgentServer::handle_sync(const SyncRequest& req) {
  if (!day_open_ || !(req.date == current_date_)) begin_day(req.date);
  ActionBatch batch;
  batch.tick = req.tick;
  for (const IdleAgent& idle : req.idle_agents) {
    auto it = agents_.find(idle.agent_id);
    if (it == agents_.end())
      throw SchemaViolation("agent_id", "unknown agent '" + idle.agent_id + "'");
    Runtime& rt = it->second;
    if (rt.traveling)
      throw BridgeError(BridgeError::Code::bad_state,
                        "sync overtook perceptions: agent '" + idle.agent_id +
                            "' still has an open journey");
    std::optional<Assignment> a = trigger(rt, idle, req);
    if (a) batch.assignments.push_back(std::move(*a));
  }
  return batch;
}

std::string AgentServer::handle_sync_text(const std::string& body) {
  return encode_action_batch(handle_sync(decode_sync_request(body)));
}

void AgentServer::handle_perception(const PerceptionMessage& msg) { inbox_.accept(msg); }

std::optional<Assignment> AgentServer::trigger(Runtime& rt, const IdleAgent& idle,
                                               const SyncRequest& req) {
  const std::vector<agent::DayScheduleEntry>& entries = rt.schedule.entries;
  while (rt.next_entry < entries.size() &&
         entries[rt.next_entry].adjusted_departure <= req.sim_time) {
    const agent::DayScheduleEntry& entry = entries[rt.next_entry];
    int entry_index = static_cast<int>(rt.next_entry);
    ++rt.next_entry;

    planner::PlanQuery q;
    q.origin = idle.position;
    q.destination = entry.activity.location;
    q.depart_after = req.sim_time;
    q.date = req.date;
    q.max_options = cfg_.max_options;
    q.walk_speed_mps = cfg_.walk_speed_mps;
    q.max_walk_meters = cfg_.max_walk_meters;
    planner::PlanResult res = planner::plan(*feed_, q);

    agent::TravelRecord rec;
    rec.agent_id = rt.persona.id;
    rec.date = req.date;
    rec.activity_index = entry_index;
    rec.purpose = entry.activity.purpose;
    rec.adjusted_departure = entry.adjusted_departure;
    rec.planned_arrival = entry.activity.expected_arrival;

    if (res.options.empty()) {
      // Nowhere to go from here: log the attempt as stranded-on-departure.
      rec.predicted_arrival = entry.activity.expected_arrival;
      rec.stranded = true;
      rec.options_offered = 0;
      rec.chosen_index = 0;
      records_.push_back(std::move(rec));
      continue;
    }

    std::vector<std::string> rendered;
    rendered.reserve(res.options.size());
    for (const planner::Itinerary& option : res.options)
      rendered.push_back(planner::render_itinerary(option, req.sim_time));

    memory::Query mq;
    mq.text = std::string(agent::purpose_name(entry.activity.purpose)) + " trip in the " +
              period_of_day(entry.adjusted_departure) + " on " + req.date.weekday_name();
    mq.embedding = embedder_->embed(mq.text);
    mq.now = req.date;
    std::vector<memory::ScoredEntry> memories = store_.retrieve(rt.persona.id, mq, cfg_.weights);

    agent::Prompt prompt = agent::build_prompt(
        entry.activity, rt.persona, entry_index + 1, static_cast<int>(entries.size()), req.date,
        entry.adjusted_departure, memories, rendered);
    agent::Decision d = agent::decide(*llm_, prompt, static_cast<int>(res.options.size()));
    const planner::Itinerary& chosen = res.options[static_cast<size_t>(d.chosen_plan - 1)];

    agent::DecisionRecord row;
    row.agent_id = rt.persona.id;
    row.date = req.date;
    row.activity_index = entry_index;
    row.purpose = entry.activity.purpose;
    row.route_signature = chosen.route_signature();
    row.chosen_index = d.chosen_plan;
    row.options_offered = static_cast<int>(res.options.size());
    row.fallback = d.fallback;
    row.reason = d.reason;
    row.prompt_tokens = d.prompt_tokens;
    row.response_tokens = d.response_tokens;
    row.llm_calls = d.llm_calls;
    row.latency_ms = d.latency_ms;
    decision_rows_.push_back(std::move(row));

    rec.route_signature = chosen.route_signature();
    rec.predicted_arrival = chosen.arrive;
    rec.options_offered = static_cast<int>(res.options.size());
    rec.chosen_index = d.chosen_plan;
    records_.push_back(std::move(rec));

    rt.traveling = true;
    rt.inflight.record_index = static_cast<int>(records_.size()) - 1;
    rt.inflight.activity = entry.activity;
    rt.inflight.plan = chosen;
    rt.inflight.events.clear();
    return Assignment{rt.persona.id, chosen.legs};
  }
  return std::nullopt;
}

void AgentServer::on_event(const kernel::PerceptionEvent& ev) {
  auto it = agents_.find(ev.agent_id);
  if (it == agents_.end())
    throw SchemaViolation("agent_id", "perception for unknown agent '" + ev.agent_id + "'");
  Runtime& rt = it->second;
  if (!rt.traveling)
    throw BridgeError(BridgeError::Code::bad_state,
                      "perception for agent '" + ev.agent_id + "' with no open journey");

  kernel::PerceptionEvent patched = ev;
  if (ev.kind == kernel::EventKind::arrived)
    patched.activity_id = agent::purpose_name(rt.inflight.activity.purpose);
  stream_.append(memory::render_perception(patched, rt.inflight.activity.expected_arrival));
  rt.inflight.events.push_back(patched);

  if (ev.kind == kernel::EventKind::arrived) {
    agent::TravelRecord& rec = records_[static_cast<size_t>(rt.inflight.record_index)];
    rec.realized_arrival = ev.arrival_time;
    rec.stranded = ev.stranded;
    std::vector<memory::ShortTermEvent> derived =
        agent::derive_events(rt.persona.id, ev.date, rt.inflight.plan,
                             rt.inflight.activity.purpose, rt.inflight.activity.expected_arrival,
                             rt.inflight.events);
    for (memory::ShortTermEvent& d : derived) stream_.append(std::move(d));
    rt.traveling = false;
  }
}

void AgentServer::end_day(const Date& date) {
  day_open_ = false;  // the next sync rebuilds schedules from the new records
  if (cfg_.reflection_cadence <= 0) return;
  int day_number = date.days_since(cfg_.start_date) + 1;
  if (day_number < 1) return;
  bool consolidate = day_number % cfg_.reflection_cadence == 0;
  bool generalize = day_number % 7 == 0;
  for (auto& [id, rt] : agents_) {
    if (consolidate) {
      std::vector<memory::ShortTermEvent> window = stream_.all(id);
      if (!window.empty()) {
        try {
          agent::reflect_daily(rt.persona, date, window, *llm_, *embedder_, store_);
          stream_.clear_agent(id);
        } catch (const agent::AgentError&) {
          // Keep the window and retry at the next boundary.
        }
      }
    }
    if (generalize) {
      try {
        agent::abstract_reflections(rt.persona, date, 7, *llm_, *embedder_, store_);
      } catch (const agent::AgentError&) {
      }
    }
  }
}

std::string AgentServer::artifacts_json() const {
  std::ostringstream travel, decisions, mem;
  agent::write_travel_records_csv(travel, records_);
  agent::write_decisions_csv(decisions, decision_rows_);
  store_.save_jsonl(mem);
  nlohmann::json j;
  j["decisions_csv"] = decisions.str();
  j["memory_jsonl"] = mem.str();
  j["travel_records_csv"] = travel.str();
  return j.dump();
}

// --- InProcessLink -----------------------------------------------------------

ActionBatch InProcessLink::sync_exchange(const SyncRequest& req) {
  return decode_action_batch(server_->handle_sync_text(encode_sync_request(req)));
}

void InProcessLink::push_perception(const PerceptionMessage& msg) {
  server_->handle_perception(decode_perception(encode_perception(msg)));
}

void InProcessLink::end_day(const Date& date) { server_->end_day(date); }

std::string InProcessLink::fetch_artifacts() { return server_->artifacts_json(); }

// --- RemoteLink ---------------------------------------------------------------

RemoteLink::RemoteLink(const std::string& host, int sync_port, int perception_port,
                       double timeout_seconds)
    : host_(host), sync_port_(sync_port), timeout_seconds_(timeout_seconds) {
  sock_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (sock_ < 0)
    throw BridgeError(BridgeError::Code::transport,
                      std::string("socket: ") + std::strerror(errno));
  sockaddr_in addr = make_addr(host, perception_port);
  if (::connect(sock_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    int err = errno;
    ::close(sock_);
    sock_ = -1;
    throw BridgeError(BridgeError::Code::transport,
                      "cannot reach the perception channel at " + host + ":" +
                          std::to_string(perception_port) + ": " + std::strerror(err));
  }
  int one = 1;
  ::setsockopt(sock_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  set_socket_timeout(sock_, timeout_seconds_);
}

RemoteLink::~RemoteLink() {
  if (sock_ >= 0) ::close(sock_);
}

std::string RemoteLink::read_frame_line() {
  while (true) {
    size_t pos = inbuf_.find('\n');
    if (pos != std::string::npos) {
      std::string line = inbuf_.substr(0, pos);
      inbuf_.erase(0, pos + 1);
      return line;
    }
    char chunk[4096];
    ssize_t n = ::recv(sock_, chunk, sizeof chunk, 0);
    if (n > 0) {
      inbuf_.append(chunk, static_cast<size_t>(n));
      continue;
    }
    if (n == 0)
      throw BridgeError(BridgeError::Code::transport, "perception channel closed by peer");
    if (errno == EAGAIN || errno == EWOULDBLOCK)
      throw BridgeError(BridgeError::Code::timeout,
                        "no perception ack after " + std::to_string(timeout_seconds_) +
                            " seconds; aborting the run");
    throw BridgeError(BridgeError::Code::transport,
                      std::string("perception channel read failed: ") + std::strerror(errno));
  }
}

void RemoteLink::push_perception(const PerceptionMessage& msg) {
  send_all(sock_, encode_frame(Frame{"perception", encode_perception(msg)}) + "\n");
  ++unacked_;
}

void RemoteLink::flush() {
  while (unacked_ > 0) {
    Frame f = decode_frame(read_frame_line());
    if (f.type == "ack") {
      --unacked_;
    } else if (f.type == "error") {
      throw BridgeError(BridgeError::Code::transport,
                        "agent server rejected a perception: " + f.payload);
    }
    // Other frame types (e.g. server-initiated actions) are not part of the
    // reference flow; ignore them rather than fail the barrier.
  }
}

ActionBatch RemoteLink::sync_exchange(const SyncRequest& req) {
  httplib::Client cli(host_, sync_port_);
  cli.set_connection_timeout(10, 0);
  auto whole = static_cast<time_t>(timeout_seconds_);
  auto frac = static_cast<long>((timeout_seconds_ - static_cast<double>(whole)) * 1e6);
  cli.set_read_timeout(whole, frac);
  cli.set_write_timeout(whole, frac);
  httplib::Result res = cli.Post("/sync", encode_sync_request(req), "application/json");
  if (!res) {
    if (res.error() == httplib::Error::Read || res.error() == httplib::Error::Write)
      throw BridgeError(BridgeError::Code::timeout,
                        "sync_exchange got no answer within " +
                            std::to_string(timeout_seconds_) + " seconds; aborting the run");
    throw BridgeError(BridgeError::Code::transport,
                      "sync_exchange failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200)
    throw BridgeError(BridgeError::Code::transport,
                      "agent server answered " + std::to_string(res->status) + ": " + res->body);
  return decode_action_batch(res->body);
}

void RemoteLink::end_day(const Date& date) {
  httplib::Client cli(host_, sync_port_);
  cli.set_connection_timeout(10, 0);
  // Reflection runs many LLM calls; give it the same budget as a sync.
  auto whole = static_cast<time_t>(timeout_seconds_);
  cli.set_read_timeout(whole, 0);
  nlohmann::json j;
  j["date"] = date.to_iso();
  httplib::Result res = cli.Post("/day_end", j.dump(), "application/json");
  if (!res)
    throw BridgeError(BridgeError::Code::transport,
                      "day_end failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw BridgeError(BridgeError::Code::transport,
                      "agent server answered " + std::to_string(res->status) + ": " + res->body);
}

std::string RemoteLink::fetch_artifacts() {
  httplib::Client cli(host_, sync_port_);
  cli.set_connection_timeout(10, 0);
  cli.set_read_timeout(static_cast<time_t>(timeout_seconds_), 0);
  httplib::Result res = cli.Get("/artifacts");
  if (!res)
    throw BridgeError(BridgeError::Code::transport,
                      "artifacts fetch failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw BridgeError(BridgeError::Code::transport,
                      "agent server answered " + std::to_string(res->status) + ": " + res->body);
  return res->body;
}

// --- AgentServerHost -----------------------------------------------------------

struct AgentServerHost::Impl {
  httplib::Server svr;
};

AgentServerHost::AgentServerHost(AgentServer& server)
    : server_(&server), impl_(new Impl) {}

AgentServerHost::~AgentServerHost() { stop(); }

void AgentServerHost::start(const std::string& host, int sync_port, int perception_port) {
  httplib::Server& svr = impl_->svr;

  svr.Post("/sync", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      std::lock_guard<std::mutex> lk(mu_);
      res.set_content(server_->handle_sync_text(req.body), "application/json");
    } catch (const std::exception& e) {
      nlohmann::json err;
      err["error"] = e.what();
      res.status = 400;
      res.set_content(err.dump(), "application/json");
    }
  });
  svr.Post("/day_end", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      nlohmann::json j = nlohmann::json::parse(req.body, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("date") || !j["date"].is_string())
        throw SchemaViolation("date", "missing or not a string");
      Date date = Date::from_iso(j["date"].get<std::string>());
      std::lock_guard<std::mutex> lk(mu_);
      server_->end_day(date);
      res.set_content("{}", "application/json");
    } catch (const std::exception& e) {
      nlohmann::json err;
      err["error"] = e.what();
      res.status = 400;
      res.set_content(err.dump(), "application/json");
    }
  });
  svr.Get("/artifacts", [this](const httplib::Request&, httplib::Response& res) {
    std::lock_guard<std::mutex> lk(mu_);
    res.set_content(server_->artifacts_json(), "application/json");
  });

  if (sync_port == 0) {
    bound_sync_port_ = svr.bind_to_any_port(host);
    if (bound_sync_port_ < 0)
      throw BridgeError(BridgeError::Code::transport, "cannot bind the sync port");
  } else {
    if (!svr.bind_to_port(host, sync_port))
      throw BridgeError(BridgeError::Code::transport,
                        "cannot bind the sync port " + std::to_string(sync_port));
    bound_sync_port_ = sync_port;
  }

  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0)
    throw BridgeError(BridgeError::Code::transport,
                      std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr = make_addr(host, perception_port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
    throw BridgeError(BridgeError::Code::transport,
                      "cannot bind the perception port " + std::to_string(perception_port) +
                          ": " + std::strerror(errno));
  if (::listen(listen_fd_, 1) != 0)
    throw BridgeError(BridgeError::Code::transport,
                      std::string("listen: ") + std::strerror(errno));
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  bound_perception_port_ = ntohs(bound.sin_port);
  set_socket_timeout(listen_fd_, 0.2);  // lets the accept loop notice stop()

  http_thread_ = std::thread([this] { impl_->svr.listen_after_bind(); });
  perception_thread_ = std::thread([this] { perception_loop(); });
  impl_->svr.wait_until_ready();
}

void AgentServerHost::perception_loop() {
  while (!stopping_) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (stopping_) break;
      continue;  // accept timeout; poll the stop flag again
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    set_socket_timeout(fd, 0.2);
    std::string buf;
    char chunk[4096];
    while (!stopping_) {
      ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
      if (n == 0) break;
      if (n < 0) {
        if (errno == EAGAIN || errno == EWOULDBLOCK) continue;
        break;
      }
      buf.append(chunk, static_cast<size_t>(n));
      size_t pos;
      while ((pos = buf.find('\n')) != std::string::npos) {
        std::string line = buf.substr(0, pos);
        buf.erase(0, pos + 1);
        if (line.empty()) continue;
        std::string reply;
        try {
          Frame f = decode_frame(line);
          if (f.type == "perception") {
            PerceptionMessage msg = decode_perception(f.payload);
            {
              std::lock_guard<std::mutex> lk(mu_);
              server_->handle_perception(msg);
            }
            nlohmann::json ack;
            ack["agent_id"] = msg.event.agent_id;
            ack["seq"] = msg.seq;
            reply = encode_frame(Frame{"ack", ack.dump()}) + "\n";
          } else {
            nlohmann::json err;
            err["error"] = "unsupported frame type '" + f.type + "'";
            reply = encode_frame(Frame{"error", err.dump()}) + "\n";
          }
        } catch (const std::exception& e) {
          nlohmann::json err;
          err["error"] = e.what();
          reply = encode_frame(Frame{"error", err.dump()}) + "\n";
        }
        try {
          send_all(fd, reply);
        } catch (const BridgeError&) {
          break;  // client went away; wait for the next connection
        }
      }
    }
    ::close(fd);
  }
}

void AgentServerHost::stop() {
  if (stopping_.exchange(true)) {
    // Already stopped; nothing left to join.
  } else {
    impl_->svr.stop();
    if (listen_fd_ >= 0) {
      ::shutdown(listen_fd_, SHUT_RDWR);
      ::close(listen_fd_);
      listen_fd_ = -1;
    }
  }
  if (http_thread_.joinable()) http_thread_.join();
  if (perception_thread_.joinable()) perception_thread_.join();
}

// --- KernelBridge ---------------------------------------------------------------

void KernelBridge::sync(kernel::World& world) {
  link_->flush();
  SyncRequest req;
  req.tick = world.clock().tick;
  req.date = world.clock().date;
  req.sim_time = world.clock().time_of_day;
  for (const kernel::InhabitantAgent& a : world.agents())
    if (!a.has_actions) req.idle_agents.push_back({a.id, a.position, completed_[a.id]});

  ActionBatch batch = link_->sync_exchange(req);
  ++syncs_sent_;
  if (batch.tick != req.tick)
    throw BridgeError(BridgeError::Code::bad_state,
                      "batch acknowledges tick " + std::to_string(batch.tick) + ", expected " +
                          std::to_string(req.tick));
  for (Assignment& a : batch.assignments) {
    if (!a.legs.empty()) {
      planner::Itinerary it;
      it.legs = a.legs;
      it.depart = a.legs.front().start;
      it.arrive = a.legs.back().end;
      for (const planner::Leg& leg : it.legs) {
        if (leg.kind != planner::Leg::Kind::transfer) continue;
        it.total_walk_seconds += leg.end - leg.start;
        it.total_walk_meters += leg.walk_meters;
      }
      std::vector<planner::Violation> bad = planner::validate_itinerary(
          world.feed(), it, world.clock().date, world.config().walk_speed_mps);
      if (!bad.empty())
        throw BridgeError(BridgeError::Code::bad_state,
                          "invalid itinerary for '" + a.agent_id + "': " + bad.front().detail);
    }
    world.assign_actions(a.agent_id, std::move(a.legs));
  }
}

void KernelBridge::deliver(const std::vector<kernel::PerceptionEvent>& events) {
  for (const kernel::PerceptionEvent& ev : events) {
    PerceptionMessage msg;
    msg.seq = ++next_seq_[ev.agent_id];
    msg.event = ev;
    link_->push_perception(msg);
    if (ev.kind == kernel::EventKind::arrived) ++completed_[ev.agent_id];
  }
}

}  // namespace mobsim::bridge
