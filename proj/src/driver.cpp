#include "tracelens/driver.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <limits>
#include <mutex>
#include <thread>

namespace tracelens::driver {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t ns_since(Clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count();
}

std::string sub_key(ClientId c, const std::string& id) { return std::to_string(c) + "#" + id; }

}  // namespace

std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::off: return "off";
    case Mode::full_broadcast: return "full_broadcast";
    case Mode::driven: return "driven";
  }
  return "?";
}

Mode mode_from_name(std::string_view s) {
  if (s == "off") return Mode::off;
  if (s == "full_broadcast" || s == "full") return Mode::full_broadcast;
  if (s == "driven") return Mode::driven;
  throw std::invalid_argument("unknown mode '" + std::string(s) + "' (off, full_broadcast, driven)");
}

TraceEvent extract(const TraceEvent& e, const std::set<AttrGroup>& wanted, std::vector<std::string> tags) {
  TraceEvent out;
  out.id = e.id;
  out.chrono = e.chrono;
  out.port = e.port;
  for (const auto& [k, v] : e.attrs)
    if (wanted.contains(attr_group_of(k))) out.attrs.emplace(k, v);
  if (wanted.contains(AttrGroup::delta)) out.delta = e.delta;
  out.tags = std::move(tags);
  return out;
}

// ---------------------------------------------------------------------------

void DriverCore::add_client(ClientId c) { clients_.insert(c); }

void DriverCore::remove_client(ClientId c) {
  clients_.erase(c);
  if (subs_.erase(c)) rebuild();
}

void DriverCore::subscribe(ClientId c, const filter::FilterSpec& spec) {
  auto& mine = subs_[c];
  if (mine.contains(spec.id)) throw filter::DuplicateId("duplicate filter id " + spec.id);
  mine.emplace(spec.id, spec);
  stats_.try_emplace({c, spec.id});
  rebuild();
}

bool DriverCore::unsubscribe(ClientId c, const std::string& id) {
  auto it = subs_.find(c);
  if (it == subs_.end() || !it->second.erase(id)) return false;
  rebuild();
  return true;
}

std::vector<std::string> DriverCore::subscriptions(ClientId c) const {
  std::vector<std::string> out;
  if (auto it = subs_.find(c); it != subs_.end())
    for (const auto& [id, spec] : it->second) out.push_back(id);
  return out;
}

void DriverCore::rebuild() {
  auto carried = matcher_.run_state();
  evaluations_ += matcher_.predicate_evaluations();
  std::vector<std::pair<std::string, filter::Automaton>> machines;
  key_owner_.clear();
  for (const auto& [c, mine] : subs_)
    for (const auto& [id, spec] : mine) {
      auto key = sub_key(c, id);
      key_owner_[key] = {c, id};
      machines.emplace_back(key, filter::compile(spec));
    }
  matcher_ = filter::MergedMatcher::build(machines);
  matcher_.restore_run_state(carried);
}

void DriverCore::process(const TraceEvent& e, std::vector<Outgoing>& out) {
  ++counters_.events_in;
  if (mode_ == Mode::off) return;
  if (mode_ == Mode::full_broadcast) {
    if (clients_.empty()) return;
    auto t0 = Clock::now();
    auto line = encode_event(e);
    counters_.t_encode_ns += ns_since(t0);
    for (auto c : clients_) {
      out.push_back({c, line});
      ++counters_.events_out;
      counters_.bytes_out += line.size();
    }
    return;
  }

  auto t0 = Clock::now();
  auto keys = matcher_.match(e);
  counters_.t_cond_ns += ns_since(t0);
  if (keys.empty()) return;

  auto t1 = Clock::now();
  std::map<ClientId, std::vector<std::string>> tags;
  for (const auto& key : keys) {
    const auto& [c, id] = key_owner_.at(key);
    tags[c].push_back(id);
  }
  std::vector<std::pair<ClientId, TraceEvent>> events;
  events.reserve(tags.size());
  for (auto& [c, ids] : tags) {
    std::sort(ids.begin(), ids.end());
    std::set<AttrGroup> wanted;
    const auto& mine = subs_.at(c);
    for (const auto& id : ids) {
      const auto& w = mine.at(id).wanted_attrs;
      wanted.insert(w.begin(), w.end());
    }
    events.emplace_back(c, extract(e, wanted, ids));
  }
  counters_.t_extract_ns += ns_since(t1);

  auto t2 = Clock::now();
  for (auto& [c, ev] : events) {
    auto line = encode_event(ev);
    ++counters_.events_out;
    counters_.bytes_out += line.size();
    for (const auto& id : ev.tags) {
      auto& s = stats_[{c, id}];
      ++s.events;
      s.bytes += line.size();
    }
    out.push_back({c, std::move(line)});
  }
  counters_.t_encode_ns += ns_since(t2);
}

// ---------------------------------------------------------------------------

Json report_to_json(const ServerReport& r) {
  Json j;
  j["mode"] = r.mode;
  j["t_prog_ns"] = r.t_prog_ns;
  j["t_engine_ns"] = r.t_engine_ns;
  j["t_core_ns"] = r.t_core_ns;
  j["t_cond_ns"] = r.t_cond_ns;
  j["t_extract_ns"] = r.t_extract_ns;
  j["t_encode_and_com_ns"] = r.t_encode_and_com_ns;
  j["wall_ns"] = r.wall_ns;
  j["engine_events"] = r.engine_events;
  j["events_emitted"] = r.events_emitted;
  j["bytes_emitted"] = r.bytes_emitted;
  j["predicate_evaluations"] = r.predicate_evaluations;
  j["solutions"] = r.solutions;
  j["final_chrono"] = r.final_chrono;
  j["clients"] = r.clients;
  Json subs = Json::array();
  for (const auto& s : r.subscriptions)
    subs.push_back({{"client", s.client}, {"id", s.id}, {"events", s.events}, {"bytes", s.bytes}});
  j["subscriptions"] = subs;
  return j;
}

ServerReport report_from_json(const Json& j) {
  ServerReport r;
  r.mode = j.at("mode").get<std::string>();
  r.t_prog_ns = j.at("t_prog_ns").get<std::int64_t>();
  r.t_engine_ns = j.at("t_engine_ns").get<std::int64_t>();
  r.t_core_ns = j.at("t_core_ns").get<std::int64_t>();
  r.t_cond_ns = j.at("t_cond_ns").get<std::int64_t>();
  r.t_extract_ns = j.at("t_extract_ns").get<std::int64_t>();
  r.t_encode_and_com_ns = j.at("t_encode_and_com_ns").get<std::int64_t>();
  r.wall_ns = j.at("wall_ns").get<std::int64_t>();
  r.engine_events = j.at("engine_events").get<std::uint64_t>();
  r.events_emitted = j.at("events_emitted").get<std::uint64_t>();
  r.bytes_emitted = j.at("bytes_emitted").get<std::uint64_t>();
  r.predicate_evaluations = j.at("predicate_evaluations").get<std::uint64_t>();
  r.solutions = j.at("solutions").get<std::int64_t>();
  r.final_chrono = j.at("final_chrono").get<std::uint64_t>();
  r.clients = j.at("clients").get<std::uint64_t>();
  for (const auto& s : j.at("subscriptions"))
    r.subscriptions.push_back({s.at("client").get<std::string>(), s.at("id").get<std::string>(),
                               s.at("events").get<std::uint64_t>(), s.at("bytes").get<std::uint64_t>()});
  return r;
}

std::int64_t measure_prog_ns(const clp::Program& program, const clp::Goal& goal) {
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  for (int run = 0; run < 3; ++run) {
    clp::Engine engine(program, goal, clp::EngineOptions{false});
    auto t0 = Clock::now();
    while (!engine.terminal()) engine.step();
    best = std::min(best, ns_since(t0));
  }
  return best;
}

// ---------------------------------------------------------------------------

namespace {

struct Client {
  ClientId id = 0;
  net::Socket sock;
  std::string analyzer_id;
  bool greeted = false;
  int pauses = 0;

  std::mutex m;
  std::condition_variable can_push, can_pop;
  std::deque<std::string> queue;
  std::size_t capacity = 256;
  bool closing = false;
  bool dead = false;

  std::thread reader;
  std::thread writer;

  /// Blocks while the queue is full. False when the peer is gone.
  bool push(std::string line) {
    std::unique_lock lock(m);
    can_push.wait(lock, [&] { return queue.size() < capacity || dead || closing; });
    if (dead || closing) return false;
    queue.push_back(std::move(line));
    can_pop.notify_one();
    return true;
  }

  void close_after_flush() {
    std::lock_guard lock(m);
    closing = true;
    can_pop.notify_all();
    can_push.notify_all();
  }

  void write_loop() {
    while (true) {
      std::string line;
      {
        std::unique_lock lock(m);
        can_pop.wait(lock, [&] { return !queue.empty() || closing; });
        if (queue.empty()) break;
        line = std::move(queue.front());
        queue.pop_front();
        can_push.notify_one();
      }
      if (!dead && !sock.send_all(line)) {
        std::lock_guard lock(m);
        dead = true;
        can_push.notify_all();
      }
    }
    sock.shutdown();
  }
};
using ClientPtr = std::shared_ptr<Client>;

struct InboxItem {
  enum class Kind { connected, line, disconnected } kind;
  ClientPtr client;
  std::string line;
};

}  // namespace

struct Server::Impl {
  clp::Program program;
  clp::Goal goal;
  DriverConfig config;
  net::Listener listener;

  std::atomic<bool> stopping{false};
  std::thread acceptor;

  std::mutex inbox_m;
  std::condition_variable inbox_cv;
  std::deque<InboxItem> inbox;
  std::atomic<std::size_t> inbox_size{0};

  std::map<ClientId, ClientPtr> clients;
  std::vector<ClientPtr> finished;
  ClientId next_client = 1;
  int greeted = 0;
  int pause_total = 0;
  std::uint64_t clients_seen = 0;

  std::unique_ptr<DriverCore> core;
  std::unique_ptr<clp::Engine> engine;
  FullState initial;
  std::deque<FullState> checkpoints;
  std::int64_t t_com_ns = 0;
  std::map<std::pair<ClientId, std::string>, std::string> analyzer_names;

  Impl(clp::Program p, clp::Goal g, DriverConfig c)
      : program(std::move(p)), goal(std::move(g)), config(std::move(c)), listener(config.listen) {}

  void post(InboxItem item) {
    {
      std::lock_guard lock(inbox_m);
      inbox.push_back(std::move(item));
      inbox_size = inbox.size();
    }
    inbox_cv.notify_all();
  }

  void accept_loop() {
    while (!stopping) {
      auto s = listener.accept(std::chrono::milliseconds(50));
      if (!s.valid()) continue;
      auto c = std::make_shared<Client>();
      c->sock = std::move(s);
      c->capacity = config.queue_capacity;
      post({InboxItem::Kind::connected, c, {}});
    }
  }

  void start_client(const ClientPtr& c) {
    c->id = next_client++;
    ++clients_seen;
    clients[c->id] = c;
    core->add_client(c->id);
    c->writer = std::thread([c] { c->write_loop(); });
    c->reader = std::thread([this, c] {
      net::LineReader reader(c->sock);
      while (auto line = reader.read_line()) post({InboxItem::Kind::line, c, std::move(*line)});
      post({InboxItem::Kind::disconnected, c, {}});
    });
  }

  void drop_client(const ClientPtr& c) {
    if (!clients.erase(c->id)) return;
    pause_total -= c->pauses;
    c->pauses = 0;
    for (const auto& id : core->subscriptions(c->id)) analyzer_names[{c->id, id}] = c->analyzer_id;
    core->remove_client(c->id);
    c->close_after_flush();
    finished.push_back(c);
  }

  void send(const ClientPtr& c, const Json& j) { c->push(to_line(j)); }

  void reply_ack(const ClientPtr& c, std::string_view re, Json extra = Json::object()) {
    Json j;
    j["type"] = "ack";
    j["re"] = re;
    for (auto& [k, v] : extra.items()) j[k] = v;
    send(c, j);
  }

  void reply_err(const ClientPtr& c, std::string_view re, const std::string& message) {
    Json j;
    j["type"] = "err";
    j["re"] = re;
    j["message"] = message;
    send(c, j);
  }

  std::uint64_t current_chrono() const { return engine ? engine->chrono().value : 0; }

  FullState live_state() const { return engine ? engine->snapshot() : initial; }

  void add_checkpoint(FullState s) {
    checkpoints.push_back(std::move(s));
    while (checkpoints.size() > config.keep_checkpoints) checkpoints.pop_front();
  }

  void handle_snapshot(const ClientPtr& c, const Json& msg) {
    const FullState* chosen = nullptr;
    FullState live;
    if (auto it = msg.find("chrono"); it != msg.end() && !it->is_null()) {
      if (!it->is_number_integer()) return reply_err(c, "snapshot_req", "chrono must be an integer");
      auto want = it->get<std::uint64_t>();
      if (want == 0) chosen = &initial;
      for (const auto& s : checkpoints)
        if (s.chrono.value == want) chosen = &s;
      if (!chosen) return reply_err(c, "snapshot_req", "no checkpoint at chrono " + std::to_string(want));
    } else if (pause_total > 0) {
      live = live_state();
      chosen = &live;
    } else {
      chosen = checkpoints.empty() ? &initial : &checkpoints.back();
    }
    Json j;
    j["type"] = "snapshot";
    j["chrono"] = chosen->chrono.value;
    j["state"] = state_to_json(*chosen);
    send(c, j);
  }

  void handle(const ClientPtr& c, const std::string& line) {
    Json msg;
    try {
      msg = parse_line(line);
    } catch (const DecodeError& e) {
      return reply_err(c, "", e.what());
    }
    auto type_it = msg.find("type");
    if (type_it == msg.end() || !type_it->is_string()) return reply_err(c, "", "message without type");
    auto type = type_it->get<std::string>();

    if (type == "hello") {
      if (c->greeted) return reply_err(c, "hello", "already greeted");
      c->greeted = true;
      ++greeted;
      auto id = msg.find("analyzer_id");
      c->analyzer_id = id != msg.end() && id->is_string() ? id->get<std::string>() : "client-" + std::to_string(c->id);
      if (auto hold = msg.find("hold"); hold != msg.end() && hold->is_boolean() && hold->get<bool>()) {
        ++c->pauses;
        ++pause_total;
      }
      for (const auto& f : config.default_filters) {
        try {
          core->subscribe(c->id, f);
        } catch (const filter::DuplicateId&) {
        }
      }
      return reply_ack(c, "hello", {{"protocol_version", kProtocolVersion}, {"chrono", current_chrono()}});
    }
    if (!c->greeted) return reply_err(c, type, "hello expected first");

    if (type == "subscribe") {
      auto src = msg.find("filter");
      if (src == msg.end() || !src->is_string()) return reply_err(c, "subscribe", "missing filter text");
      try {
        auto spec = filter::parse_filter(src->get<std::string>());
        core->subscribe(c->id, spec);
        return reply_ack(c, "subscribe", {{"id", spec.id}});
      } catch (const filter::ParseError& e) {
        return reply_err(c, "subscribe", e.what());
      } catch (const filter::DuplicateId& e) {
        return reply_err(c, "subscribe", e.what());
      }
    }
    if (type == "unsubscribe") {
      auto id = msg.find("id");
      if (id == msg.end() || !id->is_string()) return reply_err(c, "unsubscribe", "missing id");
      if (!core->unsubscribe(c->id, id->get<std::string>()))
        return reply_err(c, "unsubscribe", "no subscription " + id->get<std::string>());
      return reply_ack(c, "unsubscribe", {{"id", id->get<std::string>()}});
    }
    if (type == "snapshot_req") return handle_snapshot(c, msg);
    if (type == "pause") {
      ++c->pauses;
      ++pause_total;
      return reply_ack(c, "pause", {{"chrono", current_chrono()}});
    }
    if (type == "resume") {
      if (c->pauses == 0) return reply_err(c, "resume", "resume without pause");
      --c->pauses;
      --pause_total;
      return reply_ack(c, "resume", {{"chrono", current_chrono()}});
    }
    if (type == "bye") {
      reply_ack(c, "bye");
      return drop_client(c);
    }
    reply_err(c, type, "unknown message type");
  }

  /// Handles queued messages, waiting until `until` for the first one.
  void drain(std::optional<Clock::time_point> until) {
    std::deque<InboxItem> items;
    {
      std::unique_lock lock(inbox_m);
      if (until) inbox_cv.wait_until(lock, *until, [&] { return !inbox.empty() || stopping.load(); });
      items.swap(inbox);
      inbox_size = 0;
    }
    for (auto& item : items) {
      switch (item.kind) {
        case InboxItem::Kind::connected: start_client(item.client); break;
        case InboxItem::Kind::line:
          if (clients.contains(item.client->id)) handle(item.client, item.line);
          break;
        case InboxItem::Kind::disconnected: drop_client(item.client); break;
      }
    }
  }

  void shutdown_all() {
    stopping = true;
    if (acceptor.joinable()) acceptor.join();
    listener.close();
    for (auto& [id, c] : std::map<ClientId, ClientPtr>(clients)) drop_client(c);
    for (auto& c : finished) {
      c->close_after_flush();
      if (c->writer.joinable()) c->writer.join();
      c->sock.shutdown();
      if (c->reader.joinable()) c->reader.join();
    }
    finished.clear();
  }

  ServerReport run() {
    auto wall0 = Clock::now();
    ServerReport report;
    report.mode = std::string(mode_name(config.mode));
    if (config.measure_prog) report.t_prog_ns = measure_prog_ns(program, goal);

    core = std::make_unique<DriverCore>(config.mode);
    bool tracing = config.mode != Mode::off;
    engine = std::make_unique<clp::Engine>(program, goal, clp::EngineOptions{tracing});
    initial = engine->snapshot();
    auto keep_engine = std::move(engine);  // snapshots before the start come from S_0
    acceptor = std::thread([this] { accept_loop(); });

    auto deadline = Clock::now() + config.grace;
    while (!stopping) {
      bool enough = config.wait_clients > 0 && greeted >= config.wait_clients;
      bool timed_out = (config.wait_clients == 0 || config.grace.count() > 0) && Clock::now() >= deadline;
      if (enough || timed_out) break;
      drain(std::min(deadline, Clock::now() + std::chrono::milliseconds(20)));
    }
    engine = std::move(keep_engine);

    std::vector<DriverCore::Outgoing> out;
    std::int64_t t_engine = 0;
    while (!stopping && !engine->terminal()) {
      if (inbox_size.load(std::memory_order_relaxed)) drain(std::nullopt);
      while (pause_total > 0 && !stopping) drain(Clock::now() + std::chrono::milliseconds(20));
      if (stopping) break;

      auto t0 = Clock::now();
      auto ev = engine->step();
      bool checkpoint = tracing && config.checkpoint_every && ev.chrono.value % config.checkpoint_every == 0;
      if (checkpoint) add_checkpoint(engine->snapshot());
      t_engine += ns_since(t0);

      if (!tracing) continue;
      out.clear();
      core->process(ev, out);
      if (out.empty()) continue;
      auto t1 = Clock::now();
      for (auto& o : out) {
        auto it = clients.find(o.client);
        if (it != clients.end()) it->second->push(std::move(o.line));
      }
      t_com_ns += ns_since(t1);
    }

    Json end;
    end["type"] = "end";
    end["chrono"] = engine->chrono().value;
    end["solutions"] = engine->solutions();
    for (auto& [id, c] : clients) send(c, end);

    auto linger_until = Clock::now() + config.linger;
    while (!stopping && !clients.empty() && Clock::now() < linger_until)
      drain(std::min(linger_until, Clock::now() + std::chrono::milliseconds(20)));
    // late messages still get answers while we shut down
    drain(std::nullopt);

    const auto& k = core->counters();
    report.t_engine_ns = t_engine;
    report.t_core_ns = std::max<std::int64_t>(0, t_engine - report.t_prog_ns);
    report.t_cond_ns = k.t_cond_ns;
    report.t_extract_ns = k.t_extract_ns;
    report.t_encode_and_com_ns = k.t_encode_ns + t_com_ns;
    report.engine_events = engine->chrono().value;
    report.events_emitted = k.events_out;
    report.bytes_emitted = k.bytes_out;
    report.predicate_evaluations = core->predicate_evaluations();
    report.solutions = engine->solutions();
    report.final_chrono = engine->chrono().value;
    report.clients = clients_seen;

    for (auto& [id, c] : clients)
      for (const auto& sid : core->subscriptions(id)) analyzer_names[{id, sid}] = c->analyzer_id;
    for (const auto& [key, s] : core->subscription_stats()) {
      auto name = analyzer_names.contains(key) ? analyzer_names[key] : std::to_string(key.first);
      report.subscriptions.push_back({name, key.second, s.events, s.bytes});
    }

    shutdown_all();
    report.wall_ns = ns_since(wall0);
    return report;
  }
};

Server::Server(clp::Program program, clp::Goal goal, DriverConfig config)
    : impl_(std::make_unique<Impl>(std::move(program), std::move(goal), std::move(config))) {}

Server::~Server() {
  impl_->shutdown_all();
}

std::uint16_t Server::port() const { return impl_->listener.port(); }

ServerReport Server::run() { return impl_->run(); }

void Server::stop() {
  impl_->stopping = true;
  impl_->inbox_cv.notify_all();
}

}  // namespace tracelens::driver
