#include "tracelens/analyzer.hpp"

#include <sstream>
#include <thread>

#include "tracelens/engine.hpp"

namespace tracelens::analyzer {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t ns_since(Clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count();
}

std::string message_of(const Json& j) {
  auto it = j.find("message");
  return it != j.end() && it->is_string() ? it->get<std::string>() : "unspecified error";
}

}  // namespace

Json timings_to_json(const AnalyzerTimings& t) {
  Json j;
  j["t_filter_ns"] = t.t_filter_ns;
  j["t_decode_ns"] = t.t_decode_ns;
  j["t_rebuild_ns"] = t.t_rebuild_ns;
  j["t_exec_ns"] = t.t_exec_ns;
  j["wall_ns"] = t.wall_ns;
  j["events"] = t.events;
  j["bytes"] = t.bytes;
  return j;
}

AnalyzerTimings timings_from_json(const Json& j) {
  AnalyzerTimings t;
  t.t_filter_ns = j.at("t_filter_ns").get<std::int64_t>();
  t.t_decode_ns = j.at("t_decode_ns").get<std::int64_t>();
  t.t_rebuild_ns = j.at("t_rebuild_ns").get<std::int64_t>();
  t.t_exec_ns = j.at("t_exec_ns").get<std::int64_t>();
  t.wall_ns = j.at("wall_ns").get<std::int64_t>();
  t.events = j.at("events").get<std::uint64_t>();
  t.bytes = j.at("bytes").get<std::uint64_t>();
  return t;
}

// ---------------------------------------------------------------------------

void MirrorState::reset(FullState s) {
  state_ = std::move(s);
  synced_ = true;
  stale_ = false;
}

bool MirrorState::apply(const TraceEvent& e) {
  if (!synced_ || stale_) throw DeltaInconsistent("mirror is not synchronised");
  if (e.chrono <= state_.chrono) return false;
  bool gap = e.chrono.value > state_.chrono.value + 1;
  if (gap) ++gaps_;
  if (!e.delta) {
    state_.chrono = e.chrono;
    return true;
  }
  if (gap) {
    stale_ = true;
    throw DeltaInconsistent("delta at chrono " + std::to_string(e.chrono.value) + " after a gap from " +
                            std::to_string(state_.chrono.value));
  }
  try {
    apply_delta_in_place(state_, e);
  } catch (const DeltaInconsistent&) {
    stale_ = true;
    throw;
  }
  return true;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Session> Session::open(const net::Endpoint& ep, const std::vector<std::string>& filters,
                                       SessionOptions options) {
  std::unique_ptr<Session> s(new Session());
  s->sock_ = net::connect_to(ep);
  s->reader_ = std::make_unique<net::LineReader>(s->sock_);
  Json hello;
  hello["type"] = "hello";
  hello["analyzer_id"] = options.analyzer_id;
  if (options.hold) hello["hold"] = true;
  auto ack = s->request(hello);
  if (ack.value("type", "") != "ack") throw ProtocolError("hello refused: " + message_of(ack));
  s->protocol_version_ = ack.value("protocol_version", "");
  if (s->protocol_version_ != "1") throw ProtocolError("unsupported protocol version '" + s->protocol_version_ + "'");
  for (const auto& f : filters) s->subscribe(f);
  if (options.hold) s->resume();
  return s;
}

Session::~Session() {
  if (sock_.valid()) sock_.shutdown();
}

std::optional<std::string> Session::read_raw() {
  if (closed_) return std::nullopt;
  auto line = reader_->read_line();
  if (!line) {
    closed_ = true;
    return std::nullopt;
  }
  timings_.bytes += line->size() + 1;
  return line;
}

Json Session::request(const Json& msg) {
  if (closed_ || !sock_.send_all(to_line(msg))) throw ProtocolError("connection closed");
  while (true) {
    auto line = read_raw();
    if (!line) throw ProtocolError("connection closed while waiting for a reply");
    Json j;
    try {
      j = parse_line(*line);
    } catch (const DecodeError& e) {
      throw ProtocolError(std::string("bad line from server: ") + e.what());
    }
    auto type = j.value("type", "");
    if (type == "event" || type == "end") {
      pending_.push_back(std::move(*line));
      continue;
    }
    if (type == "ack" || type == "err" || type == "snapshot") return j;
    throw ProtocolError("unexpected message type '" + type + "'");
  }
}

std::optional<TraceEvent> Session::next() {
  while (!end_) {
    std::string line;
    if (!pending_.empty()) {
      line = std::move(pending_.front());
      pending_.pop_front();
    } else if (auto raw = read_raw()) {
      line = std::move(*raw);
    } else {
      return std::nullopt;
    }
    auto t0 = Clock::now();
    Json j;
    try {
      j = parse_line(line);
    } catch (const DecodeError& e) {
      throw ProtocolError(std::string("bad line from server: ") + e.what());
    }
    auto type = j.value("type", "");
    if (type == "end") {
      end_ = EndInfo{j.value("chrono", std::uint64_t{0}), j.value("solutions", std::int64_t{0})};
      timings_.t_decode_ns += ns_since(t0);
      return std::nullopt;
    }
    if (type != "event") continue;
    TraceEvent e;
    try {
      e = event_from_json(j);
    } catch (const DecodeError& err) {
      throw ProtocolError(std::string("bad event: ") + err.what());
    }
    timings_.t_decode_ns += ns_since(t0);
    ++timings_.events;
    return e;
  }
  return std::nullopt;
}

std::string Session::subscribe(const std::string& filter_source) {
  Json msg;
  msg["type"] = "subscribe";
  msg["filter"] = filter_source;
  auto r = request(msg);
  if (r.value("type", "") != "ack") throw SubscribeRejected(message_of(r));
  return r.value("id", "");
}

void Session::unsubscribe(const std::string& id) {
  Json msg;
  msg["type"] = "unsubscribe";
  msg["id"] = id;
  auto r = request(msg);
  if (r.value("type", "") != "ack") throw ProtocolError(message_of(r));
}

FullState Session::snapshot(std::optional<std::uint64_t> chrono) {
  Json msg;
  msg["type"] = "snapshot_req";
  if (chrono) msg["chrono"] = *chrono;
  auto r = request(msg);
  if (r.value("type", "") != "snapshot") throw ProtocolError(message_of(r));
  try {
    return state_from_json(r.at("state"));
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("bad snapshot: ") + e.what());
  }
}

std::uint64_t Session::pause() {
  auto r = request({{"type", "pause"}});
  if (r.value("type", "") != "ack") throw ProtocolError(message_of(r));
  return r.value("chrono", std::uint64_t{0});
}

std::uint64_t Session::resume() {
  auto r = request({{"type", "resume"}});
  if (r.value("type", "") != "ack") throw ProtocolError(message_of(r));
  return r.value("chrono", std::uint64_t{0});
}

void Session::bye() {
  if (closed_) return;
  try {
    request({{"type", "bye"}});
  } catch (const ProtocolError&) {
  }
  sock_.shutdown();
  closed_ = true;
}

// ---------------------------------------------------------------------------

void snapshot_resync(Session& session, MirrorState& mirror) {
  session.pause();
  auto s = session.snapshot();
  session.resume();
  mirror.reset(std::move(s));
}

bool rebuild(Session& session, MirrorState& mirror, const TraceEvent& e, bool auto_resync) {
  try {
    mirror.apply(e);
    return true;
  } catch (const DeltaInconsistent&) {
    if (!auto_resync) return false;
  }
  snapshot_resync(session, mirror);
  return true;
}

// ---------------------------------------------------------------------------

void ByrdPrinter::on_event(const TraceEvent& e) {
  if (auto line = clp::byrd_line(e)) lines_.push_back(std::move(*line));
}

std::string ByrdPrinter::report() const {
  std::string out;
  for (const auto& l : lines_) out += l + "\n";
  return out;
}

void DepthStats::on_event(const TraceEvent& e) {
  auto d = attr_int(e.attrs, "depth");
  if (!d) return;
  max_ = std::max(max_, *d);
  sum_ += *d;
  ++count_;
  ++hist_[*d];
}

std::string DepthStats::report() const {
  std::ostringstream out;
  out << "max_depth " << max_ << "\n";
  out << "mean_depth " << mean_depth() << "\n";
  for (const auto& [d, n] : hist_) out << "depth " << d << " " << n << "\n";
  return out.str();
}

void NodeCounter::on_event(const TraceEvent& e) {
  ++per_port_[std::string(port_name(e.port))];
  if (e.delta) {
    for (const auto& o : e.delta->ops)
      if (std::holds_alternative<op::AddSearchNode>(o)) ++nodes_;
  } else if (e.port == Port::choicePoint) {
    ++nodes_;
  }
}

std::string NodeCounter::report() const {
  std::ostringstream out;
  out << "search_nodes " << nodes_ << "\n";
  for (const auto& [p, n] : per_port_) out << "port " << p << " " << n << "\n";
  return out.str();
}

void SlowAnalyzer::on_event(const TraceEvent&) {
  ++events_;
  std::this_thread::sleep_for(delay_);
}

std::string SlowAnalyzer::report() const { return "events " + std::to_string(events_) + "\n"; }

std::unique_ptr<Analyzer> make_analyzer(const std::string& name, std::chrono::microseconds delay) {
  if (name == "byrd") return std::make_unique<ByrdPrinter>();
  if (name == "depth") return std::make_unique<DepthStats>();
  if (name == "nodes") return std::make_unique<NodeCounter>();
  if (name == "slow") return std::make_unique<SlowAnalyzer>(delay);
  if (name == "null") return std::make_unique<NullAnalyzer>();
  throw std::invalid_argument("unknown analyzer '" + name + "' (byrd, depth, nodes, slow, null)");
}

RunLoopResult run_loop(Session& session, Analyzer& analyzer, const RunLoopOptions& options) {
  auto wall0 = Clock::now();
  auto& t = session.timings();
  RunLoopResult result;
  std::optional<filter::MergedMatcher> refilter;
  if (!options.refilter.empty()) refilter = filter::merge(options.refilter);
  if (options.mirror) {
    auto t0 = Clock::now();
    snapshot_resync(session, result.mirror);
    t.t_rebuild_ns += ns_since(t0);
  }
  while (auto e = session.next()) {
    if (refilter) {
      auto t0 = Clock::now();
      bool keep = !refilter->match(*e).empty();
      t.t_filter_ns += ns_since(t0);
      if (!keep) continue;
    }
    if (options.mirror) {
      auto t0 = Clock::now();
      rebuild(session, result.mirror, *e, options.auto_resync);
      t.t_rebuild_ns += ns_since(t0);
    }
    auto t0 = Clock::now();
    analyzer.on_event(*e);
    t.t_exec_ns += ns_since(t0);
  }
  result.end = session.end_info();
  if (result.end) analyzer.on_end(*result.end);
  t.wall_ns += ns_since(wall0);
  return result;
}

}  // namespace tracelens::analyzer
