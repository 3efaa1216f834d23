#pragma once

// Client side: sessions with the driver, a mirror of the full state rebuilt
// from deltas, and the reference analyzers.

#include <chrono>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracelens/codec.hpp"
#include "tracelens/filter.hpp"
#include "tracelens/socket.hpp"
#include "tracelens/trace_model.hpp"

namespace tracelens::analyzer {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The server refused a subscription; the message is the server's text.
class SubscribeRejected : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

struct AnalyzerTimings {
  std::int64_t t_filter_ns = 0;
  std::int64_t t_decode_ns = 0;
  std::int64_t t_rebuild_ns = 0;
  std::int64_t t_exec_ns = 0;
  std::int64_t wall_ns = 0;  // whole session loop
  std::uint64_t events = 0;
  std::uint64_t bytes = 0;
};

Json timings_to_json(const AnalyzerTimings& t);
AnalyzerTimings timings_from_json(const Json& j);

class MirrorState {
 public:
  /// Unsynchronised until reset.
  MirrorState() = default;
  explicit MirrorState(FullState s) { reset(std::move(s)); }

  void reset(FullState s);
  /// Applies the event's delta (none: chrono advance only). Events at or
  /// before the last applied chrono are ignored and false is returned.
  /// Throws DeltaInconsistent (also for a delta following a gap), after
  /// which the mirror is stale.
  bool apply(const TraceEvent& e);

  const FullState& state() const { return state_; }
  Chrono last_applied_chrono() const { return state_.chrono; }
  std::uint64_t gaps_seen() const { return gaps_; }
  bool synced() const { return synced_; }
  bool stale() const { return stale_; }

 private:
  FullState state_;
  std::uint64_t gaps_ = 0;
  bool synced_ = false;
  bool stale_ = false;
};

struct SessionOptions {
  std::string analyzer_id = "analyzer";
  /// Keeps the engine paused from hello until every filter is acked.
  bool hold = true;
};

struct EndInfo {
  std::uint64_t chrono = 0;
  std::int64_t solutions = 0;
};

class Session {
 public:
  /// Handshake and subscriptions. Throws net::ConnectError, SubscribeRejected
  /// or ProtocolError.
  static std::unique_ptr<Session> open(const net::Endpoint& ep, const std::vector<std::string>& filters,
                                       SessionOptions options = {});
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// Next event; nullopt once `end` arrived or the server went away.
  std::optional<TraceEvent> next();
  bool ended() const { return end_.has_value(); }
  const std::optional<EndInfo>& end_info() const { return end_; }

  /// Returns the subscription id.
  std::string subscribe(const std::string& filter_source);
  void unsubscribe(const std::string& id);
  /// Live state when paused, otherwise the latest checkpoint, or the
  /// checkpoint at `chrono` when given.
  FullState snapshot(std::optional<std::uint64_t> chrono = {});
  /// Both return the engine chrono at the boundary.
  std::uint64_t pause();
  std::uint64_t resume();
  void bye();

  const std::string& protocol_version() const { return protocol_version_; }
  AnalyzerTimings& timings() { return timings_; }

 private:
  Session() = default;
  Json request(const Json& msg);
  std::optional<std::string> read_raw();

  net::Socket sock_;
  std::unique_ptr<net::LineReader> reader_;
  std::deque<std::string> pending_;  // event lines read while waiting for a reply
  std::optional<EndInfo> end_;
  std::string protocol_version_;
  AnalyzerTimings timings_;
  bool closed_ = false;
};

/// Pauses, takes the live state, resumes; the mirror then continues from
/// the pause boundary.
void snapshot_resync(Session& session, MirrorState& mirror);

/// Feeds one event to the mirror, resyncing on inconsistency when asked.
/// Returns true when the mirror is in step with the event afterwards.
bool rebuild(Session& session, MirrorState& mirror, const TraceEvent& e, bool auto_resync = true);

class Analyzer {
 public:
  virtual ~Analyzer() = default;
  virtual void on_event(const TraceEvent& e) = 0;
  virtual void on_end(const EndInfo& end) { (void)end; }
  virtual std::string report() const = 0;
};

/// Listing lines of the Byrd ports.
class ByrdPrinter final : public Analyzer {
 public:
  void on_event(const TraceEvent& e) override;
  std::string report() const override;
  const std::vector<std::string>& lines() const { return lines_; }

 private:
  std::vector<std::string> lines_;
};

/// Proof-tree depth seen on events carrying a depth.
class DepthStats final : public Analyzer {
 public:
  void on_event(const TraceEvent& e) override;
  std::string report() const override;
  std::int64_t max_depth() const { return max_; }
  double mean_depth() const { return count_ ? static_cast<double>(sum_) / static_cast<double>(count_) : 0.0; }
  const std::map<std::int64_t, std::uint64_t>& histogram() const { return hist_; }

 private:
  std::int64_t max_ = 0;
  std::int64_t sum_ = 0;
  std::uint64_t count_ = 0;
  std::map<std::int64_t, std::uint64_t> hist_;
};

/// Search-tree nodes (root included), counted from the deltas or, without
/// them, from choicePoint events.
class NodeCounter final : public Analyzer {
 public:
  void on_event(const TraceEvent& e) override;
  std::string report() const override;
  std::uint64_t nodes() const { return nodes_; }
  const std::map<std::string, std::uint64_t>& per_port() const { return per_port_; }

 private:
  std::uint64_t nodes_ = 1;
  std::map<std::string, std::uint64_t> per_port_;
};

/// Sleeps a fixed delay per event.
class SlowAnalyzer final : public Analyzer {
 public:
  explicit SlowAnalyzer(std::chrono::microseconds delay) : delay_(delay) {}
  void on_event(const TraceEvent& e) override;
  std::string report() const override;
  std::uint64_t events() const { return events_; }

 private:
  std::chrono::microseconds delay_;
  std::uint64_t events_ = 0;
};

/// Only counts events; stands in for a client that does no work.
class NullAnalyzer final : public Analyzer {
 public:
  void on_event(const TraceEvent&) override { ++events_; }
  std::string report() const override { return "events " + std::to_string(events_) + "\n"; }
  std::uint64_t events() const { return events_; }

 private:
  std::uint64_t events_ = 0;
};

/// Throws std::invalid_argument for unknown names.
std::unique_ptr<Analyzer> make_analyzer(const std::string& name, std::chrono::microseconds delay = {});

struct RunLoopOptions {
  /// Client-side re-filtering; events matching none of these are dropped.
  std::vector<filter::FilterSpec> refilter;
  /// Maintain a mirror (events need deltas).
  bool mirror = false;
  bool auto_resync = true;
};

struct RunLoopResult {
  std::optional<EndInfo> end;
  MirrorState mirror;
};

/// Consumes the session to its end, timing each client-side stage.
RunLoopResult run_loop(Session& session, Analyzer& analyzer, const RunLoopOptions& options = {});

}  // namespace tracelens::analyzer
