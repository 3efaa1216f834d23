#pragma once

// The tracer driver. `DriverCore` turns engine events into per-client lines
// (matching, attribute extraction, encoding); `Server` wraps it with the TCP
// protocol, pause/resume, checkpoints and the engine loop.

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tracelens/codec.hpp"
#include "tracelens/engine.hpp"
#include "tracelens/filter.hpp"
#include "tracelens/socket.hpp"

namespace tracelens::driver {

inline constexpr const char* kProtocolVersion = "1";

enum class Mode { off, full_broadcast, driven };
std::string_view mode_name(Mode m);
/// Throws std::invalid_argument.
Mode mode_from_name(std::string_view s);

using ClientId = std::uint64_t;

/// Copy of `e` holding only the attribute groups in `wanted`; the delta is
/// kept only when `delta` is wanted.
TraceEvent extract(const TraceEvent& e, const std::set<AttrGroup>& wanted, std::vector<std::string> tags);

struct SubscriptionStats {
  std::uint64_t events = 0;
  std::uint64_t bytes = 0;
};

struct CoreCounters {
  std::uint64_t events_in = 0;
  std::uint64_t events_out = 0;  // event lines produced
  std::uint64_t bytes_out = 0;
  std::int64_t t_cond_ns = 0;
  std::int64_t t_extract_ns = 0;
  std::int64_t t_encode_ns = 0;
};

class DriverCore {
 public:
  struct Outgoing {
    ClientId client;
    std::string line;
  };

  explicit DriverCore(Mode mode) : mode_(mode) {}

  Mode mode() const { return mode_; }
  void add_client(ClientId c);
  /// Drops the client and its subscriptions.
  void remove_client(ClientId c);
  /// Throws filter::DuplicateId when the client already uses the id.
  void subscribe(ClientId c, const filter::FilterSpec& spec);
  /// Returns false when the client has no such subscription.
  bool unsubscribe(ClientId c, const std::string& id);
  std::vector<std::string> subscriptions(ClientId c) const;

  /// Appends one line per receiving client.
  void process(const TraceEvent& e, std::vector<Outgoing>& out);

  const CoreCounters& counters() const { return counters_; }
  std::uint64_t predicate_evaluations() const { return evaluations_ + matcher_.predicate_evaluations(); }
  /// Keyed by (client, subscription id).
  const std::map<std::pair<ClientId, std::string>, SubscriptionStats>& subscription_stats() const { return stats_; }

 private:
  void rebuild();

  Mode mode_;
  std::set<ClientId> clients_;
  std::map<ClientId, std::map<std::string, filter::FilterSpec>> subs_;
  filter::MergedMatcher matcher_;
  std::uint64_t evaluations_ = 0;  // from matchers replaced by rebuilds
  std::map<std::string, std::pair<ClientId, std::string>> key_owner_;
  CoreCounters counters_;
  std::map<std::pair<ClientId, std::string>, SubscriptionStats> stats_;
};

struct DriverConfig {
  Mode mode = Mode::driven;
  std::uint64_t checkpoint_every = 1000;
  net::Endpoint listen;
  int wait_clients = 0;
  std::chrono::milliseconds grace{0};
  std::chrono::milliseconds linger{30000};
  std::size_t queue_capacity = 256;
  std::size_t keep_checkpoints = 64;
  bool measure_prog = true;
  std::vector<filter::FilterSpec> default_filters;  // installed for every client at hello
};

struct SubscriptionReport {
  std::string client;
  std::string id;
  std::uint64_t events = 0;
  std::uint64_t bytes = 0;
};

struct ServerReport {
  std::string mode;
  std::int64_t t_prog_ns = 0;
  std::int64_t t_engine_ns = 0;
  std::int64_t t_core_ns = 0;
  std::int64_t t_cond_ns = 0;
  std::int64_t t_extract_ns = 0;
  std::int64_t t_encode_and_com_ns = 0;
  std::int64_t wall_ns = 0;
  std::uint64_t engine_events = 0;
  std::uint64_t events_emitted = 0;
  std::uint64_t bytes_emitted = 0;
  std::uint64_t predicate_evaluations = 0;
  std::int64_t solutions = 0;
  std::uint64_t final_chrono = 0;
  std::uint64_t clients = 0;
  std::vector<SubscriptionReport> subscriptions;
};

Json report_to_json(const ServerReport& r);
ServerReport report_from_json(const Json& j);

/// Wall time of a tracing-off run to completion, best of three.
std::int64_t measure_prog_ns(const clp::Program& program, const clp::Goal& goal);

class Server {
 public:
  /// Binds immediately; throws net::BindError.
  Server(clp::Program program, clp::Goal goal, DriverConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::uint16_t port() const;
  /// Serves until the engine has finished and clients left (or linger ran out).
  ServerReport run();
  /// Asks a running server to wind down; callable from any thread.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tracelens::driver
