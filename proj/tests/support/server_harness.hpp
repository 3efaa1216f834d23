#pragma once

#include <memory>
#include <thread>

#include "tracelens/corpus.hpp"
#include "tracelens/driver.hpp"

namespace fixture {

/// A driver server on an ephemeral port, run on a background thread.
class ServerThread {
 public:
  ServerThread(const tracelens::corpus::Workload& w, tracelens::driver::DriverConfig config) {
    config.listen = tracelens::net::Endpoint{"127.0.0.1", 0};
    config.measure_prog = false;
    if (config.grace.count() == 0) config.grace = std::chrono::milliseconds(20000);
    if (config.linger == std::chrono::milliseconds(30000)) config.linger = std::chrono::milliseconds(5000);
    server_ = std::make_unique<tracelens::driver::Server>(tracelens::clp::Program::load(w.program),
                                                          tracelens::clp::parse_goal(w.goal), config);
    thread_ = std::thread([this] { report_ = server_->run(); });
  }
  ~ServerThread() {
    if (thread_.joinable()) {
      server_->stop();
      thread_.join();
    }
  }

  tracelens::net::Endpoint endpoint() const { return {"127.0.0.1", server_->port()}; }

  const tracelens::driver::ServerReport& join() {
    thread_.join();
    return report_;
  }

 private:
  std::unique_ptr<tracelens::driver::Server> server_;
  std::thread thread_;
  tracelens::driver::ServerReport report_;
};

inline tracelens::driver::DriverConfig config(tracelens::driver::Mode mode, int wait_clients,
                                             std::uint64_t checkpoint_every = 1000) {
  tracelens::driver::DriverConfig c;
  c.mode = mode;
  c.wait_clients = wait_clients;
  c.checkpoint_every = checkpoint_every;
  return c;
}

}  // namespace fixture
