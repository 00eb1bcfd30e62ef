#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>

#include <json.hpp>

#include "locoplan/sim.hpp"

namespace locoplan {

struct ServerOptions {
  std::string host = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  bool async_refine = true;    // refiner worker thread; false refines inside the tick
  bool realtime = true;        // pace ticks at the scenario dt
  double push_hz = 30.0;       // WebSocket snapshot rate cap
  bool start_paused = false;
  std::string runlog_path;     // written when the server stops
};

/// Serves a running simulation:
///   GET  /state      simulation state
///   GET  /graph      evaluated window graph
///   GET  /telemetry  refine records as JSON lines (?since=<tick>)
///   POST /obstacle   {"op": "add"|"move"|"remove", "id", "disc"|"box"}
///   POST /pause, POST /resume
///   PATCH /refiner   partial refiner configuration
///   GET  /ws         WebSocket snapshot push
/// Edits are queued and applied at the next tick boundary.
class SimServer {
 public:
  SimServer(std::unique_ptr<Simulation> sim, ServerOptions options);
  ~SimServer();
  SimServer(const SimServer&) = delete;
  SimServer& operator=(const SimServer&) = delete;

  /// Binds and starts the tick loop, refiner worker and network thread.
  /// Returns the bound port.
  unsigned short start();
  /// Stops all threads, finalizes and (optionally) writes the run log.
  void stop();
  /// Blocks until the simulation finishes or stop() is called.
  void wait_finished();

  /// In-process equivalents of the HTTP handlers.
  CommandResult submit(const WorldCommand& cmd, std::chrono::milliseconds timeout = std::chrono::seconds(5));
  nlohmann::json state() const;
  void set_paused(bool paused);
  RunLog run_log() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

/// Parses ":8080", "8080" or "host:8080".
void parse_listen_address(const std::string& text, std::string& host, unsigned short& port);

}  // namespace locoplan
