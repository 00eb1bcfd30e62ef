#include "locoplan/server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <condition_variable>
#include <functional>
#include <future>
#include <mutex>
#include <optional>
#include <thread>

#include "locoplan/errors.hpp"

namespace locoplan {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using Response = http::response<http::string_body>;

struct PendingCommand {
  WorldCommand cmd;
  std::function<void(const CommandResult&)> done;
};

struct SimServer::Impl {
  std::unique_ptr<Simulation> sim;
  ServerOptions options;
  mutable std::mutex mutex;  // guards sim, queue, paused
  std::condition_variable cv;
  std::vector<PendingCommand> queue;
  bool paused = false;
  std::atomic<bool> running{false};
  bool stopped = false;

  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::thread io_thread, tick_thread, worker_thread;

  void tick_loop();
  void worker_loop();
  void accept();
  void enqueue(WorldCommand cmd, std::function<void(const CommandResult&)> done);
  nlohmann::json snapshot() const;
  Response handle(const http::request<http::string_body>& req, std::function<void(Response)> deferred, bool& is_deferred);
};

namespace {

Response json_response(http::status status, const nlohmann::json& body, unsigned version, bool keep_alive) {
  Response res{status, version};
  res.set(http::field::content_type, "application/json");
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(keep_alive);
  res.body() = body.dump();
  res.prepare_payload();
  return res;
}

Response error_response(http::status status, const std::string& msg, unsigned version, bool keep_alive) {
  return json_response(status, {{"error", msg}}, version, keep_alive);
}

Response command_response(const CommandResult& r, unsigned version, bool keep_alive) {
  if (r.ok) return json_response(http::status::ok, {{"ok", true}, {"revision", r.revision}}, version, keep_alive);
  return json_response(r.not_found ? http::status::not_found : http::status::conflict,
                       {{"ok", false}, {"error", r.error}}, version, keep_alive);
}

std::string path_of(beast::string_view target, std::string& query) {
  const std::string t(target);
  const auto q = t.find('?');
  query = q == std::string::npos ? "" : t.substr(q + 1);
  return q == std::string::npos ? t : t.substr(0, q);
}

long query_long(const std::string& query, const std::string& key, long fallback) {
  const std::string needle = key + "=";
  std::size_t pos = 0;
  while (pos < query.size()) {
    const auto end = query.find('&', pos);
    const std::string part = query.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    if (part.rfind(needle, 0) == 0) {
      try {
        return std::stol(part.substr(needle.size()));
      } catch (const std::exception&) {
        return fallback;
      }
    }
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return fallback;
}

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, SimServer::Impl& impl)
      : ws_(std::move(socket)), timer_(ws_.get_executor()), impl_(impl) {}

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->read();
      self->schedule();
    });
  }

 private:
  void read() {
    ws_.async_read(in_, [self = shared_from_this()](beast::error_code ec, std::size_t n) {
      if (ec) {
        self->closed_ = true;
        self->timer_.cancel();
        return;
      }
      self->in_.consume(n);  // client messages are ignored
      self->read();
    });
  }

  void schedule() {
    const double hz = std::max(1e-3, std::min(impl_.options.push_hz, 30.0));
    timer_.expires_after(std::chrono::microseconds(static_cast<long>(1e6 / hz)));
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (ec || self->closed_) return;
      self->push();
    });
  }

  void push() {
    std::string next = impl_.snapshot().dump();
    if (next == out_) {  // nothing changed since the last push
      schedule();
      return;
    }
    out_ = std::move(next);
    ws_.text(true);
    ws_.async_write(net::buffer(out_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed_ = true;
        return;
      }
      self->schedule();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  net::steady_timer timer_;
  beast::flat_buffer in_;
  std::string out_;
  SimServer::Impl& impl_;
  bool closed_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, SimServer::Impl& impl) : stream_(std::move(socket)), impl_(impl) {}

  void run() {
    net::dispatch(stream_.get_executor(), [self = shared_from_this()] { self->read(); });
  }

 private:
  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->on_read(ec);
    });
  }

  void on_read(beast::error_code ec) {
    if (ec == http::error::end_of_stream) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (ec) return;
    if (websocket::is_upgrade(req_)) {
      std::string query;
      if (path_of(req_.target(), query) != "/ws") {
        send(error_response(http::status::not_found, "websocket endpoint is /ws", req_.version(), false));
        return;
      }
      stream_.expires_never();
      std::make_shared<WsSession>(stream_.release_socket(), impl_)->run(std::move(req_));
      return;
    }
    bool deferred = false;
    auto self = shared_from_this();
    auto later = [self](Response res) {
      net::post(self->stream_.get_executor(), [self, res = std::move(res)]() mutable { self->send(std::move(res)); });
    };
    Response res = impl_.handle(req_, later, deferred);
    if (!deferred) send(std::move(res));
  }

  void send(Response res) {
    auto sp = std::make_shared<Response>(std::move(res));
    http::async_write(stream_, *sp, [self = shared_from_this(), sp](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (sp->need_eof()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->read();
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  SimServer::Impl& impl_;
};

}  // namespace

nlohmann::json SimServer::Impl::snapshot() const {
  std::lock_guard lock(mutex);
  nlohmann::json s = sim->snapshot_json();
  s["paused"] = paused;
  return s;
}

void SimServer::Impl::enqueue(WorldCommand cmd, std::function<void(const CommandResult&)> done) {
  std::lock_guard lock(mutex);
  queue.push_back({std::move(cmd), std::move(done)});
  cv.notify_all();
}

void SimServer::Impl::tick_loop() {
  const double dt = sim->scenario().sim.dt;
  const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(dt));
  auto next = std::chrono::steady_clock::now();
  while (running) {
    if (options.realtime) {
      next += period;
      const auto now = std::chrono::steady_clock::now();
      if (next < now - std::chrono::seconds(1)) next = now;  // fell far behind
      std::unique_lock lock(mutex);
      cv.wait_until(lock, next, [&] { return !running.load(); });
    }
    if (!running) break;
    std::vector<PendingCommand> batch;
    std::vector<CommandResult> results;
    {
      std::unique_lock lock(mutex);
      const bool advance = !paused && !sim->finished();
      if (!advance && queue.empty()) {
        cv.notify_all();
        if (!options.realtime) cv.wait_for(lock, std::chrono::milliseconds(5));
        continue;
      }
      batch.swap(queue);
      std::vector<WorldCommand> cmds;
      for (const auto& p : batch) cmds.push_back(p.cmd);
      sim->tick(advance ? dt : 0.0, cmds, &results, !options.async_refine);
      cv.notify_all();
    }
    for (std::size_t k = 0; k < batch.size(); ++k)
      if (batch[k].done) batch[k].done(results[k]);
  }
}

void SimServer::Impl::worker_loop() {
  while (running) {
    RefineJob job;
    {
      std::lock_guard lock(mutex);
      job = sim->refine_job();
    }
    if (job.motion < 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
      continue;
    }
    RefineOutcome out = compute_refinement(job.horizon, sim->scenario().robot, job.world, job.config);
    {
      std::lock_guard lock(mutex);
      sim->publish_async(job, out);
    }
    if (!out.ran) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
}

void SimServer::Impl::accept() {
  acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    std::make_shared<HttpSession>(std::move(socket), *this)->run();
    accept();
  });
}

Response SimServer::Impl::handle(const http::request<http::string_body>& req, std::function<void(Response)> deferred,
                                 bool& is_deferred) {
  const unsigned v = req.version();
  const bool ka = req.keep_alive();
  std::string query;
  const std::string path = path_of(req.target(), query);
  const auto method = req.method();

  if (method == http::verb::options) {
    Response res{http::status::no_content, v};
    res.set(http::field::access_control_allow_origin, "*");
    res.set(http::field::access_control_allow_methods, "GET, POST, PATCH, OPTIONS");
    res.set(http::field::access_control_allow_headers, "Content-Type");
    res.keep_alive(ka);
    res.prepare_payload();
    return res;
  }
  auto parse_body = [&](nlohmann::json& out) -> std::optional<Response> {
    try {
      out = nlohmann::json::parse(req.body().empty() ? std::string("{}") : req.body());
      return std::nullopt;
    } catch (const nlohmann::json::parse_error&) {
      return error_response(http::status::bad_request, "body is not valid JSON", v, ka);
    }
  };

  try {
    if (path == "/state") {
      if (method != http::verb::get) return error_response(http::status::method_not_allowed, "use GET", v, ka);
      std::lock_guard lock(mutex);
      nlohmann::json s = sim->state_json();
      s["paused"] = paused;
      return json_response(http::status::ok, s, v, ka);
    }
    if (path == "/graph") {
      if (method != http::verb::get) return error_response(http::status::method_not_allowed, "use GET", v, ka);
      std::lock_guard lock(mutex);
      return json_response(http::status::ok, sim->graph_json(), v, ka);
    }
    if (path == "/telemetry") {
      if (method != http::verb::get) return error_response(http::status::method_not_allowed, "use GET", v, ka);
      const long since = query_long(query, "since", 0);
      std::string body;
      {
        std::lock_guard lock(mutex);
        for (const auto& t : sim->log().ticks) {
          if (t.at("tick").get<long>() <= since) continue;
          for (const auto& r : t.at("refine")) {
            nlohmann::json line = r;
            line["tick"] = t.at("tick");
            body += line.dump();
            body += '\n';
          }
        }
      }
      Response res{http::status::ok, v};
      res.set(http::field::content_type, "application/x-ndjson");
      res.set(http::field::access_control_allow_origin, "*");
      res.keep_alive(ka);
      res.body() = std::move(body);
      res.prepare_payload();
      return res;
    }
    if (path == "/obstacle") {
      if (method != http::verb::post) return error_response(http::status::method_not_allowed, "use POST", v, ka);
      nlohmann::json body;
      if (auto err = parse_body(body)) return *err;
      WorldCommand cmd;
      try {
        cmd = world_command_from_json(body, "", false);
      } catch (const FormatError& e) {
        return error_response(http::status::bad_request, e.what(), v, ka);
      }
      is_deferred = true;
      enqueue(std::move(cmd), [deferred, v, ka](const CommandResult& r) { deferred(command_response(r, v, ka)); });
      return {};
    }
    if (path == "/pause" || path == "/resume") {
      if (method != http::verb::post) return error_response(http::status::method_not_allowed, "use POST", v, ka);
      std::lock_guard lock(mutex);
      paused = path == "/pause";
      cv.notify_all();
      return json_response(http::status::ok, {{"paused", paused}}, v, ka);
    }
    if (path == "/refiner") {
      if (method == http::verb::get) {
        std::lock_guard lock(mutex);
        return json_response(http::status::ok, to_json(sim->refiner_config()), v, ka);
      }
      if (method != http::verb::patch) return error_response(http::status::method_not_allowed, "use PATCH", v, ka);
      nlohmann::json body;
      if (auto err = parse_body(body)) return *err;
      std::lock_guard lock(mutex);
      try {
        sim->patch_refiner(body);
      } catch (const FormatError& e) {
        return error_response(http::status::bad_request, e.what(), v, ka);
      }
      return json_response(http::status::ok, to_json(sim->refiner_config()), v, ka);
    }
    return error_response(http::status::not_found, "no route for " + path, v, ka);
  } catch (const std::exception& e) {
    return error_response(http::status::internal_server_error, e.what(), v, ka);
  }
}

SimServer::SimServer(std::unique_ptr<Simulation> sim, ServerOptions options) : impl_(std::make_unique<Impl>()) {
  if (!sim) throw std::invalid_argument("server needs a simulation");
  impl_->sim = std::move(sim);
  impl_->options = std::move(options);
  impl_->paused = impl_->options.start_paused;
}

SimServer::~SimServer() {
  try {
    stop();
  } catch (...) {
  }
}

unsigned short SimServer::start() {
  Impl& m = *impl_;
  const auto address = net::ip::make_address(m.options.host);
  const tcp::endpoint ep{address, m.options.port};
  m.acceptor.open(ep.protocol());
  m.acceptor.set_option(net::socket_base::reuse_address(true));
  m.acceptor.bind(ep);
  m.acceptor.listen(net::socket_base::max_listen_connections);
  const unsigned short port = m.acceptor.local_endpoint().port();
  m.running = true;
  m.accept();
  m.io_thread = std::thread([&m] { m.ioc.run(); });
  m.tick_thread = std::thread([&m] { m.tick_loop(); });
  if (m.options.async_refine) m.worker_thread = std::thread([&m] { m.worker_loop(); });
  return port;
}

void SimServer::stop() {
  Impl& m = *impl_;
  {
    std::lock_guard lock(m.mutex);
    if (m.stopped) return;
    m.stopped = true;
    m.running = false;
    m.cv.notify_all();
  }
  if (m.tick_thread.joinable()) m.tick_thread.join();
  if (m.worker_thread.joinable()) m.worker_thread.join();
  net::post(m.ioc, [&m] {
    beast::error_code ec;
    m.acceptor.close(ec);
  });
  m.ioc.stop();
  if (m.io_thread.joinable()) m.io_thread.join();
  // answer commands that never reached a tick
  for (auto& p : m.queue)
    if (p.done) p.done({false, 0, "server stopped", false});
  m.queue.clear();
  m.sim->finish_log();
  if (!m.options.runlog_path.empty()) m.sim->log().write(m.options.runlog_path);
}

void SimServer::wait_finished() {
  std::unique_lock lock(impl_->mutex);
  impl_->cv.wait(lock, [&] { return impl_->sim->finished() || impl_->stopped; });
}

CommandResult SimServer::submit(const WorldCommand& cmd, std::chrono::milliseconds timeout) {
  auto promise = std::make_shared<std::promise<CommandResult>>();
  auto future = promise->get_future();
  impl_->enqueue(cmd, [promise](const CommandResult& r) { promise->set_value(r); });
  if (future.wait_for(timeout) != std::future_status::ready) return {false, 0, "timed out", false};
  return future.get();
}

nlohmann::json SimServer::state() const {
  std::lock_guard lock(impl_->mutex);
  nlohmann::json s = impl_->sim->state_json();
  s["paused"] = impl_->paused;
  return s;
}

void SimServer::set_paused(bool paused) {
  std::lock_guard lock(impl_->mutex);
  impl_->paused = paused;
  impl_->cv.notify_all();
}

RunLog SimServer::run_log() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->sim->log();
}

void parse_listen_address(const std::string& text, std::string& host, unsigned short& port) {
  const auto colon = text.rfind(':');
  std::string h = colon == std::string::npos ? "" : text.substr(0, colon);
  const std::string p = colon == std::string::npos ? text : text.substr(colon + 1);
  int value = -1;
  try {
    std::size_t used = 0;
    value = std::stoi(p, &used);
    if (used != p.size()) value = -1;
  } catch (const std::exception&) {
    value = -1;
  }
  if (value < 0 || value > 65535) throw std::invalid_argument("invalid listen address '" + text + "'");
  host = h.empty() ? "127.0.0.1" : h;
  port = static_cast<unsigned short>(value);
}

}  // namespace locoplan
