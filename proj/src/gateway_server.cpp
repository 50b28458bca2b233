// Beast transport for the gateway: synchronous, one thread per connection.
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <sys/socket.h>

#include <cstdio>
#include <list>

#include "hbci/gateway.hpp"

namespace hbci {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;

struct GatewayServer::Impl {
  Broadcaster& broadcaster;
  LiveGaze& gaze;
  json config_json;
  std::size_t buffer;

  asio::io_context ioc;
  std::unique_ptr<tcp::acceptor> acceptor;
  std::thread accept_thread;
  std::atomic<bool> stopping{false};

  std::mutex mutex;
  std::list<std::thread> sessions;
  std::vector<int> fds;  // native handles of live sockets, for shutdown
  int gaze_clients = 0;

  Impl(Broadcaster& b, LiveGaze& g, json c, std::size_t n)
      : broadcaster(b), gaze(g), config_json(std::move(c)), buffer(n) {}

  void track(int fd) {
    std::lock_guard lock(mutex);
    fds.push_back(fd);
  }
  void untrack(int fd) {
    std::lock_guard lock(mutex);
    std::erase(fds, fd);
  }

  void gaze_attached(int delta) {
    std::lock_guard lock(mutex);
    gaze_clients += delta;
    gaze.set_connected(gaze_clients > 0);
  }

  void accept_loop() {
    for (;;) {
      tcp::socket socket(ioc);
      beast::error_code ec;
      acceptor->accept(socket, ec);
      if (stopping) return;
      if (ec) continue;
      std::lock_guard lock(mutex);
      sessions.emplace_back([this, s = std::move(socket)]() mutable { session(std::move(s)); });
    }
  }

  void session(tcp::socket socket) {
    const int fd = socket.native_handle();
    track(fd);
    try {
      beast::flat_buffer buf;
      http::request<http::string_body> req;
      http::read(socket, buf, req);
      const std::string target(req.target());
      if (websocket::is_upgrade(req) && (target == "/stream" || target == "/gaze")) {
        websocket::stream<tcp::socket> ws(std::move(socket));
        ws.accept(req);
        if (target == "/stream") {
          stream_session(ws);
        } else {
          gaze_session(ws);
        }
      } else {
        http_reply(socket, req, target);
      }
    } catch (const std::exception&) {
      // peer went away or the server is stopping
    }
    untrack(fd);
  }

  void http_reply(tcp::socket& socket, const http::request<http::string_body>& req,
                  const std::string& target) {
    http::response<http::string_body> res;
    res.version(req.version());
    res.keep_alive(false);
    res.set(http::field::content_type, "application/json");
    if (req.method() != http::verb::get) {
      res.result(http::status::method_not_allowed);
      res.body() = json{{"error", "method not allowed"}}.dump();
    } else if (target == "/config") {
      res.result(http::status::ok);
      res.body() = config_json.dump();
    } else if (target == "/healthz") {
      res.result(http::status::ok);
      res.body() = json{{"status", "ok"},
                        {"seq", broadcaster.last_seq()},
                        {"subscribers", broadcaster.subscriber_count()}}
                       .dump();
    } else {
      res.result(http::status::not_found);
      res.body() = json{{"error", "not found"}, {"path", target}}.dump();
    }
    res.prepare_payload();
    http::write(socket, res);
    beast::error_code ec;
    socket.shutdown(tcp::socket::shutdown_send, ec);
  }

  void stream_session(websocket::stream<tcp::socket>& ws) {
    auto sub = broadcaster.subscribe(buffer);
    struct Closer {
      std::shared_ptr<Subscription> s;
      ~Closer() { s->close(); }
    } closer{sub};
    ws.text(true);
    while (!stopping) {
      auto frame = sub->pop(std::chrono::milliseconds(100));
      if (frame) {
        ws.write(asio::buffer(*frame));
        continue;
      }
      if (sub->overflowed()) {
        ws.close({websocket::close_code::policy_error, "subscriber fell behind"});
        return;
      }
      if (sub->closed()) break;
    }
    beast::error_code ec;
    ws.close(websocket::close_code::going_away, ec);
  }

  void gaze_session(websocket::stream<tcp::socket>& ws) {
    ws.text(true);
    // Acks arrive from the pipeline thread; writes are serialised here.
    auto write_mutex = std::make_shared<std::mutex>();
    auto alive = std::make_shared<std::atomic<bool>>(true);
    auto reply = [&ws, write_mutex, alive](const std::string& text) {
      std::lock_guard lock(*write_mutex);
      if (!*alive) return;
      beast::error_code ec;
      ws.write(asio::buffer(text), ec);
    };
    gaze_attached(+1);
    try {
      while (!stopping) {
        beast::flat_buffer buf;
        ws.read(buf);
        handle_gaze_message(beast::buffers_to_string(buf.data()), gaze, reply);
      }
    } catch (...) {
      std::lock_guard lock(*write_mutex);
      *alive = false;
      gaze_attached(-1);
      throw;
    }
    {
      std::lock_guard lock(*write_mutex);
      *alive = false;
    }
    gaze_attached(-1);
  }
};

GatewayServer::GatewayServer(Broadcaster& broadcaster, LiveGaze& gaze,
                             json config_json, std::size_t subscriber_buffer)
    : impl_(std::make_unique<Impl>(broadcaster, gaze, std::move(config_json),
                                   subscriber_buffer)) {}

GatewayServer::~GatewayServer() { stop(); }

std::uint16_t GatewayServer::start(std::uint16_t port, const std::string& address) {
  if (impl_->acceptor) throw Error(ErrorCode::Gateway, "gateway already started");
  try {
    const tcp::endpoint ep(asio::ip::make_address(address), port);
    auto acceptor = std::make_unique<tcp::acceptor>(impl_->ioc);
    acceptor->open(ep.protocol());
    acceptor->set_option(asio::socket_base::reuse_address(true));
    acceptor->bind(ep);
    acceptor->listen();
    impl_->acceptor = std::move(acceptor);
  } catch (const boost::system::system_error& e) {
    throw Error(ErrorCode::Gateway, "cannot listen on " + address + ":" +
                                        std::to_string(port) + ": " + e.what());
  }
  impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
  return impl_->acceptor->local_endpoint().port();
}

void GatewayServer::stop() {
  if (!impl_->acceptor || impl_->stopping.exchange(true)) return;
  beast::error_code ec;
  // Unblock accept() and every blocking read/write.
  ::shutdown(impl_->acceptor->native_handle(), SHUT_RDWR);
  impl_->acceptor->close(ec);
  if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  {
    std::lock_guard lock(impl_->mutex);
    for (int fd : impl_->fds) ::shutdown(fd, SHUT_RDWR);
  }
  std::list<std::thread> sessions;
  {
    std::lock_guard lock(impl_->mutex);
    sessions.swap(impl_->sessions);
  }
  for (auto& t : sessions) t.join();
}

LiveService::LiveService(AppConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      seed_(seed),
      broadcaster_(config_.gateway.max_frame_bytes),
      gaze_(config_.stimuli),
      publisher_(broadcaster_, config_),
      server_(broadcaster_, gaze_, config_to_json(config_), config_.gateway.subscriber_buffer) {
  // No console attached yet: the pipeline renders Rest and issues no decisions.
  gaze_.set_connected(false);
}

LiveService::~LiveService() { stop(); }

std::uint16_t LiveService::start(std::uint16_t port, const std::string& address) {
  const std::uint16_t bound = server_.start(port, address);
  pipeline_ = std::thread([this] {
    LiveOptions opts;
    opts.realtime = true;
    opts.stop = &stop_;
    try {
      run_live(config_, seed_, gaze_, &publisher_, opts);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "live pipeline stopped: %s\n", e.what());
    }
  });
  return bound;
}

void LiveService::stop() {
  stop_ = true;
  if (pipeline_.joinable()) pipeline_.join();
  server_.stop();
}

void LiveService::wait() {
  if (pipeline_.joinable()) pipeline_.join();
}

}  // namespace hbci
