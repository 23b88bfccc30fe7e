#include "guesswhich/service/server.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <sstream>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "guesswhich/error.hpp"

namespace guesswhich::service {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

class WebsocketConnection : public std::enable_shared_from_this<WebsocketConnection> {
 public:
  WebsocketConnection(tcp::socket socket, Orchestrator& orchestrator, ConnectionHub& hub)
      : ws_(std::move(socket)), orchestrator_(orchestrator), hub_(hub) {}

  void start(http::request<http::string_body> upgrade) {
    id_ = hub_.add(weak_from_this());
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(upgrade, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return self->close();
      self->read();
    });
  }

  /// Thread-safe; delivery happens on the connection's executor.
  void send(std::string text) {
    net::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)]() mutable {
      self->outbox_.push_back(std::move(text));
      if (self->outbox_.size() == 1) self->write_next();
    });
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      self->handle(beast::buffers_to_string(self->buffer_.data()));
      self->buffer_.consume(self->buffer_.size());
      self->read();
    });
  }

  void handle(const std::string& text) {
    try {
      orchestrator_.route_client_message(id_, parse_client_message(text));
    } catch (const Error& e) {
      ServerMessage m{ServerType::Error, {}, 0, {{"code", to_string(e.code())}, {"message", e.what()}}};
      send(to_json(m).dump());
    }
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      self->outbox_.pop_front();
      if (!self->outbox_.empty()) self->write_next();
    });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    orchestrator_.disconnect(id_);
    hub_.remove(id_);
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  Orchestrator& orchestrator_;
  ConnectionHub& hub_;
  ConnectionId id_ = 0;
  bool closed_ = false;
};

Orchestrator::Sink ConnectionHub::sink() {
  return [this](ConnectionId id, const ServerMessage& msg) {
    std::shared_ptr<WebsocketConnection> connection;
    {
      std::lock_guard lock(mutex_);
      auto it = connections_.find(id);
      if (it != connections_.end()) connection = it->second.lock();
    }
    if (connection) connection->send(to_json(msg).dump());
  };
}

ConnectionId ConnectionHub::add(std::weak_ptr<WebsocketConnection> connection) {
  std::lock_guard lock(mutex_);
  const auto id = next_id_++;
  connections_[id] = std::move(connection);
  return id;
}

void ConnectionHub::remove(ConnectionId id) {
  std::lock_guard lock(mutex_);
  connections_.erase(id);
}

std::size_t ConnectionHub::size() const {
  std::lock_guard lock(mutex_);
  return connections_.size();
}

std::optional<std::filesystem::path> find_image_file(const std::filesystem::path& dir, const std::string& image_id) {
  if (dir.empty() || image_id.empty() || image_id.find('/') != std::string::npos ||
      image_id.find('\\') != std::string::npos || image_id.find("..") != std::string::npos)
    return std::nullopt;
  for (const char* ext : {"", ".jpg", ".jpeg", ".png", ".webp", ".gif"}) {
    auto candidate = dir / (image_id + ext);
    std::error_code ec;
    if (std::filesystem::is_regular_file(candidate, ec)) return candidate;
  }
  return std::nullopt;
}

namespace {

std::string_view mime_type(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  if (ext == ".html") return "text/html";
  if (ext == ".js") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  return "application/octet-stream";
}

std::optional<std::string> read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket socket, const ServerOptions& options, Orchestrator& orchestrator, ConnectionHub& hub)
      : stream_(std::move(socket)), options_(options), orchestrator_(orchestrator), hub_(hub) {}

  void start() { read(); }

 private:
  void read() {
    request_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, request_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->handle();
    });
  }

  void handle() {
    const std::string target(request_.target());
    if (websocket::is_upgrade(request_)) {
      if (target != "/ws") return respond(http::status::not_found, "text/plain", "unknown websocket path\n");
      stream_.expires_never();
      std::make_shared<WebsocketConnection>(stream_.release_socket(), orchestrator_, hub_)->start(std::move(request_));
      return;
    }
    if (request_.method() != http::verb::get) return respond(http::status::method_not_allowed, "text/plain", "GET only\n");
    if (target == "/healthz") return respond(http::status::ok, "application/json", R"({"status":"ok"})");

    constexpr std::string_view kImages = "/images/";
    if (target.starts_with(kImages)) {
      auto file = find_image_file(options_.image_dir, target.substr(kImages.size()));
      auto body = file ? read_file(*file) : std::nullopt;
      if (!body) return respond(http::status::not_found, "text/plain", "no such image\n");
      return respond(http::status::ok, mime_type(*file), std::move(*body), true);
    }
    if (!options_.web_root.empty() && target.find("..") == std::string::npos) {
      auto rel = target == "/" ? std::string("index.html") : target.substr(1);
      auto path = options_.web_root / rel.substr(0, rel.find('?'));
      if (auto body = read_file(path)) return respond(http::status::ok, mime_type(path), std::move(*body));
    }
    respond(http::status::not_found, "text/plain", "not found\n");
  }

  void respond(http::status status, std::string_view type, std::string body, bool immutable = false) {
    auto res = std::make_shared<http::response<http::string_body>>(status, request_.version());
    res->set(http::field::content_type, beast::string_view(type.data(), type.size()));
    if (immutable) res->set(http::field::cache_control, "public, max-age=31536000, immutable");
    res->keep_alive(request_.keep_alive());
    res->body() = std::move(body);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec || !res->keep_alive()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->read();
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
  const ServerOptions& options_;
  Orchestrator& orchestrator_;
  ConnectionHub& hub_;
};

}  // namespace

struct GameServer::Impl {
  ServerOptions options;
  Orchestrator& orchestrator;
  ConnectionHub& hub;
  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::mutex tick_mutex;
  std::condition_variable tick_cv;
  bool stopping = false;

  Impl(ServerOptions o, Orchestrator& orch, ConnectionHub& h) : options(std::move(o)), orchestrator(orch), hub(h) {}

  void accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) {
        if (ec != net::error::operation_aborted) spdlog::warn("accept failed: {}", ec.message());
        if (!acceptor.is_open()) return;
      } else {
        std::make_shared<HttpConnection>(std::move(socket), options, orchestrator, hub)->start();
      }
      accept();
    });
  }
};

GameServer::GameServer(ServerOptions options, Orchestrator& orchestrator, ConnectionHub& hub)
    : impl_(std::make_unique<Impl>(std::move(options), orchestrator, hub)) {}

GameServer::~GameServer() { stop(); }

std::uint16_t GameServer::bind() {
  beast::error_code ec;
  auto address = net::ip::make_address(impl_->options.host, ec);
  if (ec) throw Error(ErrorCode::NetworkError, "bad host '" + impl_->options.host + "': " + ec.message());
  tcp::endpoint endpoint{address, impl_->options.port};
  auto& acceptor = impl_->acceptor;
  acceptor.open(endpoint.protocol(), ec);
  if (!ec) acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) acceptor.bind(endpoint, ec);
  if (!ec) acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) throw Error(ErrorCode::NetworkError, "cannot listen on " + impl_->options.host + ":" +
                                                   std::to_string(impl_->options.port) + ": " + ec.message());
  return acceptor.local_endpoint().port();
}

void GameServer::run() {
  auto& impl = *impl_;
  if (!impl.acceptor.is_open()) bind();
  std::thread ticker([&impl] {
    std::unique_lock lock(impl.tick_mutex);
    while (!impl.tick_cv.wait_for(lock, std::chrono::milliseconds(impl.options.tick_interval_ms),
                                  [&impl] { return impl.stopping; })) {
      lock.unlock();
      try {
        impl.orchestrator.tick();
      } catch (const std::exception& e) {
        spdlog::error("tick failed: {}", e.what());
      }
      lock.lock();
    }
  });
  impl.accept();
  spdlog::info("serving on {}:{}", impl.options.host, impl.acceptor.local_endpoint().port());
  impl.ioc.run();
  {
    std::lock_guard lock(impl.tick_mutex);
    impl.stopping = true;
  }
  impl.tick_cv.notify_all();
  ticker.join();
}

void GameServer::stop() {
  {
    std::lock_guard lock(impl_->tick_mutex);
    impl_->stopping = true;
  }
  impl_->tick_cv.notify_all();
  net::post(impl_->ioc, [impl = impl_.get()] {
    beast::error_code ignored;
    impl->acceptor.close(ignored);
    impl->ioc.stop();
  });
}

}  // namespace guesswhich::service
