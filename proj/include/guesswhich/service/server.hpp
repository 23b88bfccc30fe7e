#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "guesswhich/service/orchestrator.hpp"

namespace guesswhich::service {

class WebsocketConnection;

/// Maps connection ids to live websocket sessions; its sink is what the
/// orchestrator sends through. Messages for closed connections are dropped.
class ConnectionHub {
 public:
  Orchestrator::Sink sink();

  ConnectionId add(std::weak_ptr<WebsocketConnection> connection);
  void remove(ConnectionId id);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<ConnectionId, std::weak_ptr<WebsocketConnection>> connections_;
  ConnectionId next_id_ = 1;
};

struct ServerOptions {
  std::string host = "0.0.0.0";
  std::uint16_t port = 8080;  // 0 picks a free port
  std::filesystem::path image_dir;  // GET /images/<id>
  std::filesystem::path web_root;   // static client files; optional
  int tick_interval_ms = 250;
};

/// HTTP + websocket front end. Websocket clients connect at /ws and speak
/// the JSON client protocol; GET /images/<id> serves pool images and
/// GET /healthz reports liveness.
class GameServer {
 public:
  GameServer(ServerOptions options, Orchestrator& orchestrator, ConnectionHub& hub);
  ~GameServer();

  GameServer(const GameServer&) = delete;
  GameServer& operator=(const GameServer&) = delete;

  /// Binds the listener and returns the bound port. Throws Error(NetworkError).
  std::uint16_t bind();
  /// Serves until stop(); runs the orchestrator tick on a side thread.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Image file for an id inside `dir`: the id itself or with a common image
/// extension. Ids containing path separators or ".." never match.
std::optional<std::filesystem::path> find_image_file(const std::filesystem::path& dir, const std::string& image_id);

}  // namespace guesswhich::service
