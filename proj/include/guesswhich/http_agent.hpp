#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "guesswhich/agent.hpp"

namespace guesswhich::agents {

/// Client side of the external-agent endpoint: POST <base>/answer with an
/// AnswerRequest body, expecting an AnswerResponse body.
class HttpAgent final : public AnswerAgent {
 public:
  /// `base_url` like "http://127.0.0.1:9000".
  HttpAgent(std::string base_url, std::chrono::milliseconds timeout);

  AnswerResponse answer(const AnswerRequest& req) override;
  std::string name() const override { return "http:" + base_url_; }

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

/// Serves any AnswerAgent over the same endpoint.
class AgentHttpServer {
 public:
  explicit AgentHttpServer(std::shared_ptr<AnswerAgent> agent);
  ~AgentHttpServer();

  AgentHttpServer(const AgentHttpServer&) = delete;
  AgentHttpServer& operator=(const AgentHttpServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace guesswhich::agents
