#include "guesswhich/http_agent.hpp"

#include <httplib.h>
#include <json.hpp>

#include "guesswhich/error.hpp"

namespace guesswhich::agents {

HttpAgent::HttpAgent(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

AnswerResponse HttpAgent::answer(const AnswerRequest& req) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  const auto started = std::chrono::steady_clock::now();
  auto res = client.Post("/answer", to_json(req).dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
      throw Error(ErrorCode::AgentTimeout, base_url_ + ": " + httplib::to_string(err));
    throw Error(ErrorCode::AgentUnavailable, base_url_ + ": " + httplib::to_string(err));
  }
  if (res->status != 200)
    throw Error(ErrorCode::AgentUnavailable, base_url_ + ": HTTP " + std::to_string(res->status));
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedResponse, base_url_ + ": " + e.what());
  }
  auto resp = answer_response_from_json(body);
  if (resp.session_id != req.session_id)
    throw Error(ErrorCode::MalformedResponse, "response for session '" + resp.session_id + "', expected '" +
                                                  req.session_id + "'");
  if (resp.latency.count() == 0)
    resp.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
  return resp;
}

struct AgentHttpServer::Impl {
  std::shared_ptr<AnswerAgent> agent;
  httplib::Server server;
};

AgentHttpServer::AgentHttpServer(std::shared_ptr<AnswerAgent> agent) : impl_(std::make_unique<Impl>()) {
  impl_->agent = std::move(agent);
  impl_->server.Post("/answer", [this](const httplib::Request& http_req, httplib::Response& http_res) {
    try {
      const auto req = answer_request_from_json(nlohmann::json::parse(http_req.body));
      const auto started = std::chrono::steady_clock::now();
      auto resp = impl_->agent->answer(req);
      resp.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
      http_res.set_content(to_json(resp).dump(), "application/json");
    } catch (const nlohmann::json::exception& e) {
      http_res.status = 400;
      http_res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    } catch (const Error& e) {
      http_res.status = e.code() == ErrorCode::SchemaError ? 400 : 503;
      http_res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    }
  });
  impl_->server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("ok", "text/plain");
  });
}

AgentHttpServer::~AgentHttpServer() { stop(); }

int AgentHttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::AgentUnavailable, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void AgentHttpServer::listen() { impl_->server.listen_after_bind(); }

void AgentHttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace guesswhich::agents
