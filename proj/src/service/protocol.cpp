#include "guesswhich/service/protocol.hpp"

#include <array>
#include <utility>

#include "guesswhich/error.hpp"

namespace guesswhich::service {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<ClientType, std::string_view>, 7> kClientNames{{
    {ClientType::JoinQueue, "JoinQueue"},
    {ClientType::CaptionGuess, "CaptionGuess"},
    {ClientType::Question, "Question"},
    {ClientType::RoundGuess, "RoundGuess"},
    {ClientType::FinalGuess, "FinalGuess"},
    {ClientType::SurveySubmit, "SurveySubmit"},
    {ClientType::Resume, "Resume"},
}};

constexpr std::array<std::pair<ServerType, std::string_view>, 11> kServerNames{{
    {ServerType::QueueStatus, "QueueStatus"},
    {ServerType::AssignmentStart, "AssignmentStart"},
    {ServerType::GameStart, "GameStart"},
    {ServerType::Typing, "Typing"},
    {ServerType::Answer, "Answer"},
    {ServerType::GuessAck, "GuessAck"},
    {ServerType::GuessFeedback, "GuessFeedback"},
    {ServerType::GameEnd, "GameEnd"},
    {ServerType::SurveyRequest, "SurveyRequest"},
    {ServerType::AssignmentComplete, "AssignmentComplete"},
    {ServerType::Error, "Error"},
}};

[[noreturn]] void schema_error(const std::string& message) { throw Error(ErrorCode::SchemaError, message); }

void require_string(const json& payload, const char* field, std::string_view type) {
  if (!payload.contains(field) || !payload[field].is_string())
    schema_error(std::string(type) + " payload needs string field '" + field + "'");
}

struct Envelope {
  std::string type;
  std::string session_id;
  std::int64_t seq = 0;
  json payload;
};

Envelope envelope_from(const json& j) {
  if (!j.is_object()) schema_error("message must be a JSON object");
  Envelope e;
  if (!j.contains("type") || !j["type"].is_string()) schema_error("message needs a string 'type'");
  e.type = j["type"].get<std::string>();
  if (j.contains("session_id")) {
    if (!j["session_id"].is_string()) schema_error("'session_id' must be a string");
    e.session_id = j["session_id"].get<std::string>();
  }
  if (!j.contains("seq") || !j["seq"].is_number_integer()) schema_error("message needs an integer 'seq'");
  e.seq = j["seq"].get<std::int64_t>();
  e.payload = j.value("payload", json::object());
  if (!e.payload.is_object()) schema_error("'payload' must be an object");
  return e;
}

}  // namespace

std::string_view to_string(ClientType type) {
  for (const auto& [t, name] : kClientNames)
    if (t == type) return name;
  return "?";
}

std::string_view to_string(ServerType type) {
  for (const auto& [t, name] : kServerNames)
    if (t == type) return name;
  return "?";
}

json to_json(const ClientMessage& msg) {
  return {{"type", to_string(msg.type)}, {"session_id", msg.session_id}, {"seq", msg.seq}, {"payload", msg.payload}};
}

json to_json(const ServerMessage& msg) {
  return {{"type", to_string(msg.type)}, {"session_id", msg.session_id}, {"seq", msg.seq}, {"payload", msg.payload}};
}

ClientMessage client_message_from_json(const json& j) {
  auto e = envelope_from(j);
  ClientMessage msg;
  bool known = false;
  for (const auto& [t, name] : kClientNames) {
    if (name == e.type) {
      msg.type = t;
      known = true;
    }
  }
  if (!known) schema_error("unknown client message type '" + e.type + "'");
  msg.session_id = std::move(e.session_id);
  msg.seq = e.seq;
  msg.payload = std::move(e.payload);

  switch (msg.type) {
    case ClientType::JoinQueue:
      require_string(msg.payload, "worker_id", e.type);
      break;
    case ClientType::Resume:
      require_string(msg.payload, "worker_id", e.type);
      require_string(msg.payload, "resume_token", e.type);
      break;
    case ClientType::CaptionGuess:
    case ClientType::RoundGuess:
    case ClientType::FinalGuess:
      require_string(msg.payload, "image_id", e.type);
      break;
    case ClientType::Question:
      require_string(msg.payload, "text", e.type);
      break;
    case ClientType::SurveySubmit:
      if (!msg.payload.contains("ratings") || !msg.payload["ratings"].is_object())
        schema_error("SurveySubmit payload needs an object 'ratings'");
      break;
  }
  switch (msg.type) {
    case ClientType::CaptionGuess:
    case ClientType::Question:
    case ClientType::RoundGuess:
    case ClientType::FinalGuess:
      if (msg.session_id.empty()) schema_error(e.type + " needs a session_id");
      break;
    default:
      break;
  }
  return msg;
}

ClientMessage parse_client_message(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) schema_error("message is not valid JSON");
  return client_message_from_json(j);
}

ServerMessage server_message_from_json(const json& j) {
  auto e = envelope_from(j);
  ServerMessage msg;
  bool known = false;
  for (const auto& [t, name] : kServerNames) {
    if (name == e.type) {
      msg.type = t;
      known = true;
    }
  }
  if (!known) schema_error("unknown server message type '" + e.type + "'");
  msg.session_id = std::move(e.session_id);
  msg.seq = e.seq;
  msg.payload = std::move(e.payload);
  return msg;
}

std::string payload_string(const ClientMessage& msg, const char* field) {
  require_string(msg.payload, field, to_string(msg.type));
  return msg.payload[field].get<std::string>();
}

}  // namespace guesswhich::service
