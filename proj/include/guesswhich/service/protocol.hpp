#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

namespace guesswhich::service {

enum class ClientType { JoinQueue, CaptionGuess, Question, RoundGuess, FinalGuess, SurveySubmit, Resume };

enum class ServerType {
  QueueStatus,
  AssignmentStart,
  GameStart,
  Typing,
  Answer,
  GuessAck,
  GuessFeedback,
  GameEnd,
  SurveyRequest,
  AssignmentComplete,
  Error,
};

std::string_view to_string(ClientType type);
std::string_view to_string(ServerType type);

/// Client payloads:
///   JoinQueue {worker_id}           Resume {worker_id, resume_token}
///   CaptionGuess / RoundGuess / FinalGuess {image_id}
///   Question {text}                 SurveySubmit {ratings: {dimension: 1..5}}
/// `seq` is the client's own counter; a repeated or older seq is ignored.
struct ClientMessage {
  ClientType type = ClientType::JoinQueue;
  std::string session_id;  // empty for JoinQueue, Resume and SurveySubmit
  std::int64_t seq = 0;
  nlohmann::json payload = nlohmann::json::object();
};

/// `seq` increases by one per message sent to a worker, across sessions and
/// reconnects, so it is monotone within every session too.
struct ServerMessage {
  ServerType type = ServerType::Error;
  std::string session_id;
  std::int64_t seq = 0;
  nlohmann::json payload = nlohmann::json::object();
};

nlohmann::json to_json(const ClientMessage& msg);
nlohmann::json to_json(const ServerMessage& msg);

/// Throws Error(SchemaError) on bad JSON, unknown types or missing payload fields.
ClientMessage client_message_from_json(const nlohmann::json& j);
ClientMessage parse_client_message(std::string_view text);
ServerMessage server_message_from_json(const nlohmann::json& j);

/// Required string field of a client payload; throws SchemaError.
std::string payload_string(const ClientMessage& msg, const char* field);

}  // namespace guesswhich::service
