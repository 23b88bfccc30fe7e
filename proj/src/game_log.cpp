#include "guesswhich/game_log.hpp"

#include <fstream>

#include <json.hpp>

#include "guesswhich/error.hpp"
#include "guesswhich/jsonl.hpp"

namespace guesswhich::logs {

using nlohmann::json;
namespace g = guesswhich::game;

std::string_view to_string(GameStatus status) {
  switch (status) {
    case GameStatus::Complete: return "complete";
    case GameStatus::Abandoned: return "abandoned";
    case GameStatus::Aborted: return "aborted";
  }
  return "?";
}

namespace {

GameStatus game_status_from(const std::string& s) {
  if (s == "complete") return GameStatus::Complete;
  if (s == "abandoned") return GameStatus::Abandoned;
  if (s == "aborted") return GameStatus::Aborted;
  throw Error(ErrorCode::SchemaError, "unknown game status '" + s + "'");
}

std::string_view assignment_status_name(AssignmentStatus s) {
  return s == AssignmentStatus::Complete ? "complete" : "abandoned";
}

AssignmentStatus assignment_status_from(const std::string& s) {
  if (s == "complete") return AssignmentStatus::Complete;
  if (s == "abandoned") return AssignmentStatus::Abandoned;
  throw Error(ErrorCode::SchemaError, "unknown assignment status '" + s + "'");
}

json game_to_json(const GameLogRecord& r) {
  json events = json::array();
  for (const auto& e : r.events) events.push_back(to_json(e));
  json out = {{"record_type", "game"},
              {"schema_version", kSchemaVersion},
              {"session_id", r.session_id},
              {"assignment_id", r.assignment_id},
              {"game_index", r.game_index},
              {"condition", r.condition},
              {"questioner", r.questioner},
              {"worker_id", r.worker_id},
              {"config",
               {{"dialog_rounds", r.config.dialog_rounds},
                {"pool_size", r.config.pool_size},
                {"caption_guess_required", r.config.caption_guess_required}}},
              {"pool_id", r.pool.pool_id},
              {"secret_id", r.pool.secret_id},
              {"caption", r.pool.caption},
              {"image_ids", r.pool.image_ids},
              {"events", std::move(events)},
              {"induced_rank", r.induced_rank ? json(*r.induced_rank) : json(nullptr)},
              {"status", to_string(r.status)}};
  if (!r.diagnostic.empty()) out["diagnostic"] = r.diagnostic;
  return out;
}

GameLogRecord game_from_json(const json& j) {
  GameLogRecord r;
  r.session_id = j.at("session_id").get<std::string>();
  r.assignment_id = j.at("assignment_id").get<std::string>();
  r.game_index = j.at("game_index").get<int>();
  r.condition = j.at("condition").get<std::string>();
  r.questioner = j.at("questioner").get<std::string>();
  r.worker_id = j.at("worker_id").get<std::string>();
  const auto& cfg = j.at("config");
  r.config.dialog_rounds = cfg.at("dialog_rounds").get<int>();
  r.config.pool_size = cfg.at("pool_size").get<int>();
  r.config.caption_guess_required = cfg.at("caption_guess_required").get<bool>();
  r.pool.pool_id = j.at("pool_id").get<std::string>();
  r.pool.secret_id = j.at("secret_id").get<std::string>();
  r.pool.caption = j.at("caption").get<std::string>();
  r.pool.image_ids = j.at("image_ids").get<std::vector<ImageId>>();
  for (const auto& e : j.at("events")) r.events.push_back(event_from_json(e));
  if (const auto& rank = j.at("induced_rank"); !rank.is_null()) r.induced_rank = rank.get<int>();
  r.status = game_status_from(j.at("status").get<std::string>());
  r.diagnostic = j.value("diagnostic", std::string{});
  return r;
}

json payout_to_json(const g::Payout& p) {
  return {{"base", p.base}, {"round_bonus", p.round_bonus}, {"rank_bonus", p.rank_bonus}, {"total", p.total()}};
}

}  // namespace

bool GameLogRecord::fallback_contaminated() const {
  for (const auto& e : events)
    if (const auto* a = std::get_if<g::AnswerReceived>(&e.payload); a && a->fallback) return true;
  return false;
}

std::string record_key(const LogRecord& record) {
  return std::visit(
      [](const auto& r) -> std::string {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, GameLogRecord>) return "game:" + r.session_id;
        else if constexpr (std::is_same_v<T, SurveyRecord>) return "survey:" + r.assignment_id;
        else return "assignment:" + r.assignment_id;
      },
      record);
}

json to_json(const g::GameEvent& event) {
  json out = {{"type", g::event_name(event.payload)}, {"t_ms", event.at}};
  std::visit(
      [&](const auto& ev) {
        using T = std::decay_t<decltype(ev)>;
        if constexpr (std::is_same_v<T, g::QuestionAsked>) {
          out["text"] = ev.text;
        } else if constexpr (std::is_same_v<T, g::AnswerReceived>) {
          out["text"] = ev.text;
          out["fallback"] = ev.fallback;
          out["attempts"] = ev.attempts;
        } else {
          out["image_id"] = ev.image_id;
        }
      },
      event.payload);
  return out;
}

g::GameEvent event_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  g::GameEvent event;
  event.at = j.at("t_ms").get<TimestampMs>();
  if (type == "CaptionGuess") event.payload = g::CaptionGuess{j.at("image_id").get<std::string>()};
  else if (type == "QuestionAsked") event.payload = g::QuestionAsked{j.at("text").get<std::string>()};
  else if (type == "AnswerReceived")
    event.payload = g::AnswerReceived{j.at("text").get<std::string>(), j.value("fallback", false),
                                      j.value("attempts", 1)};
  else if (type == "RoundGuess") event.payload = g::RoundGuess{j.at("image_id").get<std::string>()};
  else if (type == "FinalGuess") event.payload = g::FinalGuess{j.at("image_id").get<std::string>()};
  else throw Error(ErrorCode::SchemaError, "unknown event type '" + type + "'");
  return event;
}

json to_json(const LogRecord& record) {
  return std::visit(
      [](const auto& r) -> json {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, GameLogRecord>) {
          return game_to_json(r);
        } else if constexpr (std::is_same_v<T, SurveyRecord>) {
          return {{"record_type", "survey"},  {"schema_version", kSchemaVersion}, {"assignment_id", r.assignment_id},
                  {"worker_id", r.worker_id}, {"condition", r.condition},         {"ratings", to_json(r.survey)},
                  {"t_ms", r.submitted_at}};
        } else {
          json out = {{"record_type", "assignment"},
                      {"schema_version", kSchemaVersion},
                      {"assignment_id", r.assignment_id},
                      {"worker_id", r.worker_id},
                      {"condition", r.condition},
                      {"session_ids", r.session_ids},
                      {"status", assignment_status_name(r.status)}};
          out["payout"] = r.payout ? payout_to_json(*r.payout) : json(nullptr);
          return out;
        }
      },
      record);
}

LogRecord record_from_json(const json& j) {
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kSchemaVersion)
      throw Error(ErrorCode::SchemaError, "unsupported schema_version " + std::to_string(version));
    const auto type = j.at("record_type").get<std::string>();
    if (type == "game") return game_from_json(j);
    if (type == "survey") {
      SurveyRecord r;
      r.assignment_id = j.at("assignment_id").get<std::string>();
      r.worker_id = j.at("worker_id").get<std::string>();
      r.condition = j.at("condition").get<std::string>();
      r.survey = survey_from_json(j.at("ratings"));
      r.submitted_at = j.value("t_ms", TimestampMs{0});
      return r;
    }
    if (type == "assignment") {
      AssignmentRecord r;
      r.assignment_id = j.at("assignment_id").get<std::string>();
      r.worker_id = j.at("worker_id").get<std::string>();
      r.condition = j.at("condition").get<std::string>();
      r.session_ids = j.at("session_ids").get<std::vector<std::string>>();
      r.status = assignment_status_from(j.at("status").get<std::string>());
      if (const auto& p = j.at("payout"); !p.is_null())
        r.payout = g::Payout{p.at("base").get<double>(), p.at("round_bonus").get<double>(),
                             p.at("rank_bonus").get<double>()};
      return r;
    }
    throw Error(ErrorCode::SchemaError, "unknown record_type '" + type + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("log record: ") + e.what());
  }
}

std::vector<LogRecord> read_log(std::istream& in, const std::string& source) {
  std::vector<LogRecord> out;
  for_each_jsonl_record(in, source, [&](const json& j, std::size_t line) {
    try {
      out.push_back(record_from_json(j));
    } catch (const Error& e) {
      throw Error(e.code(), source + ":" + std::to_string(line) + ": " + e.detail());
    }
  });
  return out;
}

std::vector<LogRecord> read_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open log file '" + path + "'");
  return read_log(in, path);
}

void write_log(std::ostream& out, const std::vector<LogRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

void write_log_file(const std::string& path, const std::vector<LogRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::StorageError, "cannot write log file '" + path + "'");
  write_log(out, records);
  if (!out) throw Error(ErrorCode::StorageError, "short write to '" + path + "'");
}

GameLogRecord make_game_record(const g::GameSession& session, std::vector<g::GameEvent> events, GameStatus status) {
  GameLogRecord r;
  r.session_id = session.session_id;
  r.worker_id = session.player_ref;
  r.condition = session.agent_ref;
  r.config = session.config;
  r.pool = session.pool;
  r.pool.provenance.reset();
  r.events = std::move(events);
  r.induced_rank = session.induced_rank;
  r.status = status;
  return r;
}

g::GameSession replay_session(const GameLogRecord& record) {
  auto session = g::new_session(record.config, record.pool, record.session_id, record.worker_id, record.condition);
  for (const auto& event : record.events) session = g::apply_event(std::move(session), event);
  return session;
}

ReplayCheck verify_replay(const GameLogRecord& record) {
  g::GameSession session;
  try {
    session = replay_session(record);
  } catch (const Error& e) {
    return {false, std::string("replay rejected: ") + e.what()};
  }
  if (record.status == GameStatus::Complete) {
    if (!session.is_complete()) return {false, "status is complete but replay ends in " + session.state_label()};
    if (session.induced_rank != record.induced_rank)
      return {false, "stored induced_rank " + (record.induced_rank ? std::to_string(*record.induced_rank) : "null") +
                         " but replay gives " + std::to_string(*session.induced_rank)};
    if (static_cast<int>(session.rounds.size()) != record.config.dialog_rounds)
      return {false, "complete game has " + std::to_string(session.rounds.size()) + " rounds"};
  } else {
    if (session.is_complete()) return {false, "status is " + std::string(to_string(record.status)) + " but replay completes"};
    if (record.induced_rank) return {false, "incomplete game carries an induced_rank"};
  }
  return {};
}

}  // namespace guesswhich::logs
