#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "guesswhich/game.hpp"
#include "guesswhich/survey.hpp"

namespace guesswhich::logs {

inline constexpr int kSchemaVersion = 1;

enum class GameStatus { Complete, Abandoned, Aborted };

std::string_view to_string(GameStatus status);

/// One game, as persisted. `events` is the source of truth; `induced_rank`
/// and `status` are derived facts that replay verifies.
struct GameLogRecord {
  std::string session_id;
  std::string assignment_id;
  int game_index = 1;  // position within the assignment, 1-based
  std::string condition;
  std::string questioner = "human";
  std::string worker_id;
  game::GameConfig config;
  PoolSpec pool;  // provenance is not persisted here
  std::vector<game::GameEvent> events;
  std::optional<int> induced_rank;
  GameStatus status = GameStatus::Complete;
  std::string diagnostic;  // why a game was abandoned or aborted

  /// Any answer in the game was the canned fallback.
  bool fallback_contaminated() const;

  bool operator==(const GameLogRecord&) const = default;
};

struct SurveyRecord {
  std::string assignment_id;
  std::string worker_id;
  std::string condition;
  SurveyResponse survey;
  TimestampMs submitted_at = 0;

  bool operator==(const SurveyRecord&) const = default;
};

enum class AssignmentStatus { Complete, Abandoned };

struct AssignmentRecord {
  std::string assignment_id;
  std::string worker_id;
  std::string condition;
  std::vector<std::string> session_ids;
  AssignmentStatus status = AssignmentStatus::Complete;
  std::optional<game::Payout> payout;

  bool operator==(const AssignmentRecord&) const = default;
};

using LogRecord = std::variant<GameLogRecord, SurveyRecord, AssignmentRecord>;

/// Unique key used by write-once stores: "game:<session>", "survey:<assignment>", ...
std::string record_key(const LogRecord& record);

nlohmann::json to_json(const game::GameEvent& event);
game::GameEvent event_from_json(const nlohmann::json& j);

nlohmann::json to_json(const LogRecord& record);
/// Throws Error(SchemaError) on missing fields, wrong types or an unsupported schema version.
LogRecord record_from_json(const nlohmann::json& j);

std::vector<LogRecord> read_log(std::istream& in, const std::string& source = "log");
std::vector<LogRecord> read_log_file(const std::string& path);
void write_log(std::ostream& out, const std::vector<LogRecord>& records);
void write_log_file(const std::string& path, const std::vector<LogRecord>& records);

/// Builds the record for a finished (or abandoned/aborted) session.
GameLogRecord make_game_record(const game::GameSession& session, std::vector<game::GameEvent> events,
                               GameStatus status);

/// Rebuilds the session by re-driving game_core over the recorded events.
game::GameSession replay_session(const GameLogRecord& record);

struct ReplayCheck {
  bool ok = true;
  std::string problem;
};

/// Replays and checks the stored status and induced rank against the result.
ReplayCheck verify_replay(const GameLogRecord& record);

}  // namespace guesswhich::logs
