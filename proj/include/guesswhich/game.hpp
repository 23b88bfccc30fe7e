#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "guesswhich/pool_spec.hpp"
#include "guesswhich/survey.hpp"
#include "guesswhich/types.hpp"

namespace guesswhich::game {

struct GameConfig {
  int dialog_rounds = 9;
  int pool_size = 20;
  bool caption_guess_required = true;

  void validate() const;

  bool operator==(const GameConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Events

struct CaptionGuess {
  ImageId image_id;
  bool operator==(const CaptionGuess&) const = default;
};

struct QuestionAsked {
  std::string text;
  bool operator==(const QuestionAsked&) const = default;
};

struct AnswerReceived {
  std::string text;
  bool fallback = false;  // canned answer substituted after agent failure
  int attempts = 1;
  bool operator==(const AnswerReceived&) const = default;
};

struct RoundGuess {
  ImageId image_id;
  bool operator==(const RoundGuess&) const = default;
};

struct FinalGuess {
  ImageId image_id;
  bool operator==(const FinalGuess&) const = default;
};

using EventPayload = std::variant<CaptionGuess, QuestionAsked, AnswerReceived, RoundGuess, FinalGuess>;

struct GameEvent {
  EventPayload payload;
  TimestampMs at = 0;

  bool operator==(const GameEvent&) const = default;
};

std::string_view event_name(const EventPayload& payload);

// ---------------------------------------------------------------------------
// Session state

enum class Phase { AwaitingCaptionGuess, Dialog, FinalGuessing, Complete };

/// Position inside Dialog(t).
enum class DialogStep { AwaitingQuestion, AwaitingAnswer, AwaitingRoundGuess };

std::string_view to_string(Phase phase);
std::string_view to_string(DialogStep step);

struct DialogRound {
  int index = 0;  // 1-based
  std::string question;
  std::string answer;
  ImageId round_guess;
  TimestampMs asked_at = 0;
  TimestampMs answered_at = 0;
  TimestampMs guessed_at = 0;
  bool fallback_answer = false;
  int answer_attempts = 0;

  bool operator==(const DialogRound&) const = default;
};

struct TimedGuess {
  ImageId image_id;
  TimestampMs at = 0;
  bool operator==(const TimedGuess&) const = default;
};

struct GameSession {
  std::string session_id;
  GameConfig config;
  PoolSpec pool;
  std::string player_ref;
  std::string agent_ref;

  Phase phase = Phase::AwaitingCaptionGuess;
  int current_round = 0;  // t in Dialog(t); 0 before the dialog starts
  DialogStep step = DialogStep::AwaitingQuestion;

  std::optional<TimedGuess> caption_guess;
  // The round in progress, when any, is the last element.
  std::vector<DialogRound> rounds;
  std::vector<TimedGuess> final_guesses;
  std::optional<int> induced_rank;

  bool is_complete() const { return phase == Phase::Complete; }

  /// "Dialog(3)/AwaitingAnswer", "FinalGuessing", ...
  std::string state_label() const;

  /// Caption guess (when taken) followed by every recorded round guess.
  std::vector<ImageId> round_guesses() const;

  bool operator==(const GameSession&) const = default;
};

GameSession new_session(const GameConfig& config, PoolSpec pool, std::string session_id,
                        std::string player_ref, std::string agent_ref);

/// Deterministic transition. Throws IllegalTransition, UnknownImage,
/// DuplicateFinalGuess or EmptyText and leaves the input untouched.
GameSession apply_event(GameSession session, const GameEvent& event);

/// True when `event` would be accepted in the session's current state.
bool is_legal(const GameSession& session, const GameEvent& event);

/// 1 + number of wrong guesses before the secret. Throws SecretNotTerminal.
int induce_final_rank(const std::vector<ImageId>& final_guesses, const ImageId& secret_id);

// ---------------------------------------------------------------------------
// Assignments and bonuses

struct BonusConfig {
  double base_pay = 5.00;
  double round_bonus_cap = 1.00;
  double rank_bonus_cap = 2.00;
  bool count_caption_guess = true;

  void validate() const;
};

struct Assignment {
  std::string assignment_id;
  std::string worker_id;
  std::string condition;
  int games_per_assignment = 10;
  std::vector<GameSession> games;
  std::optional<SurveyResponse> survey;
};

struct Payout {
  double base = 0.0;
  double round_bonus = 0.0;
  double rank_bonus = 0.0;

  double total() const { return base + round_bonus + rank_bonus; }

  bool operator==(const Payout&) const = default;
};

/// Throws IncompleteAssignment unless every game is Complete and the count matches.
Payout compute_payout(const Assignment& assignment, const BonusConfig& bonus);

/// This game's share of the assignment bonus, assuming every game in the
/// assignment has the same configuration. Sums to the payout's bonus over a
/// complete assignment.
double game_bonus_share(const GameSession& session, int games_per_assignment, const BonusConfig& bonus);

}  // namespace guesswhich::game
