#include "guesswhich/game.hpp"

#include <algorithm>
#include <cctype>

#include "guesswhich/error.hpp"

namespace guesswhich::game {

namespace {

bool is_blank(const std::string& text) {
  return std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

[[noreturn]] void illegal(const GameSession& session, const EventPayload& payload) {
  throw Error(ErrorCode::IllegalTransition,
              std::string(event_name(payload)) + " is not allowed in state " + session.state_label());
}

void require_in_pool(const GameSession& session, const ImageId& id) {
  if (!session.pool.contains(id))
    throw Error(ErrorCode::UnknownImage, "image '" + id + "' is not in pool '" + session.pool.pool_id + "'");
}

void start_round(GameSession& session, int index) {
  session.phase = Phase::Dialog;
  session.current_round = index;
  session.step = DialogStep::AwaitingQuestion;
}

// Each handler validates fully before mutating, so a throw leaves `session` as it was.
void on_caption_guess(GameSession& session, const CaptionGuess& ev, TimestampMs at, const EventPayload& p) {
  if (session.phase != Phase::AwaitingCaptionGuess) illegal(session, p);
  require_in_pool(session, ev.image_id);
  session.caption_guess = TimedGuess{ev.image_id, at};
  start_round(session, 1);
}

void on_question(GameSession& session, const QuestionAsked& ev, TimestampMs at, const EventPayload& p) {
  if (session.phase != Phase::Dialog || session.step != DialogStep::AwaitingQuestion ||
      session.current_round > session.config.dialog_rounds)
    illegal(session, p);
  if (is_blank(ev.text)) throw Error(ErrorCode::EmptyText, "question text is empty");
  DialogRound round;
  round.index = session.current_round;
  round.question = ev.text;
  round.asked_at = at;
  session.rounds.push_back(std::move(round));
  session.step = DialogStep::AwaitingAnswer;
}

void on_answer(GameSession& session, const AnswerReceived& ev, TimestampMs at, const EventPayload& p) {
  if (session.phase != Phase::Dialog || session.step != DialogStep::AwaitingAnswer) illegal(session, p);
  if (is_blank(ev.text)) throw Error(ErrorCode::EmptyText, "answer text is empty");
  auto& round = session.rounds.back();
  round.answer = ev.text;
  round.answered_at = at;
  round.fallback_answer = ev.fallback;
  round.answer_attempts = ev.attempts;
  session.step = DialogStep::AwaitingRoundGuess;
}

void on_round_guess(GameSession& session, const RoundGuess& ev, TimestampMs at, const EventPayload& p) {
  if (session.phase != Phase::Dialog || session.step != DialogStep::AwaitingRoundGuess) illegal(session, p);
  require_in_pool(session, ev.image_id);
  auto& round = session.rounds.back();
  round.round_guess = ev.image_id;
  round.guessed_at = at;
  // The game always runs the full dialog, even after a correct round guess.
  if (session.current_round >= session.config.dialog_rounds) {
    session.phase = Phase::FinalGuessing;
  } else {
    start_round(session, session.current_round + 1);
  }
}

void on_final_guess(GameSession& session, const FinalGuess& ev, TimestampMs at, const EventPayload& p) {
  if (session.phase != Phase::FinalGuessing) illegal(session, p);
  require_in_pool(session, ev.image_id);
  const bool repeated = std::any_of(session.final_guesses.begin(), session.final_guesses.end(),
                                    [&](const TimedGuess& g) { return g.image_id == ev.image_id; });
  if (repeated) throw Error(ErrorCode::DuplicateFinalGuess, "image '" + ev.image_id + "' was already guessed");
  session.final_guesses.push_back({ev.image_id, at});
  if (ev.image_id == session.pool.secret_id) {
    session.phase = Phase::Complete;
    session.induced_rank = static_cast<int>(session.final_guesses.size());
  }
}

}  // namespace

void GameConfig::validate() const {
  if (dialog_rounds < 1) throw Error(ErrorCode::InvalidConfig, "dialog_rounds must be >= 1");
  if (pool_size < 2) throw Error(ErrorCode::InvalidConfig, "pool_size must be >= 2");
}

std::string_view event_name(const EventPayload& payload) {
  struct Namer {
    std::string_view operator()(const CaptionGuess&) const { return "CaptionGuess"; }
    std::string_view operator()(const QuestionAsked&) const { return "QuestionAsked"; }
    std::string_view operator()(const AnswerReceived&) const { return "AnswerReceived"; }
    std::string_view operator()(const RoundGuess&) const { return "RoundGuess"; }
    std::string_view operator()(const FinalGuess&) const { return "FinalGuess"; }
  };
  return std::visit(Namer{}, payload);
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::AwaitingCaptionGuess: return "AwaitingCaptionGuess";
    case Phase::Dialog: return "Dialog";
    case Phase::FinalGuessing: return "FinalGuessing";
    case Phase::Complete: return "Complete";
  }
  return "?";
}

std::string_view to_string(DialogStep step) {
  switch (step) {
    case DialogStep::AwaitingQuestion: return "AwaitingQuestion";
    case DialogStep::AwaitingAnswer: return "AwaitingAnswer";
    case DialogStep::AwaitingRoundGuess: return "AwaitingRoundGuess";
  }
  return "?";
}

std::string GameSession::state_label() const {
  if (phase != Phase::Dialog) return std::string(to_string(phase));
  return "Dialog(" + std::to_string(current_round) + ")/" + std::string(to_string(step));
}

std::vector<ImageId> GameSession::round_guesses() const {
  std::vector<ImageId> out;
  if (caption_guess) out.push_back(caption_guess->image_id);
  for (const auto& r : rounds)
    if (!r.round_guess.empty()) out.push_back(r.round_guess);
  return out;
}

GameSession new_session(const GameConfig& config, PoolSpec pool, std::string session_id, std::string player_ref,
                        std::string agent_ref) {
  config.validate();
  pool.validate();
  if (static_cast<int>(pool.image_ids.size()) != config.pool_size)
    throw Error(ErrorCode::PoolMismatch, "pool '" + pool.pool_id + "' has " + std::to_string(pool.image_ids.size()) +
                                             " images, config expects " + std::to_string(config.pool_size));
  GameSession session;
  session.session_id = std::move(session_id);
  session.config = config;
  session.pool = std::move(pool);
  session.player_ref = std::move(player_ref);
  session.agent_ref = std::move(agent_ref);
  if (config.caption_guess_required) {
    session.phase = Phase::AwaitingCaptionGuess;
  } else {
    start_round(session, 1);
  }
  return session;
}

GameSession apply_event(GameSession session, const GameEvent& event) {
  const auto& p = event.payload;
  std::visit(
      [&](const auto& ev) {
        using T = std::decay_t<decltype(ev)>;
        if constexpr (std::is_same_v<T, CaptionGuess>) on_caption_guess(session, ev, event.at, p);
        else if constexpr (std::is_same_v<T, QuestionAsked>) on_question(session, ev, event.at, p);
        else if constexpr (std::is_same_v<T, AnswerReceived>) on_answer(session, ev, event.at, p);
        else if constexpr (std::is_same_v<T, RoundGuess>) on_round_guess(session, ev, event.at, p);
        else on_final_guess(session, ev, event.at, p);
      },
      p);
  return session;
}

bool is_legal(const GameSession& session, const GameEvent& event) {
  try {
    (void)apply_event(session, event);
    return true;
  } catch (const Error&) {
    return false;
  }
}

int induce_final_rank(const std::vector<ImageId>& final_guesses, const ImageId& secret_id) {
  if (final_guesses.empty() || final_guesses.back() != secret_id)
    throw Error(ErrorCode::SecretNotTerminal, "secret '" + secret_id + "' is not the last final guess");
  if (std::find(final_guesses.begin(), final_guesses.end() - 1, secret_id) != final_guesses.end() - 1)
    throw Error(ErrorCode::SecretNotTerminal, "secret '" + secret_id + "' appears before the last final guess");
  return static_cast<int>(final_guesses.size());
}

// ---------------------------------------------------------------------------

void BonusConfig::validate() const {
  if (base_pay < 0 || round_bonus_cap < 0 || rank_bonus_cap < 0)
    throw Error(ErrorCode::InvalidConfig, "bonus amounts must be non-negative");
}

namespace {

struct RoundTally {
  int matched = 0;
  int total = 0;
};

RoundTally tally_round_guesses(const GameSession& session, bool count_caption) {
  RoundTally tally;
  const auto& secret = session.pool.secret_id;
  if (count_caption && session.caption_guess) {
    ++tally.total;
    if (session.caption_guess->image_id == secret) ++tally.matched;
  }
  for (const auto& r : session.rounds) {
    if (r.round_guess.empty()) continue;
    ++tally.total;
    if (r.round_guess == secret) ++tally.matched;
  }
  return tally;
}

double rank_score(const GameSession& session) {
  const int n = session.config.pool_size;
  return static_cast<double>(n - *session.induced_rank) / static_cast<double>(n - 1);
}

}  // namespace

Payout compute_payout(const Assignment& assignment, const BonusConfig& bonus) {
  bonus.validate();
  if (static_cast<int>(assignment.games.size()) != assignment.games_per_assignment)
    throw Error(ErrorCode::IncompleteAssignment,
                "assignment '" + assignment.assignment_id + "' has " + std::to_string(assignment.games.size()) +
                    " of " + std::to_string(assignment.games_per_assignment) + " games");
  RoundTally tally;
  double rank_sum = 0.0;
  for (const auto& game : assignment.games) {
    if (!game.is_complete() || !game.induced_rank)
      throw Error(ErrorCode::IncompleteAssignment, "game '" + game.session_id + "' is not complete");
    const auto t = tally_round_guesses(game, bonus.count_caption_guess);
    tally.matched += t.matched;
    tally.total += t.total;
    rank_sum += rank_score(game);
  }
  Payout payout;
  payout.base = bonus.base_pay;
  if (tally.total > 0)
    payout.round_bonus = bonus.round_bonus_cap * static_cast<double>(tally.matched) / static_cast<double>(tally.total);
  if (!assignment.games.empty())
    payout.rank_bonus = bonus.rank_bonus_cap * rank_sum / static_cast<double>(assignment.games.size());
  return payout;
}

double game_bonus_share(const GameSession& session, int games_per_assignment, const BonusConfig& bonus) {
  if (games_per_assignment < 1) return 0.0;
  const int per_game_guesses =
      session.config.dialog_rounds + (bonus.count_caption_guess && session.config.caption_guess_required ? 1 : 0);
  const auto tally = tally_round_guesses(session, bonus.count_caption_guess);
  double share = bonus.round_bonus_cap * static_cast<double>(tally.matched) /
                 static_cast<double>(per_game_guesses * games_per_assignment);
  if (session.induced_rank) share += bonus.rank_bonus_cap * rank_score(session) / games_per_assignment;
  return share;
}

}  // namespace guesswhich::game
