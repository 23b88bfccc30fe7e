#include "guesswhich/simulation.hpp"

#include <cstdio>

#include "guesswhich/error.hpp"

namespace guesswhich::agents {

namespace g = guesswhich::game;

namespace {

std::string numbered(std::string_view prefix, int n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05d", n);
  return std::string(prefix) + buf;
}

}  // namespace

logs::GameLogRecord run_ai_ai_game(Questioner& questioner, AnswerAgent& answerer, const PoolSpec& pool,
                                   const g::GameConfig& config, const SimulatedGameContext& ctx) {
  auto session = g::new_session(config, pool, ctx.session_id, ctx.worker_id, ctx.condition);
  std::vector<g::GameEvent> events;
  TimestampMs clock = ctx.start_ms;
  auto apply = [&](g::EventPayload payload) {
    clock += 1000;
    g::GameEvent event{std::move(payload), clock};
    session = g::apply_event(std::move(session), event);
    events.push_back(std::move(event));
  };

  auto finish = [&](logs::GameStatus status, std::string diagnostic) {
    auto record = logs::make_game_record(session, std::move(events), status);
    record.assignment_id = ctx.assignment_id;
    record.game_index = ctx.game_index;
    record.questioner = "sim:" + questioner.label();
    record.diagnostic = std::move(diagnostic);
    return record;
  };

  questioner.begin_game(pool, ctx.session_id);
  std::vector<QaPair> history;
  QuestionerView view{&pool, 0, &history};

  if (config.caption_guess_required) apply(g::CaptionGuess{questioner.caption_guess(view)});

  for (int round = 1; round <= config.dialog_rounds; ++round) {
    view.round = round;
    auto question = questioner.next_question(view);
    apply(g::QuestionAsked{question});
    AnswerRequest req{ctx.session_id, pool.caption, history, question, pool.secret_id};
    AnswerResponse resp;
    try {
      resp = answerer.answer(req);
      if (resp.session_id != req.session_id)
        throw Error(ErrorCode::MalformedResponse, "answer for session '" + resp.session_id + "'");
      if (resp.answer.find_first_not_of(" \t\r\n") == std::string::npos)
        throw Error(ErrorCode::MalformedResponse, "empty answer");
    } catch (const Error& e) {
      return finish(logs::GameStatus::Aborted, "round " + std::to_string(round) + ": " + e.what());
    }
    apply(g::AnswerReceived{resp.answer, false, 1});
    history.push_back({std::move(question), std::move(resp.answer)});
    apply(g::RoundGuess{questioner.round_guess(view)});
  }

  view.round = config.dialog_rounds;
  for (const auto& id : questioner.final_ranking(view)) {
    apply(g::FinalGuess{id});
    if (session.is_complete()) break;
  }
  if (!session.is_complete())
    return finish(logs::GameStatus::Aborted, "questioner ranking never reached the secret");
  return finish(logs::GameStatus::Complete, {});
}

std::vector<logs::GameLogRecord> simulate_games(const SimulationPlan& plan) {
  if (plan.pools.empty()) throw Error(ErrorCode::NoPoolsAvailable, "simulation needs at least one pool");
  if (plan.games < 0 || plan.games_per_assignment < 1)
    throw Error(ErrorCode::InvalidParameter, "games must be >= 0 and games per assignment >= 1");
  if (!plan.answerer) throw Error(ErrorCode::InvalidParameter, "simulation needs an answerer");
  auto questioner = make_questioner(plan.questioner, plan.config.dialog_rounds);
  const std::string label = plan.condition.empty() ? plan.answerer->name() : plan.condition;

  std::vector<logs::GameLogRecord> out;
  out.reserve(static_cast<std::size_t>(plan.games));
  for (int i = 0; i < plan.games; ++i) {
    const auto& pool = plan.pools[static_cast<std::size_t>(i) % plan.pools.size()];
    auto config = plan.config;
    config.pool_size = static_cast<int>(pool.image_ids.size());
    const int block = i / plan.games_per_assignment;
    SimulatedGameContext ctx;
    ctx.session_id = numbered("sim-game-", i + 1);
    ctx.assignment_id = numbered("sim-assignment-", block + 1);
    ctx.worker_id = numbered("sim-worker-", block + 1);
    ctx.condition = label;
    ctx.game_index = i % plan.games_per_assignment + 1;
    ctx.start_ms = static_cast<TimestampMs>(i) * 3'600'000;
    out.push_back(run_ai_ai_game(*questioner, *plan.answerer, pool, config, ctx));
  }
  return out;
}

}  // namespace guesswhich::agents
