#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "guesswhich/agent.hpp"
#include "guesswhich/game.hpp"
#include "guesswhich/game_log.hpp"
#include "guesswhich/questioner.hpp"

namespace guesswhich::agents {

struct SimulatedGameContext {
  std::string session_id;
  std::string assignment_id;
  std::string worker_id;
  std::string condition;  // answerer variant label
  int game_index = 1;
  TimestampMs start_ms = 0;  // logical clock; each event advances it by 1 s
};

/// Plays one AI-AI game. The log has the human-game schema with questioner
/// "sim:<policy>". An agent error aborts the game; the returned record then
/// has status Aborted and a diagnostic.
logs::GameLogRecord run_ai_ai_game(Questioner& questioner, AnswerAgent& answerer, const PoolSpec& pool,
                                   const game::GameConfig& config, const SimulatedGameContext& context);

struct SimulationPlan {
  QuestionerPolicy questioner;
  std::shared_ptr<AnswerAgent> answerer;
  std::string condition;
  std::vector<PoolSpec> pools;
  int games = 100;
  int games_per_assignment = 10;
  game::GameConfig config;  // pool_size is taken from the pools
};

/// Games cycle through the pools in order; every `games_per_assignment`
/// games share a synthetic worker and assignment.
std::vector<logs::GameLogRecord> simulate_games(const SimulationPlan& plan);

}  // namespace guesswhich::agents
