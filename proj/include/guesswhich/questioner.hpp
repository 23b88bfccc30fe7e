#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "guesswhich/agent.hpp"
#include "guesswhich/embedding.hpp"
#include "guesswhich/pool_spec.hpp"

namespace guesswhich::agents {

/// What a questioner can see mid-game.
struct QuestionerView {
  const PoolSpec* pool = nullptr;  // only oracle policies may look at secret_id
  int round = 0;                   // 1-based; 0 before the dialog
  const std::vector<QaPair>* history = nullptr;
};

/// A simulated questioner (stand-in for a human or a question bot).
class Questioner {
 public:
  virtual ~Questioner() = default;

  /// Called once per game before anything else; `game_key` seeds per-game randomness.
  virtual void begin_game(const PoolSpec& pool, const std::string& game_key) = 0;
  virtual ImageId caption_guess(const QuestionerView& view) = 0;
  virtual std::string next_question(const QuestionerView& view) = 0;
  virtual ImageId round_guess(const QuestionerView& view) = 0;
  /// Full ordering of the pool; the final phase clicks through it until the secret.
  virtual std::vector<ImageId> final_ranking(const QuestionerView& view) = 0;

  virtual std::string label() const = 0;
};

enum class QuestionerKind {
  Scripted,        // fixed question list, seeded random guessing
  RandomGuesser,   // generic questions, uniform random guesses
  EmbeddingOracle, // knows the secret's embedding; ranks by true distance
  AttributeSeeker, // asks binary attribute questions and ranks by agreement
};

std::string_view to_string(QuestionerKind kind);
/// Accepts "scripted", "random", "oracle", "seeker" (and the long names).
QuestionerKind questioner_kind_from(std::string_view name);

struct QuestionerPolicy {
  QuestionerKind kind = QuestionerKind::RandomGuesser;
  std::vector<std::string> questions;  // Scripted; cycled for RandomGuesser when nonempty
  std::uint64_t seed = 0;
  std::shared_ptr<const pools::EmbeddingStore> embeddings;  // EmbeddingOracle
  std::shared_ptr<const AttributeTable> attributes;         // AttributeSeeker

  /// Throws InvalidParameter when a kind's required inputs are missing or
  /// the scripted list is shorter than `dialog_rounds`.
  void validate(int dialog_rounds) const;
};

std::unique_ptr<Questioner> make_questioner(const QuestionerPolicy& policy, int dialog_rounds);

/// Generic questions used when a policy has no script.
const std::vector<std::string>& generic_questions();

}  // namespace guesswhich::agents
