#include "guesswhich/questioner.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>

#include "guesswhich/error.hpp"
#include "guesswhich/rng.hpp"

namespace guesswhich::agents {

const std::vector<std::string>& generic_questions() {
  static const std::vector<std::string> kQuestions{
      "Is it indoors?",          "Are there any people?", "What color is the main object?",
      "How many people are there?", "Is it daytime?",      "Are there any animals?",
      "Is there any text?",      "What is in the background?", "Is the photo in color?",
      "Is anyone smiling?",
  };
  return kQuestions;
}

std::string_view to_string(QuestionerKind kind) {
  switch (kind) {
    case QuestionerKind::Scripted: return "scripted";
    case QuestionerKind::RandomGuesser: return "random";
    case QuestionerKind::EmbeddingOracle: return "oracle";
    case QuestionerKind::AttributeSeeker: return "seeker";
  }
  return "?";
}

QuestionerKind questioner_kind_from(std::string_view name) {
  if (name == "scripted") return QuestionerKind::Scripted;
  if (name == "random" || name == "random-guesser") return QuestionerKind::RandomGuesser;
  if (name == "oracle" || name == "embedding-oracle") return QuestionerKind::EmbeddingOracle;
  if (name == "seeker" || name == "attribute-seeker") return QuestionerKind::AttributeSeeker;
  throw Error(ErrorCode::InvalidParameter, "unknown questioner policy '" + std::string(name) + "'");
}

void QuestionerPolicy::validate(int dialog_rounds) const {
  switch (kind) {
    case QuestionerKind::Scripted:
      if (static_cast<int>(questions.size()) < dialog_rounds)
        throw Error(ErrorCode::InvalidParameter, "scripted questioner has " + std::to_string(questions.size()) +
                                                     " questions, needs " + std::to_string(dialog_rounds));
      break;
    case QuestionerKind::EmbeddingOracle:
      if (!embeddings) throw Error(ErrorCode::InvalidParameter, "embedding oracle needs embeddings");
      break;
    case QuestionerKind::AttributeSeeker:
      if (!attributes) throw Error(ErrorCode::InvalidParameter, "attribute seeker needs attribute metadata");
      break;
    case QuestionerKind::RandomGuesser:
      break;
  }
}

namespace {

/// Scripted or generic questions, uniform random guesses, random final order.
class RandomQuestioner : public Questioner {
 public:
  RandomQuestioner(std::vector<std::string> questions, std::uint64_t seed, QuestionerKind kind)
      : questions_(questions.empty() ? generic_questions() : std::move(questions)), seed_(seed), kind_(kind) {}

  void begin_game(const PoolSpec& pool, const std::string& game_key) override {
    rng_.emplace(derive_seed(seed_, game_key));
    pool_ids_ = pool.image_ids;
  }

  ImageId caption_guess(const QuestionerView&) override { return random_image(); }

  std::string next_question(const QuestionerView& view) override {
    return questions_[static_cast<std::size_t>(view.round - 1) % questions_.size()];
  }

  ImageId round_guess(const QuestionerView&) override { return random_image(); }

  std::vector<ImageId> final_ranking(const QuestionerView&) override {
    auto order = pool_ids_;
    rng_->shuffle(order);
    return order;
  }

  std::string label() const override { return std::string(to_string(kind_)); }

 private:
  ImageId random_image() { return pool_ids_[static_cast<std::size_t>(rng_->uniform_index(pool_ids_.size()))]; }

  std::vector<std::string> questions_;
  std::uint64_t seed_;
  QuestionerKind kind_;
  std::optional<Rng> rng_;
  std::vector<ImageId> pool_ids_;
};

class EmbeddingOracleQuestioner : public Questioner {
 public:
  explicit EmbeddingOracleQuestioner(std::shared_ptr<const pools::EmbeddingStore> store) : store_(std::move(store)) {}

  void begin_game(const PoolSpec& pool, const std::string&) override {
    const auto secret = store_->vector(pool.secret_id);
    std::vector<std::pair<double, ImageId>> by_distance;
    for (const auto& id : pool.image_ids) {
      // secret sorts first even against exact duplicates
      const double d = id == pool.secret_id ? -1.0 : pools::euclidean_distance(secret, store_->vector(id));
      by_distance.emplace_back(d, id);
    }
    std::sort(by_distance.begin(), by_distance.end());
    ranking_.clear();
    for (auto& [d, id] : by_distance) ranking_.push_back(std::move(id));
  }

  ImageId caption_guess(const QuestionerView&) override { return ranking_.front(); }
  std::string next_question(const QuestionerView& view) override {
    const auto& qs = generic_questions();
    return qs[static_cast<std::size_t>(view.round - 1) % qs.size()];
  }
  ImageId round_guess(const QuestionerView&) override { return ranking_.front(); }
  std::vector<ImageId> final_ranking(const QuestionerView&) override { return ranking_; }
  std::string label() const override { return "oracle"; }

 private:
  std::shared_ptr<const pools::EmbeddingStore> store_;
  std::vector<ImageId> ranking_;
};

/// Greedy twenty-questions player: asks the attribute that best halves the
/// current front-runners and ranks images by how many answers they agree with.
class AttributeSeekerQuestioner : public Questioner {
 public:
  AttributeSeekerQuestioner(std::shared_ptr<const AttributeTable> attributes, std::uint64_t seed)
      : attributes_(std::move(attributes)), seed_(seed) {}

  void begin_game(const PoolSpec& pool, const std::string& game_key) override {
    rng_.emplace(derive_seed(seed_, game_key));
    ids_ = pool.image_ids;
    scores_.assign(ids_.size(), 0);
    tiebreak_.resize(ids_.size());
    for (auto& t : tiebreak_) t = rng_->next_u64();
    asked_.clear();
    absorbed_ = 0;
  }

  ImageId caption_guess(const QuestionerView& view) override { return best(view); }

  std::string next_question(const QuestionerView& view) override {
    absorb(view);
    const auto front = front_runners();
    std::optional<std::string> pick;
    std::size_t best_balance = 0;
    for (const auto& attr : pool_vocabulary()) {
      if (asked_.contains(attr)) continue;
      std::size_t with = 0;
      for (auto i : front) with += attributes_->has(ids_[i], attr) ? 1 : 0;
      const std::size_t balance = std::min(with, front.size() - with);
      if (!pick || balance > best_balance) {
        pick = attr;
        best_balance = balance;
      }
    }
    if (!pick) {
      const auto& qs = generic_questions();
      return qs[static_cast<std::size_t>(view.round - 1) % qs.size()];
    }
    asked_.insert(*pick);
    return "Is there a " + *pick + "?";
  }

  ImageId round_guess(const QuestionerView& view) override { return best(view); }

  std::vector<ImageId> final_ranking(const QuestionerView& view) override {
    absorb(view);
    std::vector<std::size_t> order(ids_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scores_[a] != scores_[b]) return scores_[a] > scores_[b];
      return tiebreak_[a] < tiebreak_[b];
    });
    std::vector<ImageId> out;
    for (auto i : order) out.push_back(ids_[i]);
    return out;
  }

  std::string label() const override { return "seeker"; }

 private:
  void absorb(const QuestionerView& view) {
    if (!view.history) return;
    const auto& history = *view.history;
    for (; absorbed_ < history.size(); ++absorbed_) {
      const auto& qa = history[absorbed_];
      const auto attr = parse_binary_question(qa.question, attributes_->vocabulary());
      if (!attr || !is_binary_answer(qa.answer)) continue;
      const bool yes = qa.answer == "yes";
      for (std::size_t i = 0; i < ids_.size(); ++i)
        if (attributes_->has(ids_[i], *attr) == yes) ++scores_[i];
    }
  }

  std::vector<std::size_t> front_runners() const {
    const int top = *std::max_element(scores_.begin(), scores_.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ids_.size(); ++i)
      if (scores_[i] == top) out.push_back(i);
    return out;
  }

  std::vector<std::string> pool_vocabulary() const {
    std::set<std::string> vocab;
    for (const auto& id : ids_) {
      const auto& attrs = attributes_->attributes_of(id);
      vocab.insert(attrs.begin(), attrs.end());
    }
    return {vocab.begin(), vocab.end()};
  }

  ImageId best(const QuestionerView& view) {
    absorb(view);
    std::size_t pick = 0;
    for (std::size_t i = 1; i < ids_.size(); ++i) {
      if (scores_[i] > scores_[pick] || (scores_[i] == scores_[pick] && tiebreak_[i] < tiebreak_[pick])) pick = i;
    }
    return ids_[pick];
  }

  std::shared_ptr<const AttributeTable> attributes_;
  std::uint64_t seed_;
  std::optional<Rng> rng_;
  std::vector<ImageId> ids_;
  std::vector<int> scores_;
  std::vector<std::uint64_t> tiebreak_;
  std::set<std::string> asked_;
  std::size_t absorbed_ = 0;
};

}  // namespace

std::unique_ptr<Questioner> make_questioner(const QuestionerPolicy& policy, int dialog_rounds) {
  policy.validate(dialog_rounds);
  switch (policy.kind) {
    case QuestionerKind::Scripted:
    case QuestionerKind::RandomGuesser:
      return std::make_unique<RandomQuestioner>(policy.questions, policy.seed, policy.kind);
    case QuestionerKind::EmbeddingOracle:
      return std::make_unique<EmbeddingOracleQuestioner>(policy.embeddings);
    case QuestionerKind::AttributeSeeker:
      return std::make_unique<AttributeSeekerQuestioner>(policy.attributes, policy.seed);
  }
  throw Error(ErrorCode::InvalidParameter, "unknown questioner kind");
}

}  // namespace guesswhich::agents
