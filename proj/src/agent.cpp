#include "guesswhich/agent.hpp"

#include <algorithm>
#include <cctype>

#include <json.hpp>

#include "guesswhich/error.hpp"
#include "guesswhich/rng.hpp"

namespace guesswhich::agents {

using nlohmann::json;

json to_json(const AnswerRequest& req) {
  json history = json::array();
  for (const auto& qa : req.history) history.push_back({{"question", qa.question}, {"answer", qa.answer}});
  return {{"protocol_version", kProtocolVersion}, {"session_id", req.session_id}, {"caption", req.caption},
          {"history", std::move(history)},         {"question", req.question},     {"secret_image_ref", req.secret_image_ref}};
}

AnswerRequest answer_request_from_json(const json& j) {
  try {
    if (j.at("protocol_version").get<int>() != kProtocolVersion)
      throw Error(ErrorCode::SchemaError, "unsupported protocol_version");
    AnswerRequest req;
    req.session_id = j.at("session_id").get<std::string>();
    req.caption = j.at("caption").get<std::string>();
    for (const auto& qa : j.at("history"))
      req.history.push_back({qa.at("question").get<std::string>(), qa.at("answer").get<std::string>()});
    req.question = j.at("question").get<std::string>();
    req.secret_image_ref = j.at("secret_image_ref").get<std::string>();
    return req;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("answer request: ") + e.what());
  }
}

json to_json(const AnswerResponse& resp) {
  return {{"protocol_version", kProtocolVersion},
          {"session_id", resp.session_id},
          {"answer", resp.answer},
          {"latency_ms", resp.latency.count()}};
}

AnswerResponse answer_response_from_json(const json& j) {
  try {
    if (j.at("protocol_version").get<int>() != kProtocolVersion)
      throw Error(ErrorCode::MalformedResponse, "unsupported protocol_version");
    AnswerResponse resp;
    resp.session_id = j.at("session_id").get<std::string>();
    resp.answer = j.at("answer").get<std::string>();
    resp.latency = std::chrono::milliseconds(j.value("latency_ms", std::int64_t{0}));
    return resp;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("answer response: ") + e.what());
  }
}

void validate_request(const AnswerRequest& req, int dialog_rounds) {
  if (std::all_of(req.question.begin(), req.question.end(), [](unsigned char c) { return std::isspace(c) != 0; }))
    throw Error(ErrorCode::SchemaError, "question is empty");
  if (static_cast<int>(req.history.size()) >= dialog_rounds)
    throw Error(ErrorCode::SchemaError, "history already holds " + std::to_string(req.history.size()) + " rounds");
}

// ---------------------------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::exchange(current, {}));
    } else if (!std::ispunct(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

std::string join(const std::vector<std::string>& tokens, std::size_t from) {
  std::string out;
  for (std::size_t i = from; i < tokens.size(); ++i) {
    if (!out.empty()) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::string normalize(std::string_view text) { return join(tokenize(text), 0); }

}  // namespace

AttributeTable::AttributeTable(std::unordered_map<ImageId, std::set<std::string>> attributes) {
  for (auto& [id, attrs] : attributes) {
    std::set<std::string> normalized;
    for (const auto& a : attrs) {
      auto n = normalize(a);
      if (n.empty()) continue;
      vocabulary_.insert(n);
      normalized.insert(std::move(n));
    }
    attributes_.emplace(id, std::move(normalized));
  }
}

AttributeTable AttributeTable::from_categories(const std::map<std::string, std::vector<ImageId>>& categories) {
  std::unordered_map<ImageId, std::set<std::string>> attrs;
  for (const auto& [category, members] : categories)
    for (const auto& id : members) attrs[id].insert(category);
  return AttributeTable(std::move(attrs));
}

bool AttributeTable::has(const ImageId& id, const std::string& attribute) const {
  auto it = attributes_.find(id);
  return it != attributes_.end() && it->second.contains(attribute);
}

const std::set<std::string>& AttributeTable::attributes_of(const ImageId& id) const {
  static const std::set<std::string> kNone;
  auto it = attributes_.find(id);
  return it == attributes_.end() ? kNone : it->second;
}

std::optional<std::string> parse_binary_question(std::string_view question, const std::set<std::string>& vocabulary) {
  const auto tokens = tokenize(question);
  if (tokens.size() < 3 || (tokens[0] != "is" && tokens[0] != "are") || tokens[1] != "there") return std::nullopt;
  std::size_t start = 2;
  static const std::set<std::string> kDeterminers{"a", "an", "any", "some", "the"};
  if (kDeterminers.contains(tokens[start]) && tokens.size() > 3) ++start;
  const auto phrase = join(tokens, start);
  if (vocabulary.contains(phrase)) return phrase;
  for (std::string_view suffix : {"es", "s"}) {
    if (phrase.size() > suffix.size() && phrase.ends_with(suffix)) {
      auto singular = phrase.substr(0, phrase.size() - suffix.size());
      if (vocabulary.contains(singular)) return singular;
    }
  }
  return std::nullopt;
}

bool is_binary_answer(std::string_view answer) { return answer == "yes" || answer == "no"; }

// ---------------------------------------------------------------------------

namespace {

class ScriptedAnswerer final : public AnswerAgent {
 public:
  explicit ScriptedAnswerer(ScriptedSpec spec) : default_answer_(std::move(spec.default_answer)) {
    for (auto& [q, a] : spec.table) table_.emplace(normalize(q), std::move(a));
  }

  AnswerResponse answer(const AnswerRequest& req) override {
    auto it = table_.find(normalize(req.question));
    return {req.session_id, it == table_.end() ? default_answer_ : it->second, std::chrono::milliseconds(0)};
  }

  std::string name() const override { return "scripted"; }

 private:
  std::map<std::string, std::string> table_;
  std::string default_answer_;
};

class TruthfulAnswerer final : public AnswerAgent {
 public:
  explicit TruthfulAnswerer(TruthfulSpec spec) : spec_(std::move(spec)) {}

  AnswerResponse answer(const AnswerRequest& req) override {
    return {req.session_id, truthful_answer(req), std::chrono::milliseconds(0)};
  }

  std::string truthful_answer(const AnswerRequest& req) const {
    const auto attr = parse_binary_question(req.question, spec_.attributes->vocabulary());
    if (!attr) return spec_.default_answer;
    return spec_.attributes->has(req.secret_image_ref, *attr) ? "yes" : "no";
  }

  std::string name() const override { return "truthful"; }

 private:
  TruthfulSpec spec_;
};

class NoisyAnswerer final : public AnswerAgent {
 public:
  explicit NoisyAnswerer(NoisySpec spec)
      : truthful_(spec.truthful), flip_prob_(spec.flip_prob), seed_(spec.seed) {}

  AnswerResponse answer(const AnswerRequest& req) override {
    auto text = truthful_.truthful_answer(req);
    if (is_binary_answer(text) && flip_draw(req) < flip_prob_) text = text == "yes" ? "no" : "yes";
    return {req.session_id, std::move(text), std::chrono::milliseconds(0)};
  }

  std::string name() const override { return "noisy"; }

 private:
  // Keyed on the idempotency triple so redelivered jobs get the same answer.
  double flip_draw(const AnswerRequest& req) const {
    std::uint64_t h = stable_hash(req.session_id);
    h = stable_hash(std::to_string(req.history.size()), h);
    h = stable_hash(req.question, h);
    return static_cast<double>(splitmix64(seed_ ^ h) >> 11) * 0x1.0p-53;
  }

  TruthfulAnswerer truthful_;
  double flip_prob_;
  std::uint64_t seed_;
};

void check_truthful(const TruthfulSpec& spec) {
  if (!spec.attributes) throw Error(ErrorCode::InvalidParameter, "truthful answerer needs an attribute table");
}

}  // namespace

std::shared_ptr<AnswerAgent> make_baseline_answerer(BaselineSpec spec) {
  return std::visit(
      [](auto&& s) -> std::shared_ptr<AnswerAgent> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ScriptedSpec>) {
          return std::make_shared<ScriptedAnswerer>(std::move(s));
        } else if constexpr (std::is_same_v<T, TruthfulSpec>) {
          check_truthful(s);
          return std::make_shared<TruthfulAnswerer>(std::move(s));
        } else {
          check_truthful(s.truthful);
          if (!(s.flip_prob >= 0.0 && s.flip_prob <= 1.0))
            throw Error(ErrorCode::InvalidParameter, "flip probability must be in [0, 1]");
          return std::make_shared<NoisyAnswerer>(std::move(s));
        }
      },
      std::move(spec));
}

}  // namespace guesswhich::agents
