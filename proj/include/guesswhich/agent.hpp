#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "guesswhich/types.hpp"

namespace guesswhich::agents {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::string_view kDefaultUnknownAnswer = "I can't tell.";

struct QaPair {
  std::string question;
  std::string answer;
  bool operator==(const QaPair&) const = default;
};

/// Everything an answerer needs for one turn; self-contained so agents can
/// be stateless.
struct AnswerRequest {
  std::string session_id;
  std::string caption;
  std::vector<QaPair> history;
  std::string question;
  std::string secret_image_ref;

  bool operator==(const AnswerRequest&) const = default;
};

struct AnswerResponse {
  std::string session_id;
  std::string answer;
  std::chrono::milliseconds latency{0};
};

/// Wire form carries "protocol_version". Parsing throws MalformedResponse
/// for responses and SchemaError for requests.
nlohmann::json to_json(const AnswerRequest& req);
AnswerRequest answer_request_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AnswerResponse& resp);
AnswerResponse answer_response_from_json(const nlohmann::json& j);

/// Throws SchemaError when the question is blank or history is too long.
void validate_request(const AnswerRequest& req, int dialog_rounds);

/// An answerer agent. Implementations must be safe to call concurrently and
/// must return the same answer for a repeated (session_id, history length,
/// question).
class AnswerAgent {
 public:
  virtual ~AnswerAgent() = default;
  /// May throw AgentTimeout, AgentUnavailable or MalformedResponse.
  virtual AnswerResponse answer(const AnswerRequest& req) = 0;
  virtual std::string name() const = 0;
};

/// Image id -> binary attributes (lowercase). Built from category metadata.
class AttributeTable {
 public:
  AttributeTable() = default;
  explicit AttributeTable(std::unordered_map<ImageId, std::set<std::string>> attributes);

  /// Inverts a category file: each category becomes an attribute of its members.
  static AttributeTable from_categories(const std::map<std::string, std::vector<ImageId>>& categories);

  bool has(const ImageId& id, const std::string& attribute) const;
  const std::set<std::string>& attributes_of(const ImageId& id) const;
  /// Every attribute that appears on any image.
  const std::set<std::string>& vocabulary() const { return vocabulary_; }

 private:
  std::unordered_map<ImageId, std::set<std::string>> attributes_;
  std::set<std::string> vocabulary_;
};

/// Lowercases, strips punctuation and splits on whitespace.
std::vector<std::string> tokenize(std::string_view text);

/// Parses "is/are there [a|an|any|some|the] <attribute>?" against a
/// vocabulary, accepting simple plurals. Returns the matched attribute.
std::optional<std::string> parse_binary_question(std::string_view question, const std::set<std::string>& vocabulary);

/// "yes"/"no" and nothing else.
bool is_binary_answer(std::string_view answer);

struct ScriptedSpec {
  std::map<std::string, std::string> table;  // keys compared after tokenize()
  std::string default_answer{kDefaultUnknownAnswer};
};

struct TruthfulSpec {
  std::shared_ptr<const AttributeTable> attributes;
  std::string default_answer{kDefaultUnknownAnswer};
};

struct NoisySpec {
  TruthfulSpec truthful;
  double flip_prob = 0.0;
  std::uint64_t seed = 0;
};

using BaselineSpec = std::variant<ScriptedSpec, TruthfulSpec, NoisySpec>;

/// Throws InvalidParameter for out-of-range flip probabilities or missing metadata.
std::shared_ptr<AnswerAgent> make_baseline_answerer(BaselineSpec spec);

}  // namespace guesswhich::agents
