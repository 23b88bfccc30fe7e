#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "guesswhich/agent.hpp"

namespace guesswhich::service {

/// Which answerer backs a condition label.
struct ConditionSpec {
  std::string label;
  std::string answerer = "truthful";  // truthful | noisy | http
  std::string agent_url;              // http only
  double flip_prob = 0.1;             // noisy only
  std::uint64_t seed = 0;             // noisy only

  bool operator==(const ConditionSpec&) const = default;
};

/// "label[=answerer]" items separated by commas. The answerer part may be
/// "truthful", "noisy", "noisy:<flip_prob>" or an http(s) URL. Throws InvalidConfig.
std::vector<ConditionSpec> parse_condition_list(std::string_view text);

/// Array of {label, answerer, agent_url, flip_prob, seed}. Throws InvalidConfig.
std::vector<ConditionSpec> conditions_from_json(const nlohmann::json& j);

/// Truthful and noisy answerers need `attributes`; http answerers use
/// `timeout` per request. Throws InvalidConfig.
std::map<std::string, std::shared_ptr<agents::AnswerAgent>> build_condition_agents(
    const std::vector<ConditionSpec>& specs, std::shared_ptr<const agents::AttributeTable> attributes,
    std::chrono::milliseconds timeout);

}  // namespace guesswhich::service
