#include "guesswhich/service/conditions.hpp"

#include <charconv>
#include <set>

#include "guesswhich/error.hpp"
#include "guesswhich/http_agent.hpp"

namespace guesswhich::service {

namespace {

[[noreturn]] void invalid(const std::string& message) { throw Error(ErrorCode::InvalidConfig, message); }

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool is_url(std::string_view s) { return s.starts_with("http://") || s.starts_with("https://"); }

ConditionSpec parse_item(std::string_view item) {
  ConditionSpec spec;
  const auto eq = item.find('=');
  spec.label = std::string(trim(item.substr(0, eq)));
  if (spec.label.empty()) invalid("condition without a label in '" + std::string(item) + "'");
  if (eq == std::string_view::npos) return spec;

  const auto answerer = trim(item.substr(eq + 1));
  if (is_url(answerer)) {
    spec.answerer = "http";
    spec.agent_url = std::string(answerer);
  } else if (answerer.starts_with("noisy:")) {
    spec.answerer = "noisy";
    const auto num = answerer.substr(6);
    double p = 0.0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), p);
    if (ec != std::errc() || ptr != num.data() + num.size())
      invalid("bad flip probability in '" + std::string(item) + "'");
    spec.flip_prob = p;
  } else {
    spec.answerer = std::string(answerer);
  }
  return spec;
}

void check(const std::vector<ConditionSpec>& specs) {
  if (specs.empty()) invalid("no conditions configured");
  std::set<std::string> labels;
  for (const auto& s : specs) {
    if (!labels.insert(s.label).second) invalid("duplicate condition label '" + s.label + "'");
    if (s.answerer != "truthful" && s.answerer != "noisy" && s.answerer != "http")
      invalid("condition '" + s.label + "': unknown answerer '" + s.answerer + "'");
    if (s.answerer == "http" && !is_url(s.agent_url))
      invalid("condition '" + s.label + "' needs an http(s) agent_url");
    if (s.answerer == "noisy" && !(s.flip_prob >= 0.0 && s.flip_prob <= 1.0))
      invalid("condition '" + s.label + "': flip_prob must be in [0, 1]");
  }
}

}  // namespace

std::vector<ConditionSpec> parse_condition_list(std::string_view text) {
  std::vector<ConditionSpec> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto item = trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!item.empty()) out.push_back(parse_item(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  check(out);
  return out;
}

std::vector<ConditionSpec> conditions_from_json(const nlohmann::json& j) {
  if (!j.is_array()) invalid("'conditions' must be an array");
  std::vector<ConditionSpec> out;
  for (const auto& item : j) {
    if (item.is_string()) {
      out.push_back(parse_item(item.get<std::string>()));
      continue;
    }
    if (!item.is_object() || !item.contains("label") || !item["label"].is_string())
      invalid("each condition needs a string 'label'");
    ConditionSpec spec;
    try {
      spec.label = item["label"].get<std::string>();
      spec.answerer = item.value("answerer", spec.answerer);
      spec.agent_url = item.value("agent_url", spec.agent_url);
      spec.flip_prob = item.value("flip_prob", spec.flip_prob);
      spec.seed = item.value("seed", spec.seed);
    } catch (const nlohmann::json::exception& e) {
      invalid("condition '" + spec.label + "': " + e.what());
    }
    if (is_url(spec.answerer)) {
      spec.agent_url = spec.answerer;
      spec.answerer = "http";
    }
    out.push_back(std::move(spec));
  }
  check(out);
  return out;
}

std::map<std::string, std::shared_ptr<agents::AnswerAgent>> build_condition_agents(
    const std::vector<ConditionSpec>& specs, std::shared_ptr<const agents::AttributeTable> attributes,
    std::chrono::milliseconds timeout) {
  check(specs);
  std::map<std::string, std::shared_ptr<agents::AnswerAgent>> out;
  for (const auto& s : specs) {
    if (s.answerer == "http") {
      out[s.label] = std::make_shared<agents::HttpAgent>(s.agent_url, timeout);
      continue;
    }
    if (!attributes) invalid("condition '" + s.label + "' needs attribute metadata (a categories file)");
    agents::TruthfulSpec truthful{attributes};
    if (s.answerer == "truthful")
      out[s.label] = agents::make_baseline_answerer(truthful);
    else
      out[s.label] = agents::make_baseline_answerer(agents::NoisySpec{truthful, s.flip_prob, s.seed});
  }
  return out;
}

}  // namespace guesswhich::service
