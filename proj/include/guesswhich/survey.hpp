#pragma once

#include <array>
#include <string_view>

#include <json.hpp>

namespace guesswhich {

/// End-of-assignment perception survey: six 5-point Likert ratings.
struct SurveyResponse {
  static constexpr std::size_t kDimensions = 6;
  static constexpr std::array<std::string_view, kDimensions> kDimensionNames{
      "accuracy", "consistency", "image_understanding", "detail", "question_understanding", "fluency"};

  std::array<int, kDimensions> ratings{};

  /// Every rating in 1..5. Throws Error(SchemaError) otherwise.
  void validate() const;

  bool operator==(const SurveyResponse&) const = default;
};

nlohmann::json to_json(const SurveyResponse& survey);
/// Expects an object keyed by dimension name; all six required.
SurveyResponse survey_from_json(const nlohmann::json& ratings);

}  // namespace guesswhich
