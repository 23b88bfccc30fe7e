#include "guesswhich/survey.hpp"

#include <json.hpp>

#include "guesswhich/error.hpp"

namespace guesswhich {

void SurveyResponse::validate() const {
  for (std::size_t i = 0; i < kDimensions; ++i) {
    if (ratings[i] < 1 || ratings[i] > 5)
      throw Error(ErrorCode::SchemaError, "survey rating '" + std::string(kDimensionNames[i]) +
                                              "' must be in 1..5, got " + std::to_string(ratings[i]));
  }
}

nlohmann::json to_json(const SurveyResponse& survey) {
  nlohmann::json out = nlohmann::json::object();
  for (std::size_t i = 0; i < SurveyResponse::kDimensions; ++i)
    out[std::string(SurveyResponse::kDimensionNames[i])] = survey.ratings[i];
  return out;
}

SurveyResponse survey_from_json(const nlohmann::json& ratings) {
  if (!ratings.is_object()) throw Error(ErrorCode::SchemaError, "survey ratings must be an object");
  SurveyResponse survey;
  for (std::size_t i = 0; i < SurveyResponse::kDimensions; ++i) {
    const std::string name(SurveyResponse::kDimensionNames[i]);
    auto it = ratings.find(name);
    if (it == ratings.end() || !it->is_number_integer())
      throw Error(ErrorCode::SchemaError, "survey is missing integer rating '" + name + "'");
    survey.ratings[i] = it->get<int>();
  }
  survey.validate();
  return survey;
}

}  // namespace guesswhich
