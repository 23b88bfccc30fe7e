#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "guesswhich/embedding.hpp"
#include "guesswhich/game_log.hpp"
#include "guesswhich/stats.hpp"
#include "guesswhich/survey.hpp"

namespace guesswhich::analytics {

/// Prefix tree of leading question tokens. A node's count is the number of
/// questions that start with the path to it; the root counts all tokenized questions.
struct NgramNode {
  std::string token;
  int count = 0;
  std::map<std::string, NgramNode> children;
};

/// Tokens are lowercased, punctuation-stripped and whitespace-split.
NgramNode question_ngram_distribution(const std::vector<std::string>& questions, int depth);

struct DimensionSummary {
  std::string dimension;
  ConfidenceInterval ci;
};

struct SurveySummary {
  std::string condition;
  std::size_t responses = 0;
  std::vector<DimensionSummary> dimensions;  // in SurveyResponse::kDimensionNames order
};

/// Per-condition, per-dimension means with bootstrap CIs (a single response
/// yields a degenerate interval). Throws EmptyInput.
std::vector<SurveySummary> survey_aggregate(const std::vector<std::pair<std::string, SurveyResponse>>& responses,
                                            const BootstrapOptions& options = {});

struct ReportFilters {
  bool exclude_incomplete = true;  // abandoned and aborted games
  bool exclude_fallback = true;    // games with any canned fallback answer
};

struct ReportOptions {
  ReportFilters filters;
  std::uint64_t seed = 0;
  int bootstrap_resamples = 1000;
  double level = 0.95;
  int ngram_depth = 3;
  int baseline_repeats = 100;  // random-guesser simulations per logged game
};

struct SeriesPoint {
  int x = 0;
  std::size_t n = 0;
  ConfidenceInterval ci;  // ci.point is the mean
};

struct ConditionSummary {
  std::string condition;
  std::size_t games = 0;
  ConfidenceInterval mean_rank;
  double mean_rank_stderr = 0.0;
  ConfidenceInterval mean_reciprocal_rank;
};

struct PairwiseTest {
  std::string a;
  std::string b;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  MannWhitneyResult result;
};

struct Report {
  ReportOptions options;
  std::size_t games_read = 0;
  std::size_t games_used = 0;
  std::size_t excluded_incomplete = 0;
  std::size_t excluded_fallback = 0;

  std::vector<ConditionSummary> conditions;
  std::optional<ConditionSummary> random_baseline;
  // series name (condition or "random-baseline") -> points
  std::map<std::string, std::vector<SeriesPoint>> mr_by_game_index;
  std::map<std::string, std::vector<SeriesPoint>> coarse_mr_by_round;  // round 0 is the caption guess
  std::vector<PairwiseTest> tests;
  std::vector<SurveySummary> survey;
  NgramNode ngrams;
  std::vector<std::string> warnings;
};

inline constexpr std::string_view kRandomBaselineSeries = "random-baseline";

/// Pure function of its inputs. `embeddings` enables the coarse per-round
/// series; `pools`, when given, is checked against the pools in the logs.
Report build_report(const std::vector<logs::LogRecord>& records, const pools::EmbeddingStore* embeddings,
                    const std::vector<PoolSpec>* pools, const ReportOptions& options = {});

nlohmann::json to_json(const Report& report);

/// Writes report.json plus one TSV table per figure/table into `dir`.
void write_report(const Report& report, const std::filesystem::path& dir);

}  // namespace guesswhich::analytics
