#include "guesswhich/report.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "guesswhich/agent.hpp"
#include "guesswhich/error.hpp"
#include "guesswhich/rng.hpp"

namespace guesswhich::analytics {

using nlohmann::json;

NgramNode question_ngram_distribution(const std::vector<std::string>& questions, int depth) {
  if (depth < 1) throw Error(ErrorCode::InvalidParameter, "n-gram depth must be >= 1");
  NgramNode root;
  for (const auto& q : questions) {
    const auto tokens = agents::tokenize(q);
    if (tokens.empty()) continue;
    ++root.count;
    NgramNode* node = &root;
    const auto limit = std::min(tokens.size(), static_cast<std::size_t>(depth));
    for (std::size_t i = 0; i < limit; ++i) {
      auto& child = node->children[tokens[i]];
      child.token = tokens[i];
      ++child.count;
      node = &child;
    }
  }
  return root;
}

namespace {

ConfidenceInterval mean_with_ci(const std::vector<double>& values, const BootstrapOptions& options) {
  if (values.size() == 1) return {values[0], values[0], values[0]};
  return bootstrap_ci(values, options);
}

BootstrapOptions seeded(const ReportOptions& options, const std::string& label) {
  return {options.bootstrap_resamples, options.level, derive_seed(options.seed, label)};
}

std::vector<SeriesPoint> series_from(const std::map<int, std::vector<double>>& by_x, const ReportOptions& options,
                                     const std::string& label) {
  std::vector<SeriesPoint> out;
  for (const auto& [x, values] : by_x) {
    SeriesPoint p;
    p.x = x;
    p.n = values.size();
    p.ci = mean_with_ci(values, seeded(options, label + ":" + std::to_string(x)));
    out.push_back(p);
  }
  return out;
}

std::vector<double> reciprocals(const std::vector<double>& ranks) {
  std::vector<double> out;
  out.reserve(ranks.size());
  for (double r : ranks) out.push_back(1.0 / r);
  return out;
}

ConditionSummary summarize(const std::string& name, const std::vector<double>& ranks,
                           const std::vector<double>& reciprocal, const ReportOptions& options) {
  ConditionSummary s;
  s.condition = name;
  s.games = ranks.size();
  s.mean_rank = mean_with_ci(ranks, seeded(options, "mr:" + name));
  s.mean_reciprocal_rank = mean_with_ci(reciprocal, seeded(options, "mrr:" + name));
  s.mean_rank_stderr = ranks.size() >= 2 ? standard_error(ranks) : 0.0;
  return s;
}

/// Coarse ranks for rounds 0..k of one replayed game; empty if any embedding is missing.
std::vector<int> coarse_ranks(const game::GameSession& session, const pools::EmbeddingStore& store) {
  for (const auto& id : session.pool.image_ids)
    if (!store.contains(id)) return {};
  std::vector<int> out;
  for (const auto& id : session.round_guesses())
    out.push_back(coarse_round_rank(store, session.pool, id, session.pool.secret_id));
  return out;
}

}  // namespace

std::vector<SurveySummary> survey_aggregate(const std::vector<std::pair<std::string, SurveyResponse>>& responses,
                                            const BootstrapOptions& options) {
  if (responses.empty()) throw Error(ErrorCode::EmptyInput, "no survey responses");
  std::map<std::string, std::vector<const SurveyResponse*>> by_condition;
  for (const auto& [condition, response] : responses) by_condition[condition].push_back(&response);

  std::vector<SurveySummary> out;
  for (const auto& [condition, list] : by_condition) {
    SurveySummary summary;
    summary.condition = condition;
    summary.responses = list.size();
    for (std::size_t d = 0; d < SurveyResponse::kDimensions; ++d) {
      std::vector<double> values;
      values.reserve(list.size());
      for (const auto* r : list) values.push_back(r->ratings[d]);
      const std::string dim(SurveyResponse::kDimensionNames[d]);
      BootstrapOptions opt = options;
      opt.seed = derive_seed(options.seed, "survey:" + condition + ":" + dim);
      summary.dimensions.push_back({dim, mean_with_ci(values, opt)});
    }
    out.push_back(std::move(summary));
  }
  return out;
}

Report build_report(const std::vector<logs::LogRecord>& records, const pools::EmbeddingStore* embeddings,
                    const std::vector<PoolSpec>* pools, const ReportOptions& options) {
  if (options.baseline_repeats < 1) throw Error(ErrorCode::InvalidParameter, "baseline repeats must be >= 1");
  Report report;
  report.options = options;

  std::map<std::string, const PoolSpec*> known_pools;
  if (pools)
    for (const auto& p : *pools) known_pools[p.pool_id] = &p;
  std::set<std::string> mismatched_pools;

  std::map<std::string, std::vector<double>> ranks_by_condition;
  std::map<std::string, std::map<int, std::vector<double>>> by_game_index;
  std::map<std::string, std::map<int, std::vector<double>>> by_round;
  std::vector<double> baseline_ranks;
  std::vector<double> baseline_reciprocal;
  std::map<int, std::vector<double>> baseline_by_index;
  std::map<int, std::vector<double>> baseline_by_round;
  std::vector<std::string> questions;
  std::vector<std::pair<std::string, SurveyResponse>> surveys;
  std::size_t coarse_skipped = 0;

  for (const auto& record : records) {
    if (const auto* survey = std::get_if<logs::SurveyRecord>(&record)) {
      surveys.emplace_back(survey->condition, survey->survey);
      continue;
    }
    const auto* game = std::get_if<logs::GameLogRecord>(&record);
    if (!game) continue;
    ++report.games_read;
    if (options.filters.exclude_incomplete && game->status != logs::GameStatus::Complete) {
      ++report.excluded_incomplete;
      continue;
    }
    if (options.filters.exclude_fallback && game->fallback_contaminated()) {
      ++report.excluded_fallback;
      continue;
    }
    if (game->status != logs::GameStatus::Complete || !game->induced_rank) {
      // incomplete games carry no rank; their questions still count
      ++report.games_used;
      for (const auto& e : game->events)
        if (const auto* q = std::get_if<game::QuestionAsked>(&e.payload)) questions.push_back(q->text);
      continue;
    }
    ++report.games_used;
    if (pools) {
      auto it = known_pools.find(game->pool.pool_id);
      if (it == known_pools.end() || it->second->image_ids != game->pool.image_ids ||
          it->second->secret_id != game->pool.secret_id)
        mismatched_pools.insert(game->pool.pool_id);
    }

    const double rank = *game->induced_rank;
    ranks_by_condition[game->condition].push_back(rank);
    by_game_index[game->condition][game->game_index].push_back(rank);
    for (const auto& e : game->events)
      if (const auto* q = std::get_if<game::QuestionAsked>(&e.payload)) questions.push_back(q->text);

    // A random guesser's final rank is uniform over the pool; each game
    // contributes the mean rank and mean reciprocal rank of its repeats.
    Rng rng(derive_seed(options.seed, "baseline:" + game->session_id));
    const auto n = game->pool.image_ids.size();
    double sum = 0.0;
    double reciprocal_sum = 0.0;
    for (int i = 0; i < options.baseline_repeats; ++i) {
      const auto r = static_cast<double>(rng.uniform_index(n) + 1);
      sum += r;
      reciprocal_sum += 1.0 / r;
    }
    const double baseline = sum / options.baseline_repeats;
    baseline_ranks.push_back(baseline);
    baseline_reciprocal.push_back(reciprocal_sum / options.baseline_repeats);
    baseline_by_index[game->game_index].push_back(baseline);

    if (embeddings) {
      const auto session = logs::replay_session(*game);
      const auto coarse = coarse_ranks(session, *embeddings);
      if (coarse.empty()) {
        ++coarse_skipped;
        continue;
      }
      const int first_round = session.caption_guess ? 0 : 1;
      for (std::size_t i = 0; i < coarse.size(); ++i)
        by_round[game->condition][first_round + static_cast<int>(i)].push_back(coarse[i]);
      for (std::size_t i = 0; i < coarse.size(); ++i) {
        double acc = 0.0;
        for (int r = 0; r < options.baseline_repeats; ++r) {
          const auto& guess = session.pool.image_ids[rng.uniform_index(n)];
          acc += coarse_round_rank(*embeddings, session.pool, guess, session.pool.secret_id);
        }
        baseline_by_round[first_round + static_cast<int>(i)].push_back(acc / options.baseline_repeats);
      }
    }
  }

  for (const auto& [condition, ranks] : ranks_by_condition) {
    report.conditions.push_back(summarize(condition, ranks, reciprocals(ranks), options));
    report.mr_by_game_index[condition] = series_from(by_game_index[condition], options, "mr-index:" + condition);
  }
  const std::string baseline_name(kRandomBaselineSeries);
  if (!baseline_ranks.empty()) {
    report.random_baseline = summarize(baseline_name, baseline_ranks, baseline_reciprocal, options);
    report.mr_by_game_index[baseline_name] = series_from(baseline_by_index, options, "mr-index:" + baseline_name);
  }

  if (!embeddings) {
    report.warnings.push_back("no embeddings given; coarse per-round series omitted");
  } else {
    for (const auto& [condition, rounds] : by_round)
      report.coarse_mr_by_round[condition] = series_from(rounds, options, "coarse:" + condition);
    if (!baseline_by_round.empty())
      report.coarse_mr_by_round[baseline_name] = series_from(baseline_by_round, options, "coarse:" + baseline_name);
    if (coarse_skipped > 0)
      report.warnings.push_back(std::to_string(coarse_skipped) +
                                " game(s) left out of the coarse series: pool images without embeddings");
  }
  for (const auto& id : mismatched_pools)
    report.warnings.push_back("pool '" + id + "' in the logs differs from the given pools file");

  for (auto a = ranks_by_condition.begin(); a != ranks_by_condition.end(); ++a) {
    for (auto b = std::next(a); b != ranks_by_condition.end(); ++b) {
      PairwiseTest t;
      t.a = a->first;
      t.b = b->first;
      t.n_a = a->second.size();
      t.n_b = b->second.size();
      t.result = mann_whitney_u(a->second, b->second);
      report.tests.push_back(std::move(t));
    }
  }

  if (!surveys.empty()) {
    BootstrapOptions opt{options.bootstrap_resamples, options.level, options.seed};
    report.survey = survey_aggregate(surveys, opt);
  }
  report.ngrams = question_ngram_distribution(questions, options.ngram_depth);
  if (report.games_used == 0) report.warnings.push_back("no games left after filtering");
  return report;
}

namespace {

json ci_json(const ConfidenceInterval& ci) { return {{"mean", ci.point}, {"lo", ci.lo}, {"hi", ci.hi}}; }

json summary_json(const ConditionSummary& s) {
  return {{"condition", s.condition},
          {"n", s.games},
          {"mean_rank", ci_json(s.mean_rank)},
          {"mean_rank_stderr", s.mean_rank_stderr},
          {"mean_reciprocal_rank", ci_json(s.mean_reciprocal_rank)}};
}

json series_json(const std::map<std::string, std::vector<SeriesPoint>>& series, const char* x_name) {
  json out = json::object();
  for (const auto& [name, points] : series) {
    json arr = json::array();
    for (const auto& p : points) {
      auto j = ci_json(p.ci);
      j[x_name] = p.x;
      j["n"] = p.n;
      arr.push_back(std::move(j));
    }
    out[name] = std::move(arr);
  }
  return out;
}

json ngram_json(const NgramNode& node) {
  json children = json::array();
  for (const auto& [token, child] : node.children) children.push_back(ngram_json(child));
  return {{"token", node.token}, {"count", node.count}, {"children", std::move(children)}};
}

void ngram_rows(const NgramNode& node, const std::string& prefix, std::ostream& out) {
  for (const auto& [token, child] : node.children) {
    const auto path = prefix.empty() ? token : prefix + " " + token;
    out << path << '\t' << child.count << '\n';
    ngram_rows(child, path, out);
  }
}

std::ofstream open_table(const std::filesystem::path& path, const char* header) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::StorageError, "cannot write " + path.string());
  out << header << '\n';
  return out;
}

void series_rows(const std::map<std::string, std::vector<SeriesPoint>>& series, std::ostream& out) {
  for (const auto& [name, points] : series)
    for (const auto& p : points)
      out << name << '\t' << p.x << '\t' << p.n << '\t' << p.ci.point << '\t' << p.ci.lo << '\t' << p.ci.hi << '\n';
}

}  // namespace

nlohmann::json to_json(const Report& report) {
  json conditions = json::array();
  for (const auto& s : report.conditions) conditions.push_back(summary_json(s));
  json tests = json::array();
  for (const auto& t : report.tests) {
    tests.push_back({{"a", t.a},
                     {"b", t.b},
                     {"n_a", t.n_a},
                     {"n_b", t.n_b},
                     {"u_a", t.result.u_a},
                     {"u_b", t.result.u_b},
                     {"p_two_sided", t.result.p_two_sided},
                     {"method", t.result.method == PValueMethod::Exact ? "exact" : "normal"}});
  }
  json survey = json::array();
  for (const auto& s : report.survey) {
    json dims = json::object();
    for (const auto& d : s.dimensions) dims[d.dimension] = ci_json(d.ci);
    survey.push_back({{"condition", s.condition}, {"n", s.responses}, {"dimensions", std::move(dims)}});
  }
  const auto& o = report.options;
  return {{"options",
           {{"seed", o.seed},
            {"bootstrap_resamples", o.bootstrap_resamples},
            {"level", o.level},
            {"ngram_depth", o.ngram_depth},
            {"baseline_repeats", o.baseline_repeats},
            {"exclude_incomplete", o.filters.exclude_incomplete},
            {"exclude_fallback", o.filters.exclude_fallback}}},
          {"games_read", report.games_read},
          {"games_used", report.games_used},
          {"excluded_incomplete", report.excluded_incomplete},
          {"excluded_fallback", report.excluded_fallback},
          {"conditions", std::move(conditions)},
          {"random_baseline", report.random_baseline ? summary_json(*report.random_baseline) : json(nullptr)},
          {"mr_by_game_index", series_json(report.mr_by_game_index, "game_index")},
          {"coarse_mr_by_round", series_json(report.coarse_mr_by_round, "round")},
          {"mann_whitney", std::move(tests)},
          {"survey", std::move(survey)},
          {"question_ngrams", ngram_json(report.ngrams)},
          {"warnings", report.warnings}};
}

void write_report(const Report& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::StorageError, "cannot create " + dir.string() + ": " + ec.message());
  {
    std::ofstream out(dir / "report.json");
    if (!out) throw Error(ErrorCode::StorageError, "cannot write " + (dir / "report.json").string());
    out << to_json(report).dump(2) << '\n';
  }
  {
    auto out = open_table(dir / "conditions.tsv", "condition\tn\tmr\tmr_lo\tmr_hi\tmr_se\tmrr\tmrr_lo\tmrr_hi");
    auto row = [&](const ConditionSummary& s) {
      out << s.condition << '\t' << s.games << '\t' << s.mean_rank.point << '\t' << s.mean_rank.lo << '\t'
          << s.mean_rank.hi << '\t' << s.mean_rank_stderr << '\t' << s.mean_reciprocal_rank.point << '\t'
          << s.mean_reciprocal_rank.lo << '\t' << s.mean_reciprocal_rank.hi << '\n';
    };
    for (const auto& s : report.conditions) row(s);
    if (report.random_baseline) row(*report.random_baseline);
  }
  {
    auto out = open_table(dir / "mr_by_game_index.tsv", "series\tgame_index\tn\tmean\tlo\thi");
    series_rows(report.mr_by_game_index, out);
  }
  if (!report.coarse_mr_by_round.empty()) {
    auto out = open_table(dir / "coarse_mr_by_round.tsv", "series\tround\tn\tmean\tlo\thi");
    series_rows(report.coarse_mr_by_round, out);
  }
  {
    auto out = open_table(dir / "mann_whitney.tsv", "a\tb\tn_a\tn_b\tu_a\tu_b\tp_two_sided\tmethod");
    for (const auto& t : report.tests)
      out << t.a << '\t' << t.b << '\t' << t.n_a << '\t' << t.n_b << '\t' << t.result.u_a << '\t' << t.result.u_b
          << '\t' << t.result.p_two_sided << '\t' << (t.result.method == PValueMethod::Exact ? "exact" : "normal")
          << '\n';
  }
  if (!report.survey.empty()) {
    auto out = open_table(dir / "survey.tsv", "condition\tdimension\tn\tmean\tlo\thi");
    for (const auto& s : report.survey)
      for (const auto& d : s.dimensions)
        out << s.condition << '\t' << d.dimension << '\t' << s.responses << '\t' << d.ci.point << '\t' << d.ci.lo
            << '\t' << d.ci.hi << '\n';
  }
  {
    auto out = open_table(dir / "question_ngrams.tsv", "prefix\tcount");
    ngram_rows(report.ngrams, "", out);
  }
}

}  // namespace guesswhich::analytics
