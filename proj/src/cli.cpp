#include "guesswhich/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <pthread.h>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "guesswhich/error.hpp"
#include "guesswhich/game_log.hpp"
#include "guesswhich/http_agent.hpp"
#include "guesswhich/jsonl.hpp"
#include "guesswhich/pool_builder.hpp"
#include "guesswhich/report.hpp"
#include "guesswhich/service/conditions.hpp"
#include "guesswhich/service/server.hpp"
#include "guesswhich/simulation.hpp"

namespace guesswhich::cli {

using nlohmann::json;

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

namespace {

[[noreturn]] void usage(const std::string& message) { throw Error(ErrorCode::UsageError, message); }

std::string env_name(const std::string& option) {
  std::string out = "GUESSWHICH_";
  for (char c : option) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::optional<std::string> scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v.get<double>();
    return ss.str();
  }
  if (v.is_array()) {
    std::string joined;
    for (const auto& item : v) {
      auto text = scalar_text(item);
      if (!text || item.is_array()) return std::nullopt;
      if (!joined.empty()) joined += ',';
      joined += *text;
    }
    return joined;
  }
  return std::nullopt;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) usage("cannot read config file '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ParseError, "config file '" + path + "' is not valid JSON");
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, "config file '" + path + "' must hold a JSON object");
  return j;
}

/// Fills options not given as flags from the environment, then the config.
void resolve_sources(CLI::App& sub, const json& config, const EnvLookup& env) {
  for (CLI::Option* opt : sub.get_options()) {
    if (opt->count() > 0 || opt->get_positional()) continue;
    const auto name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    std::optional<std::string> value = env(env_name(name));
    if (!value) {
      std::string key = name;
      auto it = config.find(key);
      if (it == config.end()) {
        std::replace(key.begin(), key.end(), '-', '_');
        it = config.find(key);
      }
      if (it != config.end()) value = scalar_text(*it);
    }
    if (!value) continue;
    try {
      opt->add_result(*value);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      usage("option --" + name + ": " + e.what());
    }
  }
}

json resolved_config(CLI::App& sub) {
  json j = json::object();
  for (CLI::Option* opt : sub.get_options()) {
    const auto name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      std::string joined;
      for (const auto& r : results) joined += (joined.empty() ? "" : ",") + r;
      j[name] = joined;
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

std::vector<int> parse_int_list(const std::string& text, const char* option) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      usage(std::string("--") + option + " expects comma-separated integers, got '" + text + "'");
    }
  }
  return out;
}

std::map<ImageId, std::string> load_captions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot read captions file '" + path + "'");
  std::map<ImageId, std::string> out;
  for_each_jsonl_record(in, path, [&](const json& j, std::size_t line) {
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("caption") ||
        !j["caption"].is_string())
      throw Error(ErrorCode::SchemaError, path + ":" + std::to_string(line) + ": expected {id, caption}");
    out[j["id"].get<std::string>()] = j["caption"].get<std::string>();
  });
  return out;
}

std::vector<std::string> load_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot read '" + path + "'");
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);)
    if (line.find_first_not_of(" \t\r") != std::string::npos) out.push_back(line);
  return out;
}

std::shared_ptr<const agents::AttributeTable> load_attributes(const std::string& categories_path) {
  if (categories_path.empty()) return nullptr;
  return std::make_shared<const agents::AttributeTable>(
      agents::AttributeTable::from_categories(pools::load_categories_file(categories_path)));
}

struct AnswererOptions {
  std::string kind = "truthful";
  std::string attributes;
  double flip_prob = 0.1;
  std::uint64_t seed = 0;
  std::string script;
  std::string agent_url;
  int timeout_ms = 10000;
};

std::shared_ptr<agents::AnswerAgent> make_answerer(const AnswererOptions& o) {
  if (o.kind == "http" || !o.agent_url.empty()) {
    if (o.agent_url.empty()) usage("--answerer http needs --agent-url");
    return std::make_shared<agents::HttpAgent>(o.agent_url, std::chrono::milliseconds(o.timeout_ms));
  }
  if (o.kind == "scripted") {
    if (o.script.empty()) usage("--answerer scripted needs --script");
    std::ifstream in(o.script);
    if (!in) throw Error(ErrorCode::ParseError, "cannot read script '" + o.script + "'");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw Error(ErrorCode::SchemaError, "script '" + o.script + "' must be a JSON object of question -> answer");
    agents::ScriptedSpec spec;
    for (const auto& [q, a] : j.items()) {
      if (!a.is_string()) throw Error(ErrorCode::SchemaError, "script answers must be strings");
      spec.table[q] = a.get<std::string>();
    }
    return agents::make_baseline_answerer(std::move(spec));
  }
  if (o.kind != "truthful" && o.kind != "noisy") usage("unknown answerer '" + o.kind + "'");
  agents::TruthfulSpec truthful;
  if (o.attributes.empty()) {
    spdlog::warn("--answerer {} without --attributes knows no attributes and answers '{}' throughout", o.kind,
                 truthful.default_answer);
    truthful.attributes = std::make_shared<const agents::AttributeTable>();
  } else {
    truthful.attributes = load_attributes(o.attributes);
  }
  if (o.kind == "truthful") return agents::make_baseline_answerer(truthful);
  return agents::make_baseline_answerer(agents::NoisySpec{truthful, o.flip_prob, o.seed});
}

void add_answerer_options(CLI::App* sub, AnswererOptions& o) {
  sub->add_option("--answerer", o.kind, "truthful | noisy | scripted | http");
  sub->add_option("--attributes", o.attributes, "Categories file used as attribute metadata");
  sub->add_option("--flip-prob", o.flip_prob, "Noisy answerer flip probability");
  sub->add_option("--script", o.script, "Scripted answerer: JSON object question -> answer");
  sub->add_option("--agent-url", o.agent_url, "External agent base URL (POST /answer)");
  sub->add_option("--timeout-ms", o.timeout_ms, "External agent request timeout");
}

/// Blocks SIGINT/SIGTERM for this thread and its children and calls `stop`
/// from a watcher thread when one arrives.
class SignalWatcher {
 public:
  explicit SignalWatcher(std::function<void()> stop) {
    sigemptyset(&set_);
    sigaddset(&set_, SIGINT);
    sigaddset(&set_, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set_, &previous_);
    thread_ = std::thread([this, stop = std::move(stop)] {
      timespec wait{0, 200'000'000};
      while (!done_) {
        if (sigtimedwait(&set_, nullptr, &wait) > 0) {
          spdlog::info("signal received, shutting down");
          stop();
          return;
        }
      }
    });
  }
  ~SignalWatcher() {
    done_ = true;
    thread_.join();
    pthread_sigmask(SIG_SETMASK, &previous_, nullptr);
  }

 private:
  sigset_t set_{};
  sigset_t previous_{};
  std::atomic<bool> done_{false};
  std::thread thread_;
};

// ---------------------------------------------------------------------------

struct GenPoolsArgs {
  std::string embeddings;
  std::string categories;
  std::string captions;
  int pool_size = 20;
  int shells = 3;
  std::string base_radius = "auto";
  std::string counts;
  int neighbors = 50;
  std::uint64_t seed = 0;
  std::string out;
};

void gen_pools(const GenPoolsArgs& a, std::ostream& out) {
  if (a.embeddings.empty()) usage("gen-pools needs --embeddings");
  if (a.categories.empty()) usage("gen-pools needs --categories");
  if (a.out.empty()) usage("gen-pools needs --out");

  auto store = pools::load_embeddings_file(a.embeddings);
  store.set_categories(pools::load_categories_file(a.categories));

  pools::GenPoolsOptions options;
  options.pool_size = a.pool_size;
  options.shell_count = a.shells;
  options.auto_radius_neighbor = a.neighbors;
  options.seed = a.seed;
  if (a.base_radius != "auto") {
    try {
      std::size_t used = 0;
      options.base_radius = std::stod(a.base_radius, &used);
      if (used != a.base_radius.size()) throw std::invalid_argument(a.base_radius);
    } catch (const std::exception&) {
      usage("--base-radius expects 'auto' or a number, got '" + a.base_radius + "'");
    }
  }
  if (!a.counts.empty()) options.counts_per_shell = parse_int_list(a.counts, "counts");
  if (!a.captions.empty()) options.captions = load_captions(a.captions);
  for (const auto& c : pools::select_secret_candidates(store)) {
    if (!options.captions.contains(c.image_id)) {
      std::string phrase = c.category;
      std::replace(phrase.begin(), phrase.end(), '_', ' ');
      options.captions[c.image_id] = "A picture with a " + phrase + ".";
    }
  }

  auto result = pools::generate_pools(store, options);
  for (const auto& s : result.skipped)
    spdlog::warn("skipped category {} (secret {}): {}", s.candidate.category, s.candidate.image_id, s.reason);
  if (result.pools.empty())
    throw Error(ErrorCode::InsufficientShellPopulation, "no category yielded a pool with these shell settings");
  write_pools_file(a.out, result.pools);
  out << "wrote " << result.pools.size() << " pools to " << a.out << " (" << result.skipped.size() << " skipped)\n";
}

struct SimulateArgs {
  std::string questioner = "random";
  AnswererOptions answerer;
  std::string pools;
  int games = 100;
  std::uint64_t seed = 0;
  std::string out;
  std::string embeddings;
  std::string questions;
  std::string condition;
  int rounds = 9;
  int games_per_assignment = 10;
};

void simulate(SimulateArgs a, std::ostream& out) {
  if (a.pools.empty()) usage("simulate needs --pools");
  if (a.out.empty()) usage("simulate needs --out");
  if (a.games < 0) usage("--games must be >= 0");

  agents::SimulationPlan plan;
  plan.questioner.kind = agents::questioner_kind_from(a.questioner);
  plan.questioner.seed = a.seed;
  if (!a.questions.empty()) plan.questioner.questions = load_lines(a.questions);
  if (!a.embeddings.empty())
    plan.questioner.embeddings = std::make_shared<const pools::EmbeddingStore>(pools::load_embeddings_file(a.embeddings));
  if (!a.answerer.attributes.empty()) plan.questioner.attributes = load_attributes(a.answerer.attributes);
  if (plan.questioner.kind == agents::QuestionerKind::EmbeddingOracle && !plan.questioner.embeddings)
    usage("--questioner oracle needs --embeddings");
  if (plan.questioner.kind == agents::QuestionerKind::AttributeSeeker && !plan.questioner.attributes)
    usage("--questioner seeker needs --attributes");
  if (plan.questioner.kind == agents::QuestionerKind::Scripted && plan.questioner.questions.empty())
    usage("--questioner scripted needs --questions");

  a.answerer.seed = derive_seed(a.seed, "answerer");
  plan.answerer = make_answerer(a.answerer);
  plan.condition = a.condition.empty() ? a.answerer.kind : a.condition;
  plan.pools = read_pools_file(a.pools);
  plan.games = a.games;
  plan.games_per_assignment = a.games_per_assignment;
  plan.config.dialog_rounds = a.rounds;

  auto games = agents::simulate_games(plan);
  std::vector<logs::LogRecord> records(games.begin(), games.end());
  logs::write_log_file(a.out, records);
  std::size_t aborted = 0;
  for (const auto& g : games) aborted += g.status != logs::GameStatus::Complete;
  out << "wrote " << games.size() << " games to " << a.out << " (" << aborted << " aborted)\n";
}

struct ReportArgs {
  std::vector<std::string> logs;
  std::string embeddings;
  std::string pools;
  std::uint64_t seed = 0;
  std::string out;
  int resamples = 1000;
  double level = 0.95;
  int ngram_depth = 3;
  int baseline_repeats = 100;
  bool include_incomplete = false;
  bool include_fallback = false;
};

void report(const ReportArgs& a, std::ostream& out) {
  if (a.logs.empty()) usage("report needs --logs");
  if (a.out.empty()) usage("report needs --out");
  std::vector<logs::LogRecord> records;
  for (const auto& path : a.logs) {
    auto part = logs::read_log_file(path);
    records.insert(records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  std::optional<pools::EmbeddingStore> store;
  if (!a.embeddings.empty()) store = pools::load_embeddings_file(a.embeddings);
  std::optional<std::vector<PoolSpec>> pool_list;
  if (!a.pools.empty()) pool_list = read_pools_file(a.pools);

  analytics::ReportOptions options;
  options.seed = a.seed;
  options.bootstrap_resamples = a.resamples;
  options.level = a.level;
  options.ngram_depth = a.ngram_depth;
  options.baseline_repeats = a.baseline_repeats;
  options.filters.exclude_incomplete = !a.include_incomplete;
  options.filters.exclude_fallback = !a.include_fallback;

  auto rep = analytics::build_report(records, store ? &*store : nullptr, pool_list ? &*pool_list : nullptr, options);
  for (const auto& w : rep.warnings) spdlog::warn("{}", w);
  analytics::write_report(rep, a.out);

  out << "games used " << rep.games_used << " of " << rep.games_read << "\n";
  auto line = [&](const analytics::ConditionSummary& s) {
    out << s.condition << "\tn=" << s.games << "\tMR=" << s.mean_rank.point << " [" << s.mean_rank.lo << ", "
        << s.mean_rank.hi << "]\tMRR=" << s.mean_reciprocal_rank.point << "\n";
  };
  for (const auto& s : rep.conditions) line(s);
  if (rep.random_baseline) line(*rep.random_baseline);
}

void replay(const std::string& path, std::ostream& out, std::ostream& err) {
  if (path.empty()) usage("replay needs a log file");
  const auto records = logs::read_log_file(path);
  std::size_t games = 0;
  std::size_t failures = 0;
  std::map<std::string, std::set<std::string>> assignments_by_worker;
  for (const auto& record : records) {
    const auto* game = std::get_if<logs::GameLogRecord>(&record);
    if (!game) continue;
    ++games;
    if (!game->assignment_id.empty()) assignments_by_worker[game->worker_id].insert(game->assignment_id);
    auto check = logs::verify_replay(*game);
    if (!check.ok) {
      ++failures;
      err << "replay failed session=" << game->session_id << " problem=" << check.problem << "\n";
    }
  }
  for (const auto& [worker, ids] : assignments_by_worker)
    if (ids.size() > 1) spdlog::warn("worker {} appears in {} assignments", worker, ids.size());
  if (failures > 0)
    throw Error(ErrorCode::VerificationFailed,
                std::to_string(failures) + " of " + std::to_string(games) + " games failed replay");
  out << "verified " << games << " games in " << path << "\n";
}

struct ServeArgs {
  std::string host = "0.0.0.0";
  int port = 8080;
  std::string pools;
  std::string log = "games.jsonl";
  std::string images;
  std::string web_root;
  std::string categories;
  std::string conditions;
  std::string condition_mode = "per-worker";
  int games_per_assignment = 10;
  int max_active_assignments = 0;
  long long resume_window_ms = 5 * 60 * 1000;
  long long inactivity_timeout_ms = 5 * 60 * 1000;
  long long agent_deadline_ms = 10 * 1000;
  int retry_limit = 1;
  int rounds = 9;
  int tick_ms = 250;
  int broker_threads = 4;
};

void serve(const ServeArgs& a, const json& config) {
  if (a.pools.empty()) usage("serve needs --pools");
  std::vector<service::ConditionSpec> specs;
  if (!a.conditions.empty())
    specs = service::parse_condition_list(a.conditions);
  else if (config.contains("conditions"))
    specs = service::conditions_from_json(config["conditions"]);
  else
    specs = service::parse_condition_list("truthful=truthful");

  auto pool_list = read_pools_file(a.pools);
  service::OrchestratorConfig oc;
  for (const auto& s : specs) oc.conditions.push_back(s.label);
  if (a.condition_mode == "per-game")
    oc.condition_mode = service::ConditionMode::PerGame;
  else if (a.condition_mode != "per-worker")
    usage("--condition-mode must be per-worker or per-game");
  oc.games_per_assignment = a.games_per_assignment;
  oc.max_active_assignments = a.max_active_assignments;
  oc.resume_window_ms = a.resume_window_ms;
  oc.inactivity_timeout_ms = a.inactivity_timeout_ms;
  oc.agent_deadline_ms = a.agent_deadline_ms;
  oc.retry_limit = a.retry_limit;
  oc.game.dialog_rounds = a.rounds;
  if (!pool_list.empty()) oc.game.pool_size = static_cast<int>(pool_list.front().image_ids.size());

  service::ConnectionHub hub;
  std::unique_ptr<service::GameServer> server;
  SignalWatcher signals([&server] {
    if (server) server->stop();
  });
  auto agents = service::build_condition_agents(specs, load_attributes(a.categories),
                                                std::chrono::milliseconds(a.agent_deadline_ms));
  service::ThreadBroker broker(std::move(agents), a.broker_threads);
  service::JsonlLogStore store(a.log);
  service::Orchestrator orchestrator(oc, std::move(pool_list), broker, store, hub.sink());
  service::ServerOptions so;
  so.host = a.host;
  so.port = static_cast<std::uint16_t>(a.port);
  so.image_dir = a.images;
  so.web_root = a.web_root;
  so.tick_interval_ms = a.tick_ms;
  server = std::make_unique<service::GameServer>(so, orchestrator, hub);
  const auto port = server->bind();
  spdlog::info("listening on {}:{} (websocket /ws)", a.host, port);
  server->run();
}

struct ServeAgentArgs {
  AnswererOptions answerer;
  std::string host = "127.0.0.1";
  int port = 9000;
};

void serve_agent(const ServeAgentArgs& a) {
  agents::AgentHttpServer server(make_answerer(a.answerer));
  SignalWatcher signals([&server] { server.stop(); });
  const int port = server.bind(a.host, a.port);
  spdlog::info("agent {} listening on {}:{} (POST /answer)", a.answerer.kind, a.host, port);
  server.listen();
}

void report_error(std::ostream& err, std::string_view code, const std::string& message) {
  std::string flat = message;
  std::replace(flat.begin(), flat.end(), '\n', ' ');
  err << "error code=" << code << " message=" << flat << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  static std::once_flag logger_once;
  std::call_once(logger_once, [] {
    spdlog::set_default_logger(
        std::make_shared<spdlog::logger>("guesswhich", std::make_shared<spdlog::sinks::stderr_color_sink_mt>()));
  });

  CLI::App app{"Image-guessing dialog game platform: pools, simulation, analysis and the live game service",
               "guesswhich"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace | debug | info | warn | error | off");

  std::string config_path;
  auto add_config = [&](CLI::App* sub) { sub->add_option("--config", config_path, "JSON file with option values"); };

  GenPoolsArgs gp;
  auto* gen = app.add_subcommand("gen-pools", "Build image pools from embeddings and categories");
  add_config(gen);
  gen->add_option("--embeddings", gp.embeddings, "Embeddings JSONL {id, vector}");
  gen->add_option("--categories", gp.categories, "Categories JSONL {category, members}");
  gen->add_option("--captions", gp.captions, "Captions JSONL {id, caption}");
  gen->add_option("--pool-size", gp.pool_size, "Images per pool including the secret");
  gen->add_option("--shells", gp.shells, "Number of distance shells");
  gen->add_option("--base-radius", gp.base_radius, "'auto' or a fixed radius");
  gen->add_option("--counts", gp.counts, "Distractors per shell, e.g. 7,6,6");
  gen->add_option("--neighbors", gp.neighbors, "Neighbour rank for the auto radius");
  gen->add_option("--seed", gp.seed, "Random seed");
  gen->add_option("--out", gp.out, "Output pools JSONL");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Play AI-AI games and write game logs");
  add_config(sim);
  sim->add_option("--questioner", sa.questioner, "random | oracle | scripted | seeker");
  add_answerer_options(sim, sa.answerer);
  sim->add_option("--pools", sa.pools, "Pools JSONL");
  sim->add_option("--games", sa.games, "Number of games");
  sim->add_option("--seed", sa.seed, "Random seed");
  sim->add_option("--out", sa.out, "Output game log JSONL");
  sim->add_option("--embeddings", sa.embeddings, "Embeddings JSONL (oracle questioner)");
  sim->add_option("--questions", sa.questions, "Question list, one per line (scripted questioner)");
  sim->add_option("--condition", sa.condition, "Condition label written to the logs");
  sim->add_option("--rounds", sa.rounds, "Dialog rounds per game");
  sim->add_option("--games-per-assignment", sa.games_per_assignment, "Games per synthetic assignment");

  ReportArgs ra;
  auto* rep = app.add_subcommand("report", "Compute metrics, tests and tables from game logs");
  add_config(rep);
  rep->add_option("--logs", ra.logs, "Game log JSONL (repeatable)")->delimiter(',');
  rep->add_option("--embeddings", ra.embeddings, "Embeddings JSONL for per-round coarse ranks");
  rep->add_option("--pools", ra.pools, "Pools JSONL to check logs against");
  rep->add_option("--seed", ra.seed, "Random seed");
  rep->add_option("--out", ra.out, "Output directory");
  rep->add_option("--resamples", ra.resamples, "Bootstrap resamples");
  rep->add_option("--level", ra.level, "Confidence level");
  rep->add_option("--ngram-depth", ra.ngram_depth, "Question prefix depth");
  rep->add_option("--baseline-repeats", ra.baseline_repeats, "Random-guesser simulations per game");
  rep->add_flag("--include-incomplete", ra.include_incomplete, "Keep abandoned and aborted games");
  rep->add_flag("--include-fallback", ra.include_fallback, "Keep games with fallback answers");

  std::string replay_path;
  auto* rpl = app.add_subcommand("replay", "Re-drive the game engine over a log and verify every game");
  add_config(rpl);
  rpl->add_option("log", replay_path, "Game log JSONL");

  ServeArgs sv;
  auto* srv = app.add_subcommand("serve", "Run the live game service");
  add_config(srv);
  srv->add_option("--host", sv.host, "Listen address");
  srv->add_option("--port", sv.port, "Listen port (0 picks one)");
  srv->add_option("--pools", sv.pools, "Pools JSONL");
  srv->add_option("--log", sv.log, "Game log JSONL (append-only)");
  srv->add_option("--images", sv.images, "Directory of pool images");
  srv->add_option("--web-root", sv.web_root, "Directory of static client files");
  srv->add_option("--categories", sv.categories, "Categories JSONL (truthful and noisy answerers)");
  srv->add_option("--conditions", sv.conditions, "label[=answerer],... answerer: truthful, noisy[:p] or a URL");
  srv->add_option("--condition-mode", sv.condition_mode, "per-worker | per-game");
  srv->add_option("--games-per-assignment", sv.games_per_assignment, "Games per worker");
  srv->add_option("--max-active-assignments", sv.max_active_assignments, "0 for no limit");
  srv->add_option("--resume-window-ms", sv.resume_window_ms, "Reconnect window");
  srv->add_option("--inactivity-timeout-ms", sv.inactivity_timeout_ms, "Idle limit per awaited action");
  srv->add_option("--agent-deadline-ms", sv.agent_deadline_ms, "Answer deadline per attempt");
  srv->add_option("--retry-limit", sv.retry_limit, "Agent retries before the fallback answer");
  srv->add_option("--rounds", sv.rounds, "Dialog rounds per game");
  srv->add_option("--tick-ms", sv.tick_ms, "Timer resolution");
  srv->add_option("--broker-threads", sv.broker_threads, "Inference worker threads");

  ServeAgentArgs sg;
  auto* agt = app.add_subcommand("serve-agent", "Expose a baseline answerer over HTTP");
  add_config(agt);
  add_answerer_options(agt, sg.answerer);
  agt->add_option("--host", sg.host, "Listen address");
  agt->add_option("--port", sg.port, "Listen port (0 picks one)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      err << app.help();
      throw Error(ErrorCode::UsageError, e.what());
    }

    auto level = spdlog::level::from_str(log_level);
    if (level == spdlog::level::off && log_level != "off") usage("unknown --log-level '" + log_level + "'");
    spdlog::set_level(level);

    CLI::App* sub = app.get_subcommands().front();
    const json config = load_config(config_path);
    resolve_sources(*sub, config, env);
    spdlog::info("{} config {}", sub->get_name(), resolved_config(*sub).dump());

    if (sub == gen) gen_pools(gp, out);
    else if (sub == sim) simulate(sa, out);
    else if (sub == rep) report(ra, out);
    else if (sub == rpl) replay(replay_path, out, err);
    else if (sub == srv) serve(sv, config);
    else if (sub == agt) serve_agent(sg);
    return 0;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::UsageError && !app.get_subcommands().empty())
      err << app.get_subcommands().front()->help();
    report_error(err, to_string(e.code()), e.detail());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    report_error(err, "Internal", e.what());
    return 4;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace guesswhich::cli
