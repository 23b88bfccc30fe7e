#include "guesswhich/service/orchestrator.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <utility>

#include <spdlog/spdlog.h>

#include "guesswhich/error.hpp"

namespace guesswhich::service {

using nlohmann::json;
namespace g = guesswhich::game;

struct Orchestrator::Channel {
  std::mutex mutex;
  std::string worker_id;
  std::optional<ConnectionId> connection;
  TimestampMs disconnected_at = 0;
  std::int64_t next_seq = 1;
  std::int64_t last_client_seq = 0;
};

struct Orchestrator::Job {
  std::string job_id;
  int attempt = 1;
  TimestampMs deadline = 0;
  agents::AnswerRequest request;
};

struct Orchestrator::Game {
  g::GameSession session;
  std::vector<g::GameEvent> events;
  std::string condition;
  int index = 1;
  std::optional<Job> job;
  TimestampMs awaiting_since = 0;
};

struct Orchestrator::AssignmentState : std::enable_shared_from_this<AssignmentState> {
  enum class Stage { Playing, AwaitingSurvey, Done, Abandoned };
  // What to do once every held record is durable.
  enum class AfterWrite { None, GameEnd, AssignmentComplete };

  std::mutex mutex;
  std::string assignment_id;
  std::string worker_id;
  std::string condition;  // "mixed" in per-game mode
  std::string resume_token;
  std::shared_ptr<Channel> channel;
  std::vector<const PoolSpec*> pools;
  std::vector<g::GameSession> finished;
  std::vector<std::string> session_ids;
  std::optional<Game> current;
  Stage stage = Stage::Playing;
  TimestampMs awaiting_since = 0;  // survey stage
  std::vector<logs::LogRecord> held;
  AfterWrite after_write = AfterWrite::None;
  std::optional<g::Payout> payout;
};

namespace {

constexpr std::string_view kMixedCondition = "mixed";

json error_payload(std::string_view code, const std::string& message, std::int64_t in_reply_to) {
  return {{"code", code}, {"message", message}, {"in_reply_to", in_reply_to}};
}

std::string hex_token(Rng& rng) {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng.next_u64()),
                static_cast<unsigned long long>(rng.next_u64()));
  return buf;
}

std::vector<agents::QaPair> answered_history(const g::GameSession& s) {
  std::vector<agents::QaPair> history;
  for (const auto& r : s.rounds) {
    if (r.answered_at == 0 && r.answer.empty()) continue;
    history.push_back({r.question, r.answer});
  }
  return history;
}

json payout_json(const g::Payout& p) {
  return {{"base", p.base}, {"round_bonus", p.round_bonus}, {"rank_bonus", p.rank_bonus}, {"total", p.total()}};
}

}  // namespace

void OrchestratorConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (conditions.empty()) fail("at least one condition is required");
  std::set<std::string> unique(conditions.begin(), conditions.end());
  if (unique.size() != conditions.size()) fail("condition labels must be unique");
  for (const auto& c : conditions)
    if (c.empty() || c == kMixedCondition) fail("condition label '" + c + "' is reserved or empty");
  if (games_per_assignment < 1) fail("games per assignment must be >= 1");
  if (max_active_assignments < 0) fail("max active assignments must be >= 0");
  if (resume_window_ms <= 0 || inactivity_timeout_ms <= 0 || agent_deadline_ms <= 0)
    fail("timeouts must be positive");
  if (retry_limit < 0 || storage_retries < 0) fail("retry limits must be >= 0");
  if (fallback_answer.find_first_not_of(" \t\r\n") == std::string::npos) fail("fallback answer must not be blank");
  game.validate();
  bonus.validate();
}

Orchestrator::Orchestrator(OrchestratorConfig config, std::vector<PoolSpec> pools, JobBroker& broker, LogStore& store,
                           Sink sink, Clock clock)
    : config_(std::move(config)),
      pools_(std::move(pools)),
      broker_(broker),
      store_(store),
      sink_(std::move(sink)),
      clock_(std::move(clock)),
      token_rng_(config_.token_seed ? *config_.token_seed : (std::uint64_t{std::random_device{}()} << 32) ^
                                                                 std::random_device{}()) {
  config_.validate();
  for (const auto& pool : pools_) {
    pool.validate();
    if (static_cast<int>(pool.image_ids.size()) != config_.game.pool_size)
      throw Error(ErrorCode::InvalidConfig, "pool '" + pool.pool_id + "' has " +
                                                std::to_string(pool.image_ids.size()) + " images, expected " +
                                                std::to_string(config_.game.pool_size));
  }
  for (const auto& c : config_.conditions) counts_[c] = {c, 0, 0};

  for (const auto& record : store_.read_all()) {
    std::visit(
        [&](const auto& r) {
          workers_seen_.insert(r.worker_id);
          existing_assignments_.insert(r.assignment_id);
        },
        record);
  }
  broker_.bind([this](const std::string& job_id, int attempt, JobOutcome outcome) {
    try {
      complete_inference_job(job_id, attempt, outcome);
    } catch (const Error& e) {
      spdlog::warn("job {} attempt {}: {}", job_id, attempt, e.what());
    }
  });
}

Orchestrator::~Orchestrator() { broker_.bind({}); }

std::shared_ptr<Orchestrator::Channel> Orchestrator::channel_for(const std::string& worker_id) {
  auto& ch = channels_[worker_id];
  if (!ch) {
    ch = std::make_shared<Channel>();
    ch->worker_id = worker_id;
  }
  return ch;
}

void Orchestrator::emit(Channel& channel, ServerType type, const std::string& session_id, json payload,
                        std::vector<ServerMessage>* out) {
  std::lock_guard lock(channel.mutex);
  ServerMessage msg{type, session_id, channel.next_seq++, std::move(payload)};
  if (channel.connection && sink_) sink_(*channel.connection, msg);
  if (out) out->push_back(std::move(msg));
}

std::string Orchestrator::pick_condition_locked(bool per_game) {
  const std::string* best = nullptr;
  int best_count = 0;
  for (const auto& c : config_.conditions) {
    const auto& count = counts_[c];
    const int n = per_game ? count.games : count.assignments;
    if (!best || n < best_count) {
      best = &c;
      best_count = n;
    }
  }
  return *best;
}

EnqueueResult Orchestrator::enqueue_worker(const std::string& worker_id, ConnectionId connection,
                                           std::vector<ServerMessage>* out) {
  if (worker_id.find_first_not_of(" \t\r\n") == std::string::npos)
    throw Error(ErrorCode::SchemaError, "worker_id must not be blank");
  std::lock_guard lock(registry_mutex_);
  auto queued = std::find(queue_.begin(), queue_.end(), worker_id);
  if (workers_seen_.contains(worker_id) && queued == queue_.end())
    throw Error(ErrorCode::RepeatWorker, "worker '" + worker_id + "' already had an assignment");
  if (pools_.size() < static_cast<std::size_t>(config_.games_per_assignment))
    throw Error(ErrorCode::NoPoolsAvailable, "need " + std::to_string(config_.games_per_assignment) +
                                                 " pools per assignment, have " + std::to_string(pools_.size()));

  auto channel = channel_for(worker_id);
  {
    std::lock_guard ch_lock(channel->mutex);
    if (channel->connection && *channel->connection != connection) connection_workers_.erase(*channel->connection);
    channel->connection = connection;
  }
  connection_workers_[connection] = worker_id;

  const bool full = config_.max_active_assignments > 0 &&
                    assignments_.size() >= static_cast<std::size_t>(config_.max_active_assignments);
  if (queued != queue_.end() || full) {
    if (queued == queue_.end()) {
      queue_.push_back(worker_id);
      workers_seen_.insert(worker_id);
      queued = std::prev(queue_.end());
    }
    EnqueueResult result;
    result.queue_position = static_cast<int>(queued - queue_.begin()) + 1;
    emit(*channel, ServerType::QueueStatus, {}, {{"position", result.queue_position}}, out);
    return result;
  }
  return start_assignment_locked(worker_id, out);
}

EnqueueResult Orchestrator::start_assignment_locked(const std::string& worker_id, std::vector<ServerMessage>* out) {
  auto a = std::make_shared<AssignmentState>();
  std::lock_guard a_lock(a->mutex);
  const bool per_game = config_.condition_mode == ConditionMode::PerGame;
  a->condition = per_game ? std::string(kMixedCondition) : pick_condition_locked(false);
  if (!per_game) ++counts_[a->condition].assignments;

  char buf[32];
  do {
    std::snprintf(buf, sizeof buf, "assignment-%06llu", static_cast<unsigned long long>(next_assignment_++));
  } while (existing_assignments_.contains(buf));
  a->assignment_id = buf;
  existing_assignments_.insert(a->assignment_id);
  a->worker_id = worker_id;
  a->resume_token = hex_token(token_rng_);
  a->channel = channel_for(worker_id);
  for (int i = 0; i < config_.games_per_assignment; ++i) a->pools.push_back(&pools_[(pool_cursor_ + i) % pools_.size()]);
  pool_cursor_ = (pool_cursor_ + static_cast<std::size_t>(config_.games_per_assignment)) % pools_.size();
  assignments_[worker_id] = a;
  workers_seen_.insert(worker_id);

  emit(*a->channel, ServerType::AssignmentStart, {},
       {{"assignment_id", a->assignment_id},
        {"worker_id", worker_id},
        {"resume_token", a->resume_token},
        {"games", config_.games_per_assignment},
        {"dialog_rounds", config_.game.dialog_rounds},
        {"pool_size", config_.game.pool_size},
        {"caption_guess_required", config_.game.caption_guess_required},
        {"bonus",
         {{"base_pay", config_.bonus.base_pay},
          {"round_bonus_cap", config_.bonus.round_bonus_cap},
          {"rank_bonus_cap", config_.bonus.rank_bonus_cap}}}},
       out);
  spdlog::info("assignment {} started for worker {} (condition {})", a->assignment_id, worker_id, a->condition);
  std::string condition = per_game ? pick_condition_locked(true) : a->condition;
  ++counts_[condition].games;
  begin_game(*a, std::move(condition), out);

  EnqueueResult result;
  result.started = true;
  result.assignment_id = a->assignment_id;
  result.condition = a->condition;
  return result;
}

void Orchestrator::start_game(AssignmentState& a, std::vector<ServerMessage>* out) {
  std::string condition = a.condition;
  {
    std::lock_guard lock(registry_mutex_);
    if (config_.condition_mode == ConditionMode::PerGame) condition = pick_condition_locked(true);
    ++counts_[condition].games;
  }
  begin_game(a, std::move(condition), out);
}

void Orchestrator::begin_game(AssignmentState& a, std::string condition, std::vector<ServerMessage>* out) {
  const int index = static_cast<int>(a.finished.size()) + 1;
  char sid[64];
  std::snprintf(sid, sizeof sid, "%s-game-%02d", a.assignment_id.c_str(), index);
  Game game;
  game.index = index;
  game.condition = std::move(condition);
  game.session = g::new_session(config_.game, *a.pools[static_cast<std::size_t>(index - 1)], sid, a.worker_id,
                                game.condition);
  game.awaiting_since = clock_();
  a.session_ids.push_back(sid);
  a.current = std::move(game);
  emit(*a.channel, ServerType::GameStart, a.current->session.session_id, game_start_payload(a, false), out);
}

json Orchestrator::game_start_payload(const AssignmentState& a, bool with_snapshot) const {
  const auto& game = *a.current;
  const auto& s = game.session;
  json images = json::array();
  for (const auto& id : s.pool.image_ids) images.push_back({{"image_id", id}, {"url", config_.image_url_prefix + id}});
  json payload = {{"assignment_id", a.assignment_id},
                  {"game_index", game.index},
                  {"games", config_.games_per_assignment},
                  {"caption", s.pool.caption},
                  {"images", std::move(images)},
                  {"dialog_rounds", s.config.dialog_rounds},
                  {"state", s.state_label()}};
  if (!with_snapshot) return payload;

  json rounds = json::array();
  for (const auto& r : s.rounds) {
    rounds.push_back({{"round", r.index},
                      {"question", r.question},
                      {"answer", r.answer},
                      {"round_guess", r.round_guess.empty() ? json(nullptr) : json(r.round_guess)}});
  }
  json finals = json::array();
  for (const auto& f : s.final_guesses)
    finals.push_back({{"image_id", f.image_id}, {"correct", f.image_id == s.pool.secret_id}});
  json completed = json::array();
  double bonus_so_far = 0.0;
  for (std::size_t i = 0; i < a.finished.size(); ++i) {
    const auto& done = a.finished[i];
    const double delta = g::game_bonus_share(done, config_.games_per_assignment, config_.bonus);
    bonus_so_far += delta;
    completed.push_back({{"session_id", done.session_id},
                         {"game_index", static_cast<int>(i) + 1},
                         {"rank", done.induced_rank.value_or(0)},
                         {"bonus_delta", delta}});
  }
  payload["snapshot"] = {{"phase", g::to_string(s.phase)},
                         {"round", s.current_round},
                         {"step", g::to_string(s.step)},
                         {"caption_guess", s.caption_guess ? json(s.caption_guess->image_id) : json(nullptr)},
                         {"rounds", std::move(rounds)},
                         {"final_guesses", std::move(finals)},
                         {"awaiting_answer", game.job.has_value()},
                         {"completed_games", std::move(completed)},
                         {"bonus_so_far", bonus_so_far}};
  return payload;
}

std::shared_ptr<Orchestrator::AssignmentState> Orchestrator::assignment_of_connection(ConnectionId connection,
                                                                                      std::string& worker_id) {
  std::lock_guard lock(registry_mutex_);
  auto w = connection_workers_.find(connection);
  if (w == connection_workers_.end()) return nullptr;
  worker_id = w->second;
  auto a = assignments_.find(worker_id);
  return a == assignments_.end() ? nullptr : a->second;
}

std::vector<ServerMessage> Orchestrator::route_client_message(ConnectionId connection, const ClientMessage& msg) {
  std::vector<ServerMessage> out;
  auto reply_unbound = [&](const Error& e) {
    ServerMessage m{ServerType::Error, msg.session_id, 0, error_payload(to_string(e.code()), e.what(), msg.seq)};
    if (sink_) sink_(connection, m);
    out.push_back(std::move(m));
  };

  if (msg.type == ClientType::JoinQueue || msg.type == ClientType::Resume) {
    try {
      const auto worker_id = payload_string(msg, "worker_id");
      {
        std::lock_guard lock(registry_mutex_);
        auto ch = channels_.find(worker_id);
        if (ch != channels_.end()) {
          std::lock_guard ch_lock(ch->second->mutex);
          if (ch->second->connection == connection && msg.seq <= ch->second->last_client_seq) return out;
        }
      }
      if (msg.type == ClientType::JoinQueue) {
        enqueue_worker(worker_id, connection, &out);
      } else {
        out.push_back(resume_session(worker_id, payload_string(msg, "resume_token"), connection));
      }
      std::lock_guard lock(registry_mutex_);
      auto ch = channel_for(worker_id);
      std::lock_guard ch_lock(ch->mutex);
      ch->last_client_seq = msg.seq;
    } catch (const Error& e) {
      reply_unbound(e);
    }
    return out;
  }

  std::string worker_id;
  auto a = assignment_of_connection(connection, worker_id);
  if (!a) {
    reply_unbound(Error(ErrorCode::SessionNotFound, "no active assignment on this connection"));
    return out;
  }
  bool released = false;
  {
    Lock lock(a->mutex);
    {
      std::lock_guard ch_lock(a->channel->mutex);
      if (a->channel->connection != connection) return out;  // superseded by a resumed connection
      if (msg.seq <= a->channel->last_client_seq) return out;  // duplicate delivery
      a->channel->last_client_seq = msg.seq;
    }
    try {
      if (a->stage == AssignmentState::Stage::Abandoned || a->stage == AssignmentState::Stage::Done)
        throw Error(ErrorCode::SessionNotFound, "assignment " + a->assignment_id + " is over");
      if (msg.type == ClientType::SurveySubmit) {
        handle_survey(*a, msg, out);
        released = a->stage == AssignmentState::Stage::Done;
      } else {
        handle_game_message(*a, msg, out);
      }
    } catch (const Error& e) {
      emit(*a->channel, ServerType::Error, msg.session_id, error_payload(to_string(e.code()), e.what(), msg.seq),
           &out);
    }
  }
  if (released) release_slot(worker_id);
  return out;
}

void Orchestrator::apply(AssignmentState& a, g::EventPayload payload) {
  auto& game = *a.current;
  g::GameEvent event{std::move(payload), clock_()};
  game.session = g::apply_event(game.session, event);  // a rejected event must leave the session intact
  game.events.push_back(std::move(event));
  game.awaiting_since = game.events.back().at;
}

void Orchestrator::handle_game_message(AssignmentState& a, const ClientMessage& msg, std::vector<ServerMessage>& out) {
  if (a.stage != AssignmentState::Stage::Playing || !a.current || msg.session_id != a.current->session.session_id)
    throw Error(ErrorCode::SessionNotFound, "session '" + msg.session_id + "' is not live");
  auto& game = *a.current;
  const auto& sid = game.session.session_id;

  switch (msg.type) {
    case ClientType::CaptionGuess: {
      auto id = payload_string(msg, "image_id");
      apply(a, g::CaptionGuess{id});
      emit(*a.channel, ServerType::GuessAck, sid,
           {{"round", 0}, {"image_id", id}, {"state", game.session.state_label()}}, &out);
      break;
    }
    case ClientType::Question: {
      auto text = payload_string(msg, "text");
      if (text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw Error(ErrorCode::EmptyText, "question must not be blank");
      apply(a, g::QuestionAsked{text});
      const int round = game.session.current_round;
      emit(*a.channel, ServerType::Typing, sid, {{"round", round}}, &out);
      Job job;
      {
        std::lock_guard lock(registry_mutex_);
        char buf[32];
        std::snprintf(buf, sizeof buf, "job-%08llu", static_cast<unsigned long long>(next_job_++));
        job.job_id = buf;
        jobs_by_id_[job.job_id] = a.shared_from_this();
      }
      const auto history = answered_history(game.session);
      job.request = {sid, game.session.pool.caption,
                     std::vector<agents::QaPair>(history.begin(), history.end()), text, game.session.pool.secret_id};
      submit_job(a, std::move(job));
      break;
    }
    case ClientType::RoundGuess: {
      auto id = payload_string(msg, "image_id");
      const int round = game.session.current_round;
      apply(a, g::RoundGuess{id});
      emit(*a.channel, ServerType::GuessAck, sid,
           {{"round", round}, {"image_id", id}, {"state", game.session.state_label()}}, &out);
      break;
    }
    case ClientType::FinalGuess: {
      auto id = payload_string(msg, "image_id");
      apply(a, g::FinalGuess{id});
      emit(*a.channel, ServerType::GuessFeedback, sid,
           {{"image_id", id},
            {"correct", id == game.session.pool.secret_id},
            {"guesses", game.session.final_guesses.size()}},
           &out);
      if (game.session.is_complete()) finish_game(a, &out);
      break;
    }
    default:
      throw Error(ErrorCode::SchemaError, "unexpected message type " + std::string(to_string(msg.type)));
  }
}

void Orchestrator::submit_job(AssignmentState& a, Job job) {
  job.deadline = clock_() + config_.agent_deadline_ms;
  InferenceJob inference{job.job_id, job.request.session_id, a.current->condition, job.request, job.attempt,
                         job.deadline};
  a.current->job = std::move(job);
  broker_.submit(std::move(inference));
}

DeliveryAction Orchestrator::complete_inference_job(const std::string& job_id, int attempt, const JobOutcome& outcome) {
  std::shared_ptr<AssignmentState> a;
  {
    std::lock_guard lock(registry_mutex_);
    if (finished_jobs_.contains(job_id)) return DeliveryAction::Ignored;
    auto it = jobs_by_id_.find(job_id);
    if (it == jobs_by_id_.end()) throw Error(ErrorCode::UnknownJob, "unknown job '" + job_id + "'");
    a = it->second;
  }
  Lock lock(a->mutex);
  return resolve_job(*a, job_id, attempt, outcome);
}

DeliveryAction Orchestrator::resolve_job(AssignmentState& a, const std::string& job_id, int attempt,
                                         const JobOutcome& outcome) {
  if (a.stage != AssignmentState::Stage::Playing || !a.current || !a.current->job ||
      a.current->job->job_id != job_id || a.current->job->attempt != attempt)
    return DeliveryAction::Ignored;
  auto& game = *a.current;
  auto& job = *game.job;

  const bool usable =
      outcome.kind == JobOutcome::Kind::Response && outcome.answer.find_first_not_of(" \t\r\n") != std::string::npos;
  if (!usable && job.attempt <= config_.retry_limit) {
    spdlog::info("job {} attempt {} failed ({}), retrying", job_id, attempt,
                 outcome.detail.empty() ? "empty answer" : outcome.detail);
    Job next = std::move(job);
    ++next.attempt;
    submit_job(a, std::move(next));
    return DeliveryAction::Retried;
  }

  const bool fallback = !usable;
  const std::string text = fallback ? config_.fallback_answer : outcome.answer;
  const int attempts = job.attempt;
  if (fallback) spdlog::warn("job {} exhausted retries; delivering fallback answer", job_id);
  game.job.reset();
  {
    std::lock_guard lock(registry_mutex_);
    jobs_by_id_.erase(job_id);
    finished_jobs_.insert(job_id);
  }
  const int round = game.session.current_round;
  apply(a, g::AnswerReceived{text, fallback, attempts});
  emit(*a.channel, ServerType::Answer, game.session.session_id, {{"round", round}, {"text", text}});
  return fallback ? DeliveryAction::FallbackDelivered : DeliveryAction::Delivered;
}

void Orchestrator::finish_game(AssignmentState& a, std::vector<ServerMessage>* out) {
  auto& game = *a.current;
  auto record = logs::make_game_record(game.session, game.events, logs::GameStatus::Complete);
  record.assignment_id = a.assignment_id;
  record.game_index = game.index;
  a.held.push_back(std::move(record));
  a.after_write = AssignmentState::AfterWrite::GameEnd;
  flush_held(a, out);
}

bool Orchestrator::flush_held(AssignmentState& a, std::vector<ServerMessage>* out) {
  while (!a.held.empty()) {
    if (!persist(a.held.front())) return false;
    a.held.erase(a.held.begin());
  }
  const auto after = std::exchange(a.after_write, AssignmentState::AfterWrite::None);
  if (after == AssignmentState::AfterWrite::GameEnd) {
    auto& game = *a.current;
    const double delta = g::game_bonus_share(game.session, config_.games_per_assignment, config_.bonus);
    emit(*a.channel, ServerType::GameEnd, game.session.session_id,
         {{"game_index", game.index}, {"rank", game.session.induced_rank.value_or(0)}, {"bonus_delta", delta}}, out);
    a.finished.push_back(std::move(game.session));
    a.current.reset();
    if (static_cast<int>(a.finished.size()) < config_.games_per_assignment) {
      start_game(a, out);
    } else {
      a.stage = AssignmentState::Stage::AwaitingSurvey;
      a.awaiting_since = clock_();
      json dims = json::array();
      for (auto d : SurveyResponse::kDimensionNames) dims.push_back(d);
      emit(*a.channel, ServerType::SurveyRequest, {},
           {{"assignment_id", a.assignment_id}, {"dimensions", std::move(dims)}, {"scale", {1, 5}}}, out);
    }
  } else if (after == AssignmentState::AfterWrite::AssignmentComplete) {
    a.stage = AssignmentState::Stage::Done;
    emit(*a.channel, ServerType::AssignmentComplete, {},
         {{"assignment_id", a.assignment_id}, {"payout", payout_json(*a.payout)}}, out);
    spdlog::info("assignment {} complete, payout {:.2f}", a.assignment_id, a.payout->total());
  }
  return true;
}

void Orchestrator::handle_survey(AssignmentState& a, const ClientMessage& msg, std::vector<ServerMessage>& out) {
  if (a.stage != AssignmentState::Stage::AwaitingSurvey || a.after_write != AssignmentState::AfterWrite::None)
    throw Error(ErrorCode::IllegalTransition, "no survey is pending for this assignment");
  auto survey = survey_from_json(msg.payload.at("ratings"));
  survey.validate();

  g::Assignment assignment{a.assignment_id, a.worker_id, a.condition, config_.games_per_assignment, a.finished,
                           survey};
  a.payout = g::compute_payout(assignment, config_.bonus);
  a.held.push_back(logs::SurveyRecord{a.assignment_id, a.worker_id, a.condition, survey, clock_()});
  a.held.push_back(
      logs::AssignmentRecord{a.assignment_id, a.worker_id, a.condition, a.session_ids, logs::AssignmentStatus::Complete,
                             a.payout});
  a.after_write = AssignmentState::AfterWrite::AssignmentComplete;
  flush_held(a, &out);
}

bool Orchestrator::persist(const logs::LogRecord& record) {
  for (int attempt = 0; attempt <= config_.storage_retries; ++attempt) {
    try {
      store_.append(record);
      return true;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::RecordExists) {
        spdlog::error("{}; keeping the stored copy", e.what());
        return true;
      }
      spdlog::warn("storage attempt {} for {} failed: {}", attempt + 1, logs::record_key(record), e.what());
    }
  }
  return false;
}

void Orchestrator::abandon(AssignmentState& a, const std::string& reason) {
  if (a.stage == AssignmentState::Stage::Done || a.stage == AssignmentState::Stage::Abandoned) return;
  spdlog::info("assignment {} abandoned: {}", a.assignment_id, reason);
  std::vector<logs::LogRecord> records = std::move(a.held);
  a.held.clear();
  const bool game_held = a.after_write == AssignmentState::AfterWrite::GameEnd;
  if (a.current && !game_held) {
    auto record = logs::make_game_record(a.current->session, a.current->events, logs::GameStatus::Abandoned);
    record.assignment_id = a.assignment_id;
    record.game_index = a.current->index;
    record.diagnostic = reason;
    records.push_back(std::move(record));
  }
  if (a.current && a.current->job) {
    std::lock_guard lock(registry_mutex_);
    jobs_by_id_.erase(a.current->job->job_id);
    finished_jobs_.insert(a.current->job->job_id);
  }
  if (a.after_write != AssignmentState::AfterWrite::AssignmentComplete) {
    records.push_back(logs::AssignmentRecord{a.assignment_id, a.worker_id, a.condition, a.session_ids,
                                             logs::AssignmentStatus::Abandoned, std::nullopt});
  }
  a.after_write = AssignmentState::AfterWrite::None;
  a.stage = AssignmentState::Stage::Abandoned;
  a.current.reset();

  for (auto& record : records) {
    if (persist(record)) continue;
    std::lock_guard lock(pending_mutex_);
    pending_writes_.push_back(std::move(record));
  }
  emit(*a.channel, ServerType::Error, {}, error_payload("SessionAbandoned", reason, 0));
}

void Orchestrator::release_slot(const std::string& worker_id) {
  std::lock_guard lock(registry_mutex_);
  assignments_.erase(worker_id);
  while (!queue_.empty() && (config_.max_active_assignments == 0 ||
                             assignments_.size() < static_cast<std::size_t>(config_.max_active_assignments))) {
    const auto next = queue_.front();
    queue_.pop_front();
    start_assignment_locked(next, nullptr);
  }
  for (std::size_t i = 0; i < queue_.size(); ++i)
    emit(*channel_for(queue_[i]), ServerType::QueueStatus, {}, {{"position", static_cast<int>(i) + 1}});
}

ServerMessage Orchestrator::resume_session(const std::string& worker_id, const std::string& resume_token,
                                           ConnectionId connection) {
  std::shared_ptr<AssignmentState> a;
  {
    std::lock_guard lock(registry_mutex_);
    auto it = assignments_.find(worker_id);
    if (it != assignments_.end()) a = it->second;
  }
  if (!a) throw Error(ErrorCode::TokenExpired, "no resumable assignment for worker '" + worker_id + "'");

  bool expired = false;
  ServerMessage snapshot;
  {
    Lock lock(a->mutex);
    if (resume_token != a->resume_token) throw Error(ErrorCode::TokenExpired, "resume token does not match");
    if (a->stage == AssignmentState::Stage::Abandoned || a->stage == AssignmentState::Stage::Done)
      throw Error(ErrorCode::TokenExpired, "assignment " + a->assignment_id + " is over");
    const auto now = clock_();
    {
      std::lock_guard ch_lock(a->channel->mutex);
      expired = !a->channel->connection && now - a->channel->disconnected_at > config_.resume_window_ms;
    }
    if (expired) {
      abandon(*a, "resume window elapsed");
    } else {
      std::optional<ConnectionId> previous;
      {
        std::lock_guard reg(registry_mutex_);
        std::lock_guard ch_lock(a->channel->mutex);
        previous = a->channel->connection;
        if (previous && *previous != connection) connection_workers_.erase(*previous);
        a->channel->connection = connection;
        a->channel->last_client_seq = 0;  // a resumed client counts afresh
        connection_workers_[connection] = worker_id;
      }
      if (previous && *previous != connection && sink_)
        sink_(*previous, ServerMessage{ServerType::Error, {}, 0,
                                       error_payload("Superseded", "session resumed on another connection", 0)});

      if (a->current) {
        a->current->awaiting_since = now;
        std::vector<ServerMessage> out;
        emit(*a->channel, ServerType::GameStart, a->current->session.session_id, game_start_payload(*a, true), &out);
        if (a->current->job)
          emit(*a->channel, ServerType::Typing, a->current->session.session_id,
               {{"round", a->current->session.current_round}});
        snapshot = std::move(out.front());
      } else {
        a->awaiting_since = now;
        json dims = json::array();
        for (auto d : SurveyResponse::kDimensionNames) dims.push_back(d);
        std::vector<ServerMessage> out;
        emit(*a->channel, ServerType::SurveyRequest, {},
             {{"assignment_id", a->assignment_id}, {"dimensions", std::move(dims)}, {"scale", {1, 5}}}, &out);
        snapshot = std::move(out.front());
      }
    }
  }
  if (expired) {
    release_slot(worker_id);
    throw Error(ErrorCode::TokenExpired, "resume window elapsed; the game was abandoned");
  }
  return snapshot;
}

void Orchestrator::disconnect(ConnectionId connection) {
  std::lock_guard lock(registry_mutex_);
  auto it = connection_workers_.find(connection);
  if (it == connection_workers_.end()) return;
  const auto worker_id = it->second;
  connection_workers_.erase(it);
  auto ch = channel_for(worker_id);
  {
    std::lock_guard ch_lock(ch->mutex);
    if (ch->connection == connection) {
      ch->connection.reset();
      ch->disconnected_at = clock_();
    }
  }
  auto queued = std::find(queue_.begin(), queue_.end(), worker_id);
  if (queued != queue_.end()) {
    // never started, so the worker may join again later
    queue_.erase(queued);
    workers_seen_.erase(worker_id);
    for (std::size_t i = 0; i < queue_.size(); ++i)
      emit(*channel_for(queue_[i]), ServerType::QueueStatus, {}, {{"position", static_cast<int>(i) + 1}});
  }
}

void Orchestrator::tick() {
  const auto now = clock_();
  std::vector<std::shared_ptr<AssignmentState>> active;
  {
    std::lock_guard lock(registry_mutex_);
    for (const auto& [worker, a] : assignments_) active.push_back(a);
  }
  std::vector<std::string> ended;
  for (const auto& a : active) {
    Lock lock(a->mutex);
    if (a->stage == AssignmentState::Stage::Done || a->stage == AssignmentState::Stage::Abandoned) continue;

    if (!a->held.empty() || a->after_write != AssignmentState::AfterWrite::None) {
      flush_held(*a, nullptr);
      if (a->stage == AssignmentState::Stage::Done) ended.push_back(a->worker_id);
      continue;
    }
    if (a->current && a->current->job && now >= a->current->job->deadline) {
      const auto job_id = a->current->job->job_id;
      resolve_job(*a, job_id, a->current->job->attempt, JobOutcome::timeout("deadline passed"));
      continue;
    }

    bool connected = false;
    TimestampMs disconnected_at = 0;
    {
      std::lock_guard ch_lock(a->channel->mutex);
      connected = a->channel->connection.has_value();
      disconnected_at = a->channel->disconnected_at;
    }
    if (!connected) {
      if (now - disconnected_at > config_.resume_window_ms) {
        abandon(*a, "resume window elapsed");
        ended.push_back(a->worker_id);
      }
      continue;
    }
    const bool awaiting_human = a->current ? !a->current->job.has_value() : true;
    const auto since = a->current ? a->current->awaiting_since : a->awaiting_since;
    if (awaiting_human && now - since > config_.inactivity_timeout_ms) {
      abandon(*a, "inactivity timeout");
      ended.push_back(a->worker_id);
    }
  }
  for (const auto& worker : ended) release_slot(worker);

  std::vector<logs::LogRecord> retry;
  {
    std::lock_guard lock(pending_mutex_);
    retry.swap(pending_writes_);
  }
  for (auto& record : retry) {
    if (persist(record)) continue;
    std::lock_guard lock(pending_mutex_);
    pending_writes_.push_back(std::move(record));
  }
}

std::vector<Orchestrator::ConditionCount> Orchestrator::condition_counts() const {
  std::lock_guard lock(registry_mutex_);
  std::vector<ConditionCount> out;
  for (const auto& c : config_.conditions) out.push_back(counts_.at(c));
  return out;
}

std::size_t Orchestrator::active_assignments() const {
  std::lock_guard lock(registry_mutex_);
  return assignments_.size();
}

std::size_t Orchestrator::queued_workers() const {
  std::lock_guard lock(registry_mutex_);
  return queue_.size();
}

std::size_t Orchestrator::pending_jobs() const {
  std::lock_guard lock(registry_mutex_);
  return jobs_by_id_.size();
}

std::size_t Orchestrator::pending_writes() const {
  std::size_t n = 0;
  {
    std::lock_guard lock(pending_mutex_);
    n = pending_writes_.size();
  }
  return n;
}

}  // namespace guesswhich::service
