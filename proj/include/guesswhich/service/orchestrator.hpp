#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "guesswhich/game.hpp"
#include "guesswhich/game_log.hpp"
#include "guesswhich/rng.hpp"
#include "guesswhich/service/broker.hpp"
#include "guesswhich/service/log_store.hpp"
#include "guesswhich/service/protocol.hpp"

namespace guesswhich::service {

enum class ConditionMode { PerWorker, PerGame };

struct OrchestratorConfig {
  std::vector<std::string> conditions;
  ConditionMode condition_mode = ConditionMode::PerWorker;
  int games_per_assignment = 10;
  int max_active_assignments = 0;  // 0: no limit, nobody waits in the queue
  TimestampMs resume_window_ms = 5 * 60 * 1000;
  TimestampMs inactivity_timeout_ms = 5 * 60 * 1000;
  TimestampMs agent_deadline_ms = 10 * 1000;
  int retry_limit = 1;
  int storage_retries = 2;
  std::string fallback_answer{agents::kDefaultUnknownAnswer};
  std::string image_url_prefix = "/images/";
  std::optional<std::uint64_t> token_seed;  // resume tokens; random when unset
  game::GameConfig game;
  game::BonusConfig bonus;

  /// Throws InvalidConfig.
  void validate() const;
};

/// Transport handle of one client connection.
using ConnectionId = std::uint64_t;

enum class DeliveryAction { Delivered, Retried, FallbackDelivered, Ignored };

struct EnqueueResult {
  bool started = false;  // false: waiting in the queue
  std::string assignment_id;
  std::string condition;
  int queue_position = 0;  // 1-based when waiting
};

/// Real-time game service core, independent of the transport. All server
/// messages leave through the sink, in seq order per worker; the sink must
/// not call back into the orchestrator.
///
/// Locking: each assignment has a mutex serializing its sessions; the
/// registry mutex guards workers, queue, jobs and counters; each worker
/// channel has a leaf mutex for seq numbering. Order: assignment, registry,
/// channel. A new assignment is locked under the registry before anyone
/// else can see it.
class Orchestrator {
 public:
  using Sink = std::function<void(ConnectionId, const ServerMessage&)>;
  using Clock = std::function<TimestampMs()>;

  /// Workers already present in `store` count as having had an assignment.
  Orchestrator(OrchestratorConfig config, std::vector<PoolSpec> pools, JobBroker& broker, LogStore& store, Sink sink,
               Clock clock = system_now_ms);
  ~Orchestrator();

  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  /// Pairs a fresh worker with the least-filled condition, or queues them
  /// when the active-assignment limit is reached. Throws RepeatWorker or
  /// NoPoolsAvailable.
  EnqueueResult enqueue_worker(const std::string& worker_id, ConnectionId connection,
                               std::vector<ServerMessage>* out = nullptr);

  /// Handles one client message and returns the messages it sent to that
  /// client (asynchronous ones, such as answers, arrive through the sink
  /// only). Failures are reported to the client as Error messages.
  std::vector<ServerMessage> route_client_message(ConnectionId connection, const ClientMessage& msg);

  /// Idempotent per (job, attempt); stale attempts are ignored. Throws UnknownJob.
  DeliveryAction complete_inference_job(const std::string& job_id, int attempt, const JobOutcome& outcome);

  /// Rebinds the worker to `connection` and sends a GameStart carrying a
  /// full snapshot. Throws TokenExpired; an expired window also abandons.
  ServerMessage resume_session(const std::string& worker_id, const std::string& resume_token,
                               ConnectionId connection);

  void disconnect(ConnectionId connection);

  /// Enforces agent deadlines, inactivity timeouts and resume windows, and
  /// retries pending storage writes. Call periodically.
  void tick();

  struct ConditionCount {
    std::string condition;
    int assignments = 0;
    int games = 0;
  };
  std::vector<ConditionCount> condition_counts() const;
  std::size_t active_assignments() const;
  std::size_t queued_workers() const;
  std::size_t pending_jobs() const;
  /// Records held in memory because the store kept failing.
  std::size_t pending_writes() const;

 private:
  struct Channel;
  struct Game;
  struct AssignmentState;
  struct Job;

  using Lock = std::unique_lock<std::mutex>;

  std::shared_ptr<Channel> channel_for(const std::string& worker_id);
  std::shared_ptr<AssignmentState> assignment_of_connection(ConnectionId connection, std::string& worker_id);
  void emit(Channel& channel, ServerType type, const std::string& session_id, nlohmann::json payload,
            std::vector<ServerMessage>* out = nullptr);

  std::string pick_condition_locked(bool per_game);
  EnqueueResult start_assignment_locked(const std::string& worker_id, std::vector<ServerMessage>* out);
  void start_game(AssignmentState& a, std::vector<ServerMessage>* out);
  void begin_game(AssignmentState& a, std::string condition, std::vector<ServerMessage>* out);
  nlohmann::json game_start_payload(const AssignmentState& a, bool with_snapshot) const;

  void handle_game_message(AssignmentState& a, const ClientMessage& msg, std::vector<ServerMessage>& out);
  void handle_survey(AssignmentState& a, const ClientMessage& msg, std::vector<ServerMessage>& out);
  void apply(AssignmentState& a, game::EventPayload payload);
  void submit_job(AssignmentState& a, Job job);
  DeliveryAction resolve_job(AssignmentState& a, const std::string& job_id, int attempt, const JobOutcome& outcome);
  void finish_game(AssignmentState& a, std::vector<ServerMessage>* out);
  /// Writes held records in order, then runs the pending continuation.
  bool flush_held(AssignmentState& a, std::vector<ServerMessage>* out);
  void abandon(AssignmentState& a, const std::string& reason);
  bool persist(const logs::LogRecord& record);
  /// Drops the worker's assignment and starts queued workers. Registry not held.
  void release_slot(const std::string& worker_id);

  OrchestratorConfig config_;
  std::vector<PoolSpec> pools_;
  JobBroker& broker_;
  LogStore& store_;
  Sink sink_;
  Clock clock_;

  mutable std::mutex registry_mutex_;
  std::set<std::string> workers_seen_;
  std::map<std::string, std::shared_ptr<Channel>> channels_;
  std::map<ConnectionId, std::string> connection_workers_;
  std::map<std::string, std::shared_ptr<AssignmentState>> assignments_;  // by worker_id, active only
  std::map<std::string, std::shared_ptr<AssignmentState>> jobs_by_id_;  // unresolved jobs
  std::set<std::string> finished_jobs_;
  std::set<std::string> existing_assignments_;
  std::deque<std::string> queue_;
  std::map<std::string, ConditionCount> counts_;
  std::size_t pool_cursor_ = 0;
  std::uint64_t next_assignment_ = 1;
  std::uint64_t next_job_ = 1;
  Rng token_rng_;

  mutable std::mutex pending_mutex_;
  std::vector<logs::LogRecord> pending_writes_;
};

}  // namespace guesswhich::service
