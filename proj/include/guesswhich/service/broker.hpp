#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "guesswhich/agent.hpp"
#include "guesswhich/types.hpp"

namespace guesswhich::service {

struct InferenceJob {
  std::string job_id;
  std::string session_id;
  std::string condition;  // selects the answerer
  agents::AnswerRequest request;
  int attempt = 1;
  TimestampMs deadline = 0;
};

struct JobOutcome {
  enum class Kind { Response, Timeout, Failure };
  Kind kind = Kind::Response;
  std::string answer;  // Response only
  std::string detail;  // why a Timeout or Failure happened

  static JobOutcome response(std::string answer) { return {Kind::Response, std::move(answer), {}}; }
  static JobOutcome timeout(std::string detail = {}) { return {Kind::Timeout, {}, std::move(detail)}; }
  static JobOutcome failure(std::string detail) { return {Kind::Failure, {}, std::move(detail)}; }
};

using CompletionHandler = std::function<void(const std::string& job_id, int attempt, JobOutcome outcome)>;

/// Runs inference jobs and reports each (job, attempt) outcome at least once.
/// Deadlines are enforced by the orchestrator, not the broker.
class JobBroker {
 public:
  virtual ~JobBroker() = default;
  /// Installs the completion handler; an empty handler detaches the broker
  /// and waits until no completion is in flight.
  virtual void bind(CompletionHandler handler) = 0;
  virtual void submit(InferenceJob job) = 0;
};

/// In-process broker: a fixed pool of threads calling the condition's agent.
/// Agent errors map to Timeout (AgentTimeout) or Failure (anything else).
class ThreadBroker final : public JobBroker {
 public:
  ThreadBroker(std::map<std::string, std::shared_ptr<agents::AnswerAgent>> agents, int threads = 4);
  ~ThreadBroker() override;

  ThreadBroker(const ThreadBroker&) = delete;
  ThreadBroker& operator=(const ThreadBroker&) = delete;

  void bind(CompletionHandler handler) override;
  void submit(InferenceJob job) override;

 private:
  void run();

  std::map<std::string, std::shared_ptr<agents::AnswerAgent>> agents_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<InferenceJob> queue_;
  bool stopping_ = false;
  // Held while a completion runs, so rebinding waits for it.
  std::mutex handler_mutex_;
  CompletionHandler handler_;
  std::vector<std::thread> threads_;
};

/// Collects jobs and leaves completion to the caller; for tests and for
/// adapters that hand jobs to an external queue.
class ManualBroker final : public JobBroker {
 public:
  void bind(CompletionHandler handler) override;
  void submit(InferenceJob job) override;

  std::vector<InferenceJob> submitted() const;
  /// Delivers an outcome through the bound handler, as an external queue would.
  void complete(const std::string& job_id, int attempt, JobOutcome outcome);

 private:
  mutable std::mutex mutex_;
  std::vector<InferenceJob> jobs_;
  CompletionHandler handler_;
};

}  // namespace guesswhich::service
