#include "guesswhich/service/broker.hpp"

#include <spdlog/spdlog.h>

#include "guesswhich/error.hpp"

namespace guesswhich::service {

ThreadBroker::ThreadBroker(std::map<std::string, std::shared_ptr<agents::AnswerAgent>> agents, int threads)
    : agents_(std::move(agents)) {
  if (threads < 1) throw Error(ErrorCode::InvalidParameter, "broker needs at least one thread");
  for (int i = 0; i < threads; ++i) threads_.emplace_back([this] { run(); });
}

ThreadBroker::~ThreadBroker() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void ThreadBroker::bind(CompletionHandler handler) {
  std::lock_guard lock(handler_mutex_);
  handler_ = std::move(handler);
}

void ThreadBroker::submit(InferenceJob job) {
  {
    std::lock_guard lock(mutex_);
    queue_.push_back(std::move(job));
  }
  cv_.notify_one();
}

void ThreadBroker::run() {
  for (;;) {
    InferenceJob job;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      job = std::move(queue_.front());
      queue_.pop_front();
    }

    JobOutcome outcome;
    auto it = agents_.find(job.condition);
    if (it == agents_.end()) {
      outcome = JobOutcome::failure("no agent for condition '" + job.condition + "'");
    } else {
      try {
        auto resp = it->second->answer(job.request);
        if (resp.session_id != job.request.session_id)
          outcome = JobOutcome::failure("response for session '" + resp.session_id + "'");
        else
          outcome = JobOutcome::response(std::move(resp.answer));
      } catch (const Error& e) {
        outcome = e.code() == ErrorCode::AgentTimeout ? JobOutcome::timeout(e.what()) : JobOutcome::failure(e.what());
      } catch (const std::exception& e) {
        outcome = JobOutcome::failure(e.what());
      }
    }

    std::lock_guard lock(handler_mutex_);
    if (!handler_) continue;
    try {
      handler_(job.job_id, job.attempt, std::move(outcome));
    } catch (const std::exception& e) {
      spdlog::warn("completion of job {} failed: {}", job.job_id, e.what());
    }
  }
}

void ManualBroker::bind(CompletionHandler handler) {
  std::lock_guard lock(mutex_);
  handler_ = std::move(handler);
}

void ManualBroker::submit(InferenceJob job) {
  std::lock_guard lock(mutex_);
  jobs_.push_back(std::move(job));
}

std::vector<InferenceJob> ManualBroker::submitted() const {
  std::lock_guard lock(mutex_);
  return jobs_;
}

void ManualBroker::complete(const std::string& job_id, int attempt, JobOutcome outcome) {
  CompletionHandler handler;
  {
    std::lock_guard lock(mutex_);
    handler = handler_;
  }
  if (handler) handler(job_id, attempt, std::move(outcome));
}

}  // namespace guesswhich::service
