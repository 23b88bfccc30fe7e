#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace guesswhich {

enum class ErrorCode {
  // game_core
  InvalidConfig,
  InvalidPool,
  PoolMismatch,
  IllegalTransition,
  UnknownImage,
  DuplicateFinalGuess,
  EmptyText,
  SecretNotTerminal,
  IncompleteAssignment,
  // pool_builder
  ParseError,
  DimensionMismatch,
  DuplicateId,
  EmptyCategory,
  InsufficientShellPopulation,
  MissingEmbedding,
  // agents
  InvalidParameter,
  AgentTimeout,
  AgentUnavailable,
  MalformedResponse,
  // orchestrator
  RepeatWorker,
  NoPoolsAvailable,
  SchemaError,
  SessionNotFound,
  UnknownJob,
  TokenExpired,
  StorageError,
  RecordExists,
  // analytics
  EmptyInput,
  NonPositiveRank,
  TooFewSamples,
  // cli
  UsageError,
  VerificationFailed,
  NetworkError,
};

std::string_view to_string(ErrorCode code);

/// Exit-code class of an error: 2 usage, 3 data/schema, 4 runtime.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace guesswhich
