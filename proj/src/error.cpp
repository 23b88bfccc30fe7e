#include "guesswhich/error.hpp"

namespace guesswhich {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidPool: return "InvalidPool";
    case ErrorCode::PoolMismatch: return "PoolMismatch";
    case ErrorCode::IllegalTransition: return "IllegalTransition";
    case ErrorCode::UnknownImage: return "UnknownImage";
    case ErrorCode::DuplicateFinalGuess: return "DuplicateFinalGuess";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::SecretNotTerminal: return "SecretNotTerminal";
    case ErrorCode::IncompleteAssignment: return "IncompleteAssignment";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyCategory: return "EmptyCategory";
    case ErrorCode::InsufficientShellPopulation: return "InsufficientShellPopulation";
    case ErrorCode::MissingEmbedding: return "MissingEmbedding";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::AgentTimeout: return "AgentTimeout";
    case ErrorCode::AgentUnavailable: return "AgentUnavailable";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::RepeatWorker: return "RepeatWorker";
    case ErrorCode::NoPoolsAvailable: return "NoPoolsAvailable";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::SessionNotFound: return "SessionNotFound";
    case ErrorCode::UnknownJob: return "UnknownJob";
    case ErrorCode::TokenExpired: return "TokenExpired";
    case ErrorCode::StorageError: return "StorageError";
    case ErrorCode::RecordExists: return "RecordExists";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonPositiveRank: return "NonPositiveRank";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::VerificationFailed: return "VerificationFailed";
    case ErrorCode::NetworkError: return "NetworkError";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UsageError:
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidParameter:
      return 2;
    case ErrorCode::InvalidPool:
    case ErrorCode::PoolMismatch:
    case ErrorCode::IllegalTransition:
    case ErrorCode::UnknownImage:
    case ErrorCode::DuplicateFinalGuess:
    case ErrorCode::EmptyText:
    case ErrorCode::SecretNotTerminal:
    case ErrorCode::IncompleteAssignment:
    case ErrorCode::ParseError:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::DuplicateId:
    case ErrorCode::EmptyCategory:
    case ErrorCode::InsufficientShellPopulation:
    case ErrorCode::MissingEmbedding:
    case ErrorCode::SchemaError:
    case ErrorCode::EmptyInput:
    case ErrorCode::NonPositiveRank:
    case ErrorCode::TooFewSamples:
    case ErrorCode::VerificationFailed:
    case ErrorCode::NoPoolsAvailable:
      return 3;
    default:
      return 4;
  }
}

}  // namespace guesswhich
