#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crossrecipe {

enum class ErrorCode {
  // corpus
  EmptyField,
  Unparseable,
  MissingDictionary,
  EmptyCorpus,
  // embeddings
  EmptyVocabulary,
  DimensionMismatch,
  // alignment
  ZeroVector,
  ShapeMismatch,
  UnknownQueryWord,
  EmptyQuerySet,
  // matching
  ProviderFailure,
  NoCandidateAboveFloor,
  // metrics
  EmptyInput,
  SyntaxError,
  DuplicateVariable,
  UndeclaredVariable,
  // analysis
  LengthMismatch,
  DegenerateInput,
  MissingScores,
  UndefinedRate,
  // adapters
  SlotMissing,
  Timeout,
  HttpError,
  EmptyCompletion,
  EmptyTargetCorpus,
  // annotation
  ComprehensionRequired,
  NoneAvailable,
  StaleLease,
  ValidationFailed,
  OutOfRange,
  UnknownTask,
  UnknownParticipant,
  // pipeline
  InvalidConfig,
  StageFailure,
  ManifestMissing,
  IntegrityError,
  Io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyField: return "EmptyField";
    case ErrorCode::Unparseable: return "Unparseable";
    case ErrorCode::MissingDictionary: return "MissingDictionary";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::EmptyVocabulary: return "EmptyVocabulary";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::UnknownQueryWord: return "UnknownQueryWord";
    case ErrorCode::EmptyQuerySet: return "EmptyQuerySet";
    case ErrorCode::ProviderFailure: return "ProviderFailure";
    case ErrorCode::NoCandidateAboveFloor: return "NoCandidateAboveFloor";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::DuplicateVariable: return "DuplicateVariable";
    case ErrorCode::UndeclaredVariable: return "UndeclaredVariable";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::MissingScores: return "MissingScores";
    case ErrorCode::UndefinedRate: return "UndefinedRate";
    case ErrorCode::SlotMissing: return "SlotMissing";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::HttpError: return "HttpError";
    case ErrorCode::EmptyCompletion: return "EmptyCompletion";
    case ErrorCode::EmptyTargetCorpus: return "EmptyTargetCorpus";
    case ErrorCode::ComprehensionRequired: return "ComprehensionRequired";
    case ErrorCode::NoneAvailable: return "NoneAvailable";
    case ErrorCode::StaleLease: return "StaleLease";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::UnknownTask: return "UnknownTask";
    case ErrorCode::UnknownParticipant: return "UnknownParticipant";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::StageFailure: return "StageFailure";
    case ErrorCode::ManifestMissing: return "ManifestMissing";
    case ErrorCode::IntegrityError: return "IntegrityError";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure in the library is reported as an Error carrying a code that
/// callers (CLI, service handlers) can switch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace crossrecipe
