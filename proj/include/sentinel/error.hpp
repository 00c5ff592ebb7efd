#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sentinel {

enum class ErrorKind {
  MalformedLine,
  NonMonotoneTimestamp,
  EmptyInput,
  InvalidSpan,
  InsufficientData,
  BadRank,
  EigenFailure,
  DimensionMismatch,
  NonConvergence,
  TrainingDiverged,
  DegenerateLabels,
  SpanOutOfRange,
  ModelFormat,
  VocabularyMismatch,
  IntervalMismatch,
  Config,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedLine: return "MalformedLine";
    case ErrorKind::NonMonotoneTimestamp: return "NonMonotoneTimestamp";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::InvalidSpan: return "InvalidSpan";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::BadRank: return "BadRank";
    case ErrorKind::EigenFailure: return "EigenFailure";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::TrainingDiverged: return "TrainingDiverged";
    case ErrorKind::DegenerateLabels: return "DegenerateLabels";
    case ErrorKind::SpanOutOfRange: return "SpanOutOfRange";
    case ErrorKind::ModelFormat: return "ModelFormat";
    case ErrorKind::VocabularyMismatch: return "VocabularyMismatch";
    case ErrorKind::IntervalMismatch: return "IntervalMismatch";
    case ErrorKind::Config: return "Config";
  }
  return "Unknown";
}

/// Every failure the library reports carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require_dims(std::size_t got, std::size_t want, std::string_view what) {
  if (got != want) {
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + ": expected length " +
                                                  std::to_string(want) + ", got " +
                                                  std::to_string(got));
  }
}

}  // namespace sentinel
