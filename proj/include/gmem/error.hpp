#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gmem {

enum class ErrorCode {
  MalformedCaption,
  InconsistentSpans,
  TypeConflict,
  UnknownNote,
  IoFailure,
  CorruptSnapshot,
  InvalidWindowSize,
  CaptionerFailure,
  DimensionMismatch,
  SyntaxError,
  ForbiddenClause,
  UnboundVariable,
  EmptySeedSet,
  EmptyGraph,
  Timeout,
  RateLimited,
  MalformedResponse,
  ProviderUnavailable,
  HermeticViolation,
  UnparseableQuery,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code);

/// Base error for everything the engine raises. Carries a stable code so
/// callers (HTTP layer, CLI) can map failures without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gmem
