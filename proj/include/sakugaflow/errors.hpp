#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sakugaflow {

// Closed set; the API reports these names verbatim in ApiError.code.
enum class ErrorCode {
  InvalidArgument,
  EmptySelection,
  DimensionMismatch,
  UndecodableImage,
  CapabilityMissing,
  ForeignNode,
  NotFound,
  AlreadyPending,
  AlreadyCompleted,
  NotCompleted,
  NotDraft,
  NoNextStage,
  StageViolation,
  BackendUnavailable,
  StorageFailure,
  CorruptLog,
  Internal,
};

std::string_view error_code_name(ErrorCode code);

/// HTTP status the service maps the code to.
int http_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by replay when a log record cannot be read or applied.
/// last_valid_seq is absent when not even record 0 is readable.
class CorruptLogError : public Error {
 public:
  CorruptLogError(std::optional<std::uint64_t> last_valid_seq, const std::string& what);

  std::optional<std::uint64_t> last_valid_seq() const noexcept { return last_valid_seq_; }

 private:
  std::optional<std::uint64_t> last_valid_seq_;
};

}  // namespace sakugaflow
